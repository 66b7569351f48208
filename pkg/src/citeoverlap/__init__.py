"""Link citation records from three bibliographic databases and measure their overlap."""

__version__ = "0.1.0"
