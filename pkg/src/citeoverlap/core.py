"""Domain types and normalization primitives shared by every stage."""

from __future__ import annotations

import csv
import enum
import functools
import re
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional


class SourceDatabase(str, enum.Enum):
    GS = "GS"
    WOS = "WOS"
    SCOPUS = "SCOPUS"

    @property
    def rank(self) -> int:
        """Canonical position used to orient pairwise edges (GS < WOS < SCOPUS)."""
        return _SOURCE_ORDER[self]


_SOURCE_ORDER = {SourceDatabase.GS: 0, SourceDatabase.WOS: 1, SourceDatabase.SCOPUS: 2}


class DocumentType(str, enum.Enum):
    JOURNAL = "JOURNAL"
    CONFERENCE = "CONFERENCE"
    BOOK = "BOOK"
    THESIS = "THESIS"
    UNPUBLISHED = "UNPUBLISHED"
    OTHER = "OTHER"
    UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class MatchPolicy:
    """Thresholds governing fuzzy title acceptance."""

    high_sim_threshold: float = 0.8
    low_sim_threshold: float = 0.7
    min_title_len: int = 30

    def __post_init__(self):
        if not (0 < self.low_sim_threshold <= self.high_sim_threshold <= 1):
            raise ValueError(
                "MatchPolicy requires 0 < low_sim_threshold <= high_sim_threshold <= 1, got "
                f"low={self.low_sim_threshold!r} high={self.high_sim_threshold!r}"
            )
        if int(self.min_title_len) != self.min_title_len or self.min_title_len < 1:
            raise ValueError(f"min_title_len must be an integer >= 1, got {self.min_title_len!r}")


@dataclass
class CitingRecord:
    """One citing document as reported by one source database.

    Field order is the key order of the canonical JSON-lines record file.
    ``resolved`` marks records whose type/language came from a DOI resolver.
    """

    record_id: str
    source: SourceDatabase
    cited_doc_id: str
    title_raw: str
    title_norm: str = ""
    authors: list[str] = field(default_factory=list)
    first_author_key: str = ""
    year: Optional[int] = None
    venue: Optional[str] = None
    doi: Optional[str] = None
    url: Optional[str] = None
    doc_type_raw: Optional[str] = None
    doc_type: DocumentType = DocumentType.UNKNOWN
    language: Optional[str] = None
    citation_count: Optional[int] = None
    resolved: bool = False

    def __post_init__(self):
        if not self.record_id:
            raise ValueError("record_id must be non-empty")
        if not self.cited_doc_id:
            raise ValueError(f"record {self.record_id}: cited_doc_id must be non-empty")
        self.source = SourceDatabase(self.source)
        self.doc_type = DocumentType(self.doc_type)
        self.title_norm = normalize_title(self.title_raw)
        if self.doi is not None and normalize_doi(self.doi) != self.doi:
            raise ValueError(f"record {self.record_id}: doi {self.doi!r} is not normalized")
        if self.citation_count is not None and self.citation_count < 0:
            raise ValueError(f"record {self.record_id}: negative citation_count")
        if not self.first_author_key and self.authors:
            self.first_author_key = normalize_person(self.authors[0])

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "source": self.source.value,
            "cited_doc_id": self.cited_doc_id,
            "title_raw": self.title_raw,
            "title_norm": self.title_norm,
            "authors": list(self.authors),
            "first_author_key": self.first_author_key,
            "year": self.year,
            "venue": self.venue,
            "doi": self.doi,
            "url": self.url,
            "doc_type_raw": self.doc_type_raw,
            "doc_type": self.doc_type.value,
            "language": self.language,
            "citation_count": self.citation_count,
            "resolved": self.resolved,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CitingRecord":
        return cls(
            record_id=d["record_id"],
            source=SourceDatabase(d["source"]),
            cited_doc_id=d["cited_doc_id"],
            title_raw=d.get("title_raw") or "",
            authors=list(d.get("authors") or []),
            first_author_key=d.get("first_author_key") or "",
            year=d.get("year"),
            venue=d.get("venue"),
            doi=d.get("doi"),
            url=d.get("url"),
            doc_type_raw=d.get("doc_type_raw"),
            doc_type=DocumentType(d.get("doc_type") or "UNKNOWN"),
            language=d.get("language"),
            citation_count=d.get("citation_count"),
            resolved=bool(d.get("resolved", False)),
        )


_DOI_PREFIX_RE = re.compile(r"^(?:https?://(?:dx\.)?doi\.org/|doi:\s*)", re.IGNORECASE)
_DOI_RE = re.compile(r"^10\.\d{4,9}/\S+$")


def normalize_doi(raw: Optional[str]) -> Optional[str]:
    """Return the canonical lowercase ``10.xxxx/suffix`` form of a DOI, or None."""
    if raw is None:
        return None
    doi = raw.strip()
    # a resolver URL may itself carry a "doi:" label, and vice versa
    for _ in range(2):
        doi = _DOI_PREFIX_RE.sub("", doi).strip()
    doi = doi.lower()
    if _DOI_RE.match(doi):
        return doi
    return None


_WS_RE = re.compile(r"\s+")


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def normalize_title(raw: Optional[str]) -> str:
    """Lowercase a title, turn punctuation into spaces, and collapse whitespace."""
    if not raw:
        return ""
    text = unicodedata.normalize("NFKC", raw).lower()
    text = "".join(" " if _is_punct(ch) else ch for ch in text)
    return _WS_RE.sub(" ", text).strip()


def strip_diacritics(text: str) -> str:
    decomposed = unicodedata.normalize("NFKD", text)
    return "".join(ch for ch in decomposed if not unicodedata.combining(ch))


def normalize_person(raw: Optional[str]) -> str:
    """Reduce an author string to a lowercase, accent-free family-name key.

    >>> normalize_person("Delgado López-Cózar, E.")
    'delgado lopez-cozar'
    >>> normalize_person("Mike Thelwall")
    'thelwall'
    """
    if not raw or not raw.strip():
        return ""
    text = raw.strip()
    if "," in text:
        family = text.split(",", 1)[0]
    else:
        family = text.split()[-1]
    family = _WS_RE.sub(" ", strip_diacritics(family)).strip().lower()
    return family.strip(".")


@functools.lru_cache(maxsize=None)
def _default_type_table() -> dict[str, DocumentType]:
    with resources.files("citeoverlap.data").joinpath("doc_types.csv").open(encoding="utf-8") as fh:
        return _read_type_table(fh)


def _read_type_table(fh) -> dict[str, DocumentType]:
    table = {}
    for row in csv.DictReader(fh):
        table[row["raw_type"].strip().lower()] = DocumentType(row["canonical_type"].strip().upper())
    return table


def load_type_table(path: str | Path) -> dict[str, DocumentType]:
    """Read a ``raw_type,canonical_type`` CSV into a lookup table."""
    with open(path, encoding="utf-8", newline="") as fh:
        return _read_type_table(fh)


def classify_doc_type(
    raw: Optional[str], table: Optional[Mapping[str, DocumentType]] = None
) -> DocumentType:
    if raw is None:
        return DocumentType.UNKNOWN
    if table is None:
        table = _default_type_table()
    return table.get(_WS_RE.sub(" ", raw).strip().lower(), DocumentType.UNKNOWN)
