"""Writing the analytics bundle: fixed-column CSVs plus a JSON mirror."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .analytics import (
    ClusterIndex,
    citation_count_table,
    correlation_table,
    distribution_tables,
    region_table,
)
from .core import SourceDatabase
from .enrich import CorrectionSample
from .ingest import CategoryMap

TABLE_COLUMNS = {
    "regions": ["level", "group", "G", "W", "S", "GW", "GSc", "WS", "GWS", "total",
                "pct_gs_all", "pct_wos_all", "pct_scopus_all",
                "pct_wos_in_gs", "pct_scopus_in_gs", "pct_wos_in_scopus"],
    "doc_types": ["area", "group", "doc_type", "share", "corrected", "n"],
    "languages": ["area", "group", "language", "share", "n"],
    "missed_by_gs": ["area", "source", "kind", "bucket", "count", "share"],
    "citation_counts": ["area", "group", "n", "median_log", "mean_log", "ci_half_width"],
    "correlation_gs_wos": ["category", "n", "spearman_r", "mean_ratio", "mean_log_gs", "mean_log_other"],
    "correlation_gs_scopus": ["category", "n", "spearman_r", "mean_ratio", "mean_log_gs", "mean_log_other"],
}


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def write_table(path: Path, columns: Sequence[str], rows: Sequence[Mapping]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])


def build_tables(
    index: ClusterIndex,
    category_map: Optional[CategoryMap],
    cited_map: Optional[CategoryMap],
    corrections: Optional[Mapping[str, CorrectionSample]],
    top_k: int = 11,
) -> tuple[dict, list[str], list[str]]:
    """Compute every table; returns (tables, skipped table names, unmapped venues)."""
    dist = distribution_tables(index, category_map, corrections, top_k)
    tables = {
        "regions": region_table(index, cited_map),
        "doc_types": dist["doc_types"],
        "languages": dist["languages"],
        "missed_by_gs": dist["missed_by_gs"],
        "citation_counts": citation_count_table(index),
    }
    skipped = []
    if category_map is None:
        skipped += ["correlation_gs_wos", "correlation_gs_scopus", "missed_by_gs quartiles"]
    else:
        tables["correlation_gs_wos"] = [
            r.as_dict() for r in correlation_table(index, category_map, SourceDatabase.WOS)]
        tables["correlation_gs_scopus"] = [
            r.as_dict() for r in correlation_table(index, category_map, SourceDatabase.SCOPUS)]
    return tables, skipped, dist["unmapped_venues"]


def write_bundle(out_dir, tables: Mapping[str, list], extra: Mapping) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, rows in tables.items():
        write_table(out / f"{name}.csv", TABLE_COLUMNS[name], rows)
    summary = {"tables": {k: tables[k] for k in sorted(tables)}, **extra}
    with open(out / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, ensure_ascii=False, indent=1, sort_keys=True)
        fh.write("\n")
