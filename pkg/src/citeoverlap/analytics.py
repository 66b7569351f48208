"""Overlap regions, coverage, distributions, count summaries and correlations."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, fields
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import CitingRecord, DocumentType, SourceDatabase
from .enrich import CorrectionSample, apply_correction, detect_language
from .ingest import CategoryMap
from .linkage import CitationCluster

GS, WOS, SCOPUS = SourceDatabase.GS, SourceDatabase.WOS, SourceDatabase.SCOPUS

REGIONS = ("G", "W", "S", "GW", "GSc", "WS", "GWS")
_REGION_OF = {
    frozenset({GS}): "G",
    frozenset({WOS}): "W",
    frozenset({SCOPUS}): "S",
    frozenset({GS, WOS}): "GW",
    frozenset({GS, SCOPUS}): "GSc",
    frozenset({WOS, SCOPUS}): "WS",
    frozenset({GS, WOS, SCOPUS}): "GWS",
}
ALL = "all"
UNIQUE_GS = "unique_gs"
OVERLAPPING = "overlapping"
UNMAPPED = "unmapped"


def region_of(presence: Iterable[SourceDatabase]) -> str:
    return _REGION_OF[frozenset(presence)]


# -- regions & coverage ----------------------------------------------------------


@dataclass
class RegionCounts:
    G: int = 0
    W: int = 0
    S: int = 0
    GW: int = 0
    GSc: int = 0
    WS: int = 0
    GWS: int = 0

    @property
    def total(self) -> int:
        return sum(getattr(self, r) for r in REGIONS)

    def as_dict(self) -> dict:
        d = {r: getattr(self, r) for r in REGIONS}
        d["total"] = self.total
        return d


def partition_regions(
    clusters: Iterable[CitationCluster], group_filter: Optional[Callable[[CitationCluster], bool]] = None
) -> RegionCounts:
    rc = RegionCounts()
    for c in clusters:
        if group_filter is not None and not group_filter(c):
            continue
        name = region_of(c.presence)
        setattr(rc, name, getattr(rc, name) + 1)
    return rc


@dataclass
class CoverageSummary:
    """Percentages in [0, 100]; conditional ones are None when their base is empty."""

    pct_gs_all: float
    pct_wos_all: float
    pct_scopus_all: float
    pct_wos_in_gs: Optional[float]
    pct_scopus_in_gs: Optional[float]
    pct_wos_in_scopus: Optional[float]

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _pct(num: int, den: int) -> Optional[float]:
    return None if den == 0 else 100.0 * num / den


def coverage_metrics(rc: RegionCounts) -> CoverageSummary:
    total = rc.total
    if total == 0:
        raise ValueError("coverage is undefined for zero clusters")
    gs = rc.G + rc.GW + rc.GSc + rc.GWS
    wos = rc.W + rc.GW + rc.WS + rc.GWS
    scopus = rc.S + rc.GSc + rc.WS + rc.GWS
    return CoverageSummary(
        pct_gs_all=_pct(gs, total),
        pct_wos_all=_pct(wos, total),
        pct_scopus_all=_pct(scopus, total),
        pct_wos_in_gs=_pct(rc.GW + rc.GWS, wos),
        pct_scopus_in_gs=_pct(rc.GSc + rc.GWS, scopus),
        pct_wos_in_scopus=_pct(rc.WS + rc.GWS, wos),
    )


# -- statistics ---------------------------------------------------------------------


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    x = np.asarray(values, dtype=float)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x), dtype=float)
    start = 0
    n = len(x)
    while start < n:
        stop = start + 1
        while stop < n and xs[stop] == xs[start]:
            stop += 1
        ranks[order[start:stop]] = (start + stop + 1) / 2.0
        start = stop
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    """Spearman's rho with average ranks for ties; None if either side is constant."""
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise ValueError("spearman needs at least two observations")
    rx = average_ranks(xs)
    ry = average_ranks(ys)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return None
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def mean_ratio(pairs: Sequence[tuple[int, int]]) -> float:
    """Mean of ``(1 + gs) / (1 + other)`` over citation-count pairs."""
    if not pairs:
        raise ValueError("mean_ratio needs at least one pair")
    return sum((1 + g) / (1 + o) for g, o in pairs) / len(pairs)


@dataclass
class CountSummary:
    n: int
    median_log: float
    mean_log: float
    ci_half_width: float


def log_summary(counts: Sequence[int]) -> CountSummary:
    """Median, mean and normal-approximation 95% CI of ``ln(1 + x)``."""
    if len(counts) < 1:
        raise ValueError("log_summary needs at least one count")
    logs = np.log1p(np.asarray(counts, dtype=float))
    n = len(logs)
    half = 1.96 * float(np.std(logs, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
    return CountSummary(n, float(np.median(logs)), float(logs.mean()), half)


# -- cluster views -------------------------------------------------------------------

# representative preference: resolved metadata, then WoS, Scopus, GS
_REP_RANK = {WOS: 1, SCOPUS: 2, GS: 3}


def representative(members: Sequence[CitingRecord]) -> CitingRecord:
    return min(members, key=lambda r: (0 if r.resolved else _REP_RANK[r.source], r.record_id))


def first_of(members: Sequence[CitingRecord], source: SourceDatabase) -> Optional[CitingRecord]:
    own = sorted((r for r in members if r.source is source), key=lambda r: r.record_id)
    return own[0] if own else None


def cluster_doc_type(members: Sequence[CitingRecord]) -> DocumentType:
    """Type of the representative, or of the next best member that knows it."""
    ranked = sorted(members, key=lambda r: (0 if r.resolved else _REP_RANK[r.source], r.record_id))
    for r in ranked:
        if r.doc_type is not DocumentType.UNKNOWN:
            return r.doc_type
    return DocumentType.UNKNOWN


def cluster_language(members: Sequence[CitingRecord], **detector_kw) -> Optional[str]:
    """Metadata language of a non-WoS member, else the WoS language, else title detection."""
    ranked = sorted(members, key=lambda r: (0 if r.resolved else _REP_RANK[r.source], r.record_id))
    wos = first_of(members, WOS)
    for r in ranked:
        if r.source is not WOS and r.language:
            return r.language
    rep = next((r for r in ranked if r.source is not WOS), ranked[0])
    return detect_language(rep, wos.language if wos else None, **detector_kw)


def cluster_group(c: CitationCluster) -> Optional[str]:
    if c.presence == frozenset({GS}):
        return UNIQUE_GS
    if len(c.presence) >= 2:
        return OVERLAPPING
    return None


@dataclass
class ClusterIndex:
    """Clusters joined to their member records and the cited document's area."""

    clusters: list
    members: dict
    area_of: Callable[[str], str]

    @classmethod
    def build(cls, clusters, records, cited_map: Optional[CategoryMap] = None):
        by_key = {(r.cited_doc_id, r.record_id): r for r in records}
        members = {}
        for c in clusters:
            members[c.cluster_id] = [by_key[(c.cited_doc_id, m)] for m in c.members]

        def area_of(cited_doc_id):
            if cited_map is None:
                return UNMAPPED
            e = cited_map.get(cited_doc_id)
            return e.broad_area if e else UNMAPPED

        return cls(list(clusters), members, area_of)

    def areas(self) -> list[str]:
        return sorted({self.area_of(c.cited_doc_id) for c in self.clusters})

    def groups(self):
        """Yield ``(area, clusters)`` for ``all`` and every broad area."""
        yield ALL, self.clusters
        by_area = defaultdict(list)
        for c in self.clusters:
            by_area[self.area_of(c.cited_doc_id)].append(c)
        for area in sorted(by_area):
            yield area, by_area[area]


def region_table(index: ClusterIndex, cited_map: Optional[CategoryMap] = None) -> list[dict]:
    """Region counts and coverage for all clusters, each broad area and each category."""
    rows = []
    grouped = [("area", a, cs) for a, cs in index.groups()]
    if cited_map is not None:
        by_cat = defaultdict(list)
        for c in index.clusters:
            e = cited_map.get(c.cited_doc_id)
            by_cat[e.category if e else UNMAPPED].append(c)
        grouped += [("category", k, by_cat[k]) for k in sorted(by_cat)]
    for level, key, cs in grouped:
        rc = partition_regions(cs)
        if rc.total == 0:
            continue
        rows.append({"level": level, "group": key, **rc.as_dict(), **coverage_metrics(rc).as_dict()})
    return rows


# -- distributions ------------------------------------------------------------------


def _shares(counter: Mapping, total: int) -> dict:
    return {k: v / total for k, v in counter.items()}


def type_distribution(
    members_list: Iterable[Sequence[CitingRecord]], sample: Optional[CorrectionSample] = None
) -> tuple[dict[DocumentType, float], bool]:
    counts = Counter(cluster_doc_type(m) for m in members_list)
    n = sum(counts.values())
    if n == 0:
        return {}, False
    raw = {t: counts.get(t, 0) / n for t in DocumentType}
    if sample is None or not sample.labels:
        return raw, False
    unknown_share = raw.pop(DocumentType.UNKNOWN)
    corrected = apply_correction(raw, unknown_share, sample.distribution(), group=sample.group)
    return corrected.shares, True


def language_distribution(langs: Sequence[Optional[str]], top_k: int = 11) -> dict[str, float]:
    """Shares of the ``top_k`` most frequent languages; the rest go to ``other``.

    Unidentified languages are reported as ``und``.
    """
    n = len(langs)
    if n == 0:
        return {}
    counts = Counter(lang or "und" for lang in langs)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    out = {k: v / n for k, v in ranked[:top_k]}
    rest = sum(v for _, v in ranked[top_k:])
    if rest:
        out["other"] = rest / n
    return out


def distribution_tables(
    index: ClusterIndex,
    category_map: Optional[CategoryMap] = None,
    corrections: Optional[Mapping[str, CorrectionSample]] = None,
    top_k: int = 11,
) -> dict[str, list[dict]]:
    """Type, language and missed-by-GS tables grouped by area and unique/overlapping.

    A correction sample keyed by broad area is applied to both groups of that area.
    """
    corrections = corrections or {}
    type_rows, lang_rows, missed_rows, unmapped = [], [], [], set()
    langs_cache = {}

    def lang(c):
        if c.cluster_id not in langs_cache:
            langs_cache[c.cluster_id] = cluster_language(index.members[c.cluster_id])
        return langs_cache[c.cluster_id]

    for area, cs in index.groups():
        split = defaultdict(list)
        for c in cs:
            g = cluster_group(c)
            if g:
                split[g].append(c)
        for g in (UNIQUE_GS, OVERLAPPING):
            group_cs = split.get(g, [])
            if not group_cs:
                continue
            shares, corrected = type_distribution(
                (index.members[c.cluster_id] for c in group_cs), corrections.get(area)
            )
            for t in DocumentType:
                if t in shares:
                    type_rows.append({"area": area, "group": g, "doc_type": t.value,
                                      "share": shares[t], "corrected": corrected, "n": len(group_cs)})
            for code, share in language_distribution([lang(c) for c in group_cs], top_k).items():
                lang_rows.append({"area": area, "group": g, "language": code, "share": share,
                                  "n": len(group_cs)})

        for source in (WOS, SCOPUS):
            missed = [c for c in cs if source in c.presence and GS not in c.presence]
            if not missed:
                continue
            recs = [first_of(index.members[c.cluster_id], source) for c in missed]
            n = len(recs)
            types = Counter(r.doc_type.value for r in recs)
            for t in DocumentType:
                if types.get(t.value):
                    missed_rows.append({"area": area, "source": source.value, "kind": "doc_type",
                                        "bucket": t.value, "count": types[t.value],
                                        "share": types[t.value] / n})
            if category_map is None:
                continue
            quart = Counter()
            for r in recs:
                if r.doc_type is not DocumentType.JOURNAL:
                    continue
                e = category_map.get(r.venue)
                if e is None:
                    quart[UNMAPPED] += 1
                    unmapped.add(r.venue or "")
                else:
                    quart[e.quartile or "none"] += 1
            for q in ("Q1", "Q2", "Q3", "Q4", "none", UNMAPPED):
                if quart.get(q):
                    missed_rows.append({"area": area, "source": source.value, "kind": "quartile",
                                        "bucket": q, "count": quart[q], "share": quart[q] / n})
    return {
        "doc_types": type_rows,
        "languages": lang_rows,
        "missed_by_gs": missed_rows,
        "unmapped_venues": sorted(unmapped),
    }


def citation_count_table(index: ClusterIndex) -> list[dict]:
    """GS citation counts of unique vs overlapping citations, log-summarised."""
    rows = []
    for area, cs in index.groups():
        split = defaultdict(list)
        for c in cs:
            g = cluster_group(c)
            gs = first_of(index.members[c.cluster_id], GS)
            if g and gs is not None and gs.citation_count is not None:
                split[g].append(gs.citation_count)
        for g in (UNIQUE_GS, OVERLAPPING):
            if split.get(g):
                s = log_summary(split[g])
                rows.append({"area": area, "group": g, "n": s.n, "median_log": s.median_log,
                             "mean_log": s.mean_log, "ci_half_width": s.ci_half_width})
    return rows


# -- correlations -------------------------------------------------------------------


@dataclass
class CorrelationRow:
    category: str
    n: int
    spearman_r: Optional[float]
    mean_ratio: float
    mean_log_gs: float
    mean_log_other: float

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def correlation_table(
    index: ClusterIndex, category_map: CategoryMap, other: SourceDatabase
) -> list[CorrelationRow]:
    """GS vs ``other`` citation counts, grouped by the category of the other record's venue."""
    if other is GS:
        raise ValueError("the comparison source must be WOS or SCOPUS")
    by_cat = defaultdict(list)
    for c in index.clusters:
        if GS not in c.presence or other not in c.presence:
            continue
        members = index.members[c.cluster_id]
        g, o = first_of(members, GS), first_of(members, other)
        if g.citation_count is None or o.citation_count is None:
            continue
        e = category_map.get(o.venue)
        by_cat[e.category if e else UNMAPPED].append((g.citation_count, o.citation_count))
    rows = []
    for cat in sorted(by_cat):
        pairs = by_cat[cat]
        gs_counts = [p[0] for p in pairs]
        other_counts = [p[1] for p in pairs]
        r = spearman(gs_counts, other_counts) if len(pairs) >= 2 else None
        rows.append(
            CorrelationRow(
                category=cat,
                n=len(pairs),
                spearman_r=r,
                mean_ratio=mean_ratio(pairs),
                mean_log_gs=float(np.log1p(gs_counts).mean()),
                mean_log_other=float(np.log1p(other_counts).mean()),
            )
        )
    return rows
