import math
import random

import pytest
from hypothesis import given, strategies as st

from citeoverlap.analytics import (
    REGIONS,
    ClusterIndex,
    RegionCounts,
    correlation_table,
    coverage_metrics,
    distribution_tables,
    language_distribution,
    log_summary,
    mean_ratio,
    partition_regions,
    spearman,
)
from citeoverlap.core import DocumentType, SourceDatabase
from citeoverlap.enrich import CorrectionSample, apply_correction
from citeoverlap.ingest import CategoryEntry, CategoryMap
from citeoverlap.linkage import CitationCluster
from oracles import log_summary_direct, naive_spearman

GS, WOS, SCOPUS = SourceDatabase.GS, SourceDatabase.WOS, SourceDatabase.SCOPUS
PRESENCE = {"G": {GS}, "W": {WOS}, "S": {SCOPUS}, "GW": {GS, WOS}, "GSc": {GS, SCOPUS},
            "WS": {WOS, SCOPUS}, "GWS": {GS, WOS, SCOPUS}}


def _cluster(i, presence, cited="X1"):
    return CitationCluster(f"{cited}#{i}", cited, [f"r{i}"], frozenset(presence), False)


def _counts(**kw):
    return RegionCounts(**kw)


def test_partition_examples():
    rc = partition_regions([_cluster(0, {GS}), _cluster(1, {GS, WOS, SCOPUS})])
    assert (rc.G, rc.GWS, rc.total) == (1, 1, 2)
    assert partition_regions([]).total == 0
    spec = ["G"] * 3 + ["W", "S", "GW", "GSc", "WS"] + ["GWS"] * 2
    rc = partition_regions([_cluster(i, PRESENCE[r]) for i, r in enumerate(spec)])
    assert [getattr(rc, r) for r in REGIONS] == [3, 1, 1, 1, 1, 1, 2] and rc.total == 10


def test_partition_filter():
    cs = [_cluster(0, {GS}, "A"), _cluster(1, {GS}, "B")]
    assert partition_regions(cs, lambda c: c.cited_doc_id == "A").total == 1


def test_coverage_examples():
    cov = coverage_metrics(_counts(G=3, W=1, S=1, GW=1, GSc=1, WS=1, GWS=2))
    assert (cov.pct_gs_all, cov.pct_wos_all, cov.pct_scopus_all) == (70.0, 50.0, 50.0)
    assert cov.pct_wos_in_gs == 60.0
    assert cov.pct_scopus_in_gs == 60.0 and cov.pct_wos_in_scopus == 60.0
    cov = coverage_metrics(_counts(GWS=5))
    assert all(v == 100.0 for v in cov.as_dict().values())
    cov = coverage_metrics(_counts(G=2, S=1))
    assert cov.pct_wos_in_gs is None and cov.pct_wos_in_scopus is None
    assert cov.pct_scopus_in_gs == 0.0
    with pytest.raises(ValueError):
        coverage_metrics(_counts())


region_counts = st.lists(st.integers(0, 50), min_size=7, max_size=7).filter(lambda v: sum(v) > 0)


@given(region_counts, st.integers(1, 1000))
def test_coverage_scale_invariant(vals, k):
    a = coverage_metrics(RegionCounts(*vals)).as_dict()
    b = coverage_metrics(RegionCounts(*[v * k for v in vals])).as_dict()
    for key in a:
        if a[key] is None:
            assert b[key] is None
        else:
            assert b[key] == pytest.approx(a[key], abs=1e-9)
            assert 0.0 <= a[key] <= 100.0


def test_spearman_examples():
    assert spearman([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0, abs=1e-12)
    assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-12)
    # oracle value, frozen: rank-then-Pearson computed independently
    assert spearman([1, 1, 2], [1, 2, 3]) == pytest.approx(0.8660254037844387, abs=1e-12)
    assert spearman([5, 5, 5], [1, 2, 3]) is None
    with pytest.raises(ValueError):
        spearman([1], [1])
    with pytest.raises(ValueError):
        spearman([1, 2], [1, 2, 3])


ints = st.lists(st.integers(0, 8), min_size=2, max_size=30)


@given(st.data())
def test_spearman_matches_oracle_and_is_rank_invariant(data):
    xs = data.draw(ints)
    ys = data.draw(st.lists(st.integers(0, 8), min_size=len(xs), max_size=len(xs)))
    expected = naive_spearman(xs, ys)
    got = spearman(xs, ys)
    if expected is None:
        assert got is None
        return
    assert got == pytest.approx(expected, abs=1e-12)
    assert -1.0 <= got <= 1.0
    assert spearman([x ** 3 for x in xs], ys) == pytest.approx(got, abs=1e-12)


def test_mean_ratio_examples():
    assert mean_ratio([(9, 4)]) == 2.0
    assert mean_ratio([(0, 0)]) == 1.0
    assert mean_ratio([(9, 4), (0, 0)]) == 1.5
    with pytest.raises(ValueError):
        mean_ratio([])


@given(st.lists(st.tuples(st.integers(0, 100), st.integers(0, 100)), min_size=1, max_size=20))
def test_mean_ratio_direction(pairs):
    direct = math.fsum((1 + g) / (1 + o) for g, o in pairs) / len(pairs)
    assert mean_ratio(pairs) == pytest.approx(direct, rel=1e-12)
    assert mean_ratio(pairs) > 0


def test_log_summary_examples():
    s = log_summary([0, 0, 0])
    assert (s.n, s.median_log, s.mean_log, s.ci_half_width) == (3, 0.0, 0.0, 0.0)
    s = log_summary([math.e - 1])
    assert s.mean_log == pytest.approx(1.0, abs=1e-12) and s.ci_half_width == 0.0
    # frozen oracle values
    s = log_summary([0, 1, 2, 3, 10])
    assert s.median_log == pytest.approx(1.0986122886681098, abs=1e-12)
    assert s.mean_log == pytest.approx(1.1151898206292632, abs=1e-12)
    assert s.ci_half_width == pytest.approx(0.776723306666031, abs=1e-12)


@given(st.lists(st.integers(0, 10_000), min_size=1, max_size=40))
def test_log_summary_properties(counts):
    s = log_summary(counts)
    median, mean, ci = log_summary_direct(counts)
    assert s.median_log == pytest.approx(median, abs=1e-12)
    assert s.mean_log == pytest.approx(mean, abs=1e-12)
    assert s.ci_half_width == pytest.approx(ci, abs=1e-9)
    assert s.mean_log >= 0 and s.median_log >= 0 and s.ci_half_width >= 0
    assert log_summary(counts + [0]).mean_log <= s.mean_log + 1e-12


def test_language_distribution_buckets():
    langs = ["en"] * 5 + ["es"] * 3 + ["de", "fr", None]
    d = language_distribution(langs, top_k=2)
    assert d == {"en": 5 / 11, "es": 3 / 11, "other": 3 / 11}
    d = language_distribution(langs)
    assert d["und"] == 1 / 11 and "other" not in d
    assert abs(sum(d.values()) - 1) < 1e-9


# -- tables over a small corpus -------------------------------------------------------


def _index(make_record, specs, cited_map=None):
    """specs: list of (cluster presence, {source: record kwargs})."""
    clusters, records = [], []
    for i, members in enumerate(specs):
        ids = []
        for src, kw in members.items():
            rid = f"{src}{i}"
            cited = kw.pop("cited", "X1")
            records.append(make_record(rid, src, kw.pop("title", f"title {i}"), cited=cited, **kw))
            ids.append(rid)
        presence = frozenset(SourceDatabase(s) for s in members)
        clusters.append(CitationCluster(f"{cited}#{i}", cited, sorted(ids), presence, False))
    return ClusterIndex.build(clusters, records, cited_map)


def _rows(rows, **match):
    return [r for r in rows if all(r[k] == v for k, v in match.items())]


def test_distribution_examples(make_record):
    cmap = CategoryMap({"jasist": CategoryEntry("Information Science", "Social Sciences", "Q1")})
    index = _index(make_record, [
        {"GS": {"doc_type_raw": "thesis"}},
        {"GS": {}, "WOS": {"doc_type_raw": "article"}},
        {"WOS": {"doc_type_raw": "article", "venue": "JASIST"}},
    ])
    tables = distribution_tables(index, cmap)
    unique = _rows(tables["doc_types"], area="all", group="unique_gs")
    overl = _rows(tables["doc_types"], area="all", group="overlapping")
    assert [(r["doc_type"], r["share"]) for r in unique if r["share"]] == [("THESIS", 1.0)]
    assert [(r["doc_type"], r["share"]) for r in overl if r["share"]] == [("JOURNAL", 1.0)]
    (q,) = _rows(tables["missed_by_gs"], area="all", source="WOS", kind="quartile")
    assert (q["bucket"], q["count"]) == ("Q1", 1)
    for key in ("doc_types", "languages"):
        by_group = {}
        for r in tables[key]:
            by_group.setdefault((r["area"], r["group"]), []).append(r["share"])
        for shares in by_group.values():
            assert abs(sum(shares) - 1.0) <= 1e-9


def test_corrected_distribution_matches_apply_correction(make_record):
    # 20 overlapping clusters: 6 JOURNAL, 10 CONFERENCE, 4 UNKNOWN
    specs = ([{"GS": {}, "WOS": {"doc_type_raw": "article"}}] * 6
             + [{"GS": {}, "WOS": {"doc_type_raw": "proceedings paper"}}] * 10
             + [{"GS": {}, "WOS": {}}] * 4)
    index = _index(make_record, [{k: dict(v) for k, v in s.items()} for s in specs])
    sample = CorrectionSample("all", ["a", "b", "c", "d"], 0,
                              {"a": DocumentType.JOURNAL, "b": DocumentType.JOURNAL,
                               "c": DocumentType.BOOK, "d": DocumentType.THESIS})
    rows = _rows(distribution_tables(index, corrections={"all": sample})["doc_types"],
                 area="all", group="overlapping")
    got = {r["doc_type"]: r["share"] for r in rows}
    expected = apply_correction({DocumentType.JOURNAL: 0.3, DocumentType.CONFERENCE: 0.5}, 0.2,
                                sample.distribution()).shares
    for t, v in expected.items():
        assert got[t.value] == pytest.approx(v, abs=1e-12)
    assert all(r["corrected"] for r in rows)


def test_correlation_table(make_record):
    cmap = CategoryMap({"v": CategoryEntry("Cat", "Area", None), "w": CategoryEntry("Solo", "Area", None)})
    specs = [{"GS": {"citation_count": c}, "WOS": {"citation_count": c, "venue": "V"}} for c in (1, 2, 3)]
    specs.append({"GS": {"citation_count": 9}, "WOS": {"citation_count": 4, "venue": "W"}})
    rows = correlation_table(_index(make_record, specs), cmap, WOS)
    cat, solo = rows
    assert cat.category == "Cat" and cat.n == 3 and cat.spearman_r == pytest.approx(1.0, abs=1e-12)
    assert solo.spearman_r is None and solo.mean_ratio == 2.0 and solo.n == 1


@pytest.mark.parametrize("seed", range(5))
def test_correlation_matches_oracle(make_record, seed):
    rng = random.Random(seed)
    pairs = [(rng.randint(0, 20), rng.randint(0, 20)) for _ in range(30)]
    specs = [{"GS": {"citation_count": g}, "SCOPUS": {"citation_count": o, "venue": "V"}} for g, o in pairs]
    (row,) = correlation_table(_index(make_record, specs), CategoryMap({"v": CategoryEntry("C", "A", None)}),
                               SCOPUS)
    assert row.spearman_r == pytest.approx(naive_spearman([p[0] for p in pairs], [p[1] for p in pairs]),
                                           abs=1e-12)
