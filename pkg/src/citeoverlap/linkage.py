"""Two-stage citation matching (DOI, then fuzzy title) and cluster building."""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import CitingRecord, MatchPolicy, SourceDatabase

logger = logging.getLogger(__name__)

DOI = "DOI"
FUZZY = "FUZZY"


class ContractViolation(ValueError):
    """Inputs break a precondition of the matcher (e.g. mixed cited documents)."""

    def __init__(self, message: str, cited_doc_id: Optional[str] = None):
        super().__init__(message)
        self.cited_doc_id = cited_doc_id


@dataclass(frozen=True, order=True)
class MatchEdge:
    cited_doc_id: str
    record_a: str
    record_b: str
    method: str
    similarity: float


@dataclass
class CitationCluster:
    cluster_id: str
    cited_doc_id: str
    members: list[str]
    presence: frozenset
    flagged: bool = False

    def to_dict(self) -> dict:
        return {
            "cluster_id": self.cluster_id,
            "cited_doc_id": self.cited_doc_id,
            "members": list(self.members),
            "presence": sorted((s.value for s in self.presence), key=lambda v: SourceDatabase(v).rank),
            "flagged": self.flagged,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CitationCluster":
        return cls(
            cluster_id=d["cluster_id"],
            cited_doc_id=d["cited_doc_id"],
            members=list(d["members"]),
            presence=frozenset(SourceDatabase(s) for s in d["presence"]),
            flagged=bool(d.get("flagged", False)),
        )


# -- edit distance ---------------------------------------------------------


def osa_distance(a: str, b: str) -> int:
    """Optimal string alignment distance (restricted Damerau-Levenshtein).

    Counts insertions, deletions, substitutions and transpositions of
    adjacent characters, never editing a substring more than once.

    >>> osa_distance("ca", "ac")
    1
    >>> osa_distance("kitten", "sitting")
    3
    """
    la, lb = len(a), len(b)
    if la == 0:
        return lb
    if lb == 0:
        return la
    prev2: list[int] = []
    prev = list(range(lb + 1))
    for i in range(1, la + 1):
        cur = [i] + [0] * lb
        ai = a[i - 1]
        for j in range(1, lb + 1):
            bj = b[j - 1]
            v = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ai != bj))
            if i > 1 and j > 1 and ai == b[j - 2] and a[i - 2] == bj:
                v = min(v, prev2[j - 2] + 1)
            cur[j] = v
        prev2, prev = prev, cur
    return prev[lb]


def _similarity_from_distance(d: int, la: int, lb: int) -> float:
    m = max(la, lb)
    if m == 0:
        return 1.0
    return 1.0 - d / m


def title_similarity(a: str, b: str) -> float:
    """``1 - osa / max(len)`` on already-normalized titles; 1.0 for two empty strings."""
    return _similarity_from_distance(osa_distance(a, b), len(a), len(b))


def accept_match(
    sim: float, len_a: int, len_b: int, same_first_author: bool, policy: MatchPolicy
) -> bool:
    if sim >= policy.high_sim_threshold and min(len_a, len_b) >= policy.min_title_len:
        return True
    return sim >= policy.low_sim_threshold and same_first_author


# -- matching --------------------------------------------------------------


def _same_author(a: CitingRecord, b: CitingRecord) -> bool:
    return bool(a.first_author_key) and a.first_author_key == b.first_author_key


def _check_block(list_a, list_b) -> str:
    cited = {r.cited_doc_id for r in list_a} | {r.cited_doc_id for r in list_b}
    if len(cited) > 1:
        raise ContractViolation(f"match_block got records for several cited documents: {sorted(cited)}",
                                sorted(cited)[0])
    sa = {r.source for r in list_a}
    sb = {r.source for r in list_b}
    if len(sa) > 1 or len(sb) > 1 or (sa and sa == sb):
        raise ContractViolation("match_block needs two lists from two distinct sources",
                                next(iter(cited), None))
    return next(iter(cited), "")


def _doi_stage(list_a, list_b, cited):
    by_doi_a = defaultdict(list)
    by_doi_b = defaultdict(list)
    for r in list_a:
        if r.doi:
            by_doi_a[r.doi].append(r.record_id)
    for r in list_b:
        if r.doi:
            by_doi_b[r.doi].append(r.record_id)
    edges = []
    matched = set()
    for doi in sorted(by_doi_a.keys() & by_doi_b.keys()):
        # duplicate DOIs within one source pair up in record_id order
        for ra, rb in zip(sorted(by_doi_a[doi]), sorted(by_doi_b[doi])):
            edges.append(MatchEdge(cited, ra, rb, DOI, 1.0))
            matched.add(ra)
            matched.add(rb)
    return edges, matched


def _pair_distances(titles_a, titles_b, low):
    """Distances for every pair, exact wherever similarity can reach ``low``."""
    from . import _osa_kernel

    codes_a, offs_a = _osa_kernel.encode(titles_a)
    codes_b, offs_b = _osa_kernel.encode(titles_b)
    return _osa_kernel.block_distances(codes_a, offs_a, codes_b, offs_b, 1.0 - low)


def match_block(
    list_a: Sequence[CitingRecord],
    list_b: Sequence[CitingRecord],
    policy: MatchPolicy = MatchPolicy(),
) -> list[MatchEdge]:
    """Match two sources' citations of one cited document.

    DOI-equal records pair first. The rest go through a global greedy pass
    over title similarity, best pair first, ties broken by record ids.
    Edges are oriented so ``record_a`` comes from the earlier source in
    GS, WOS, SCOPUS order, which makes the result independent of argument order.
    """
    cited = _check_block(list_a, list_b)
    if not list_a or not list_b:
        return []
    if list_a[0].source.rank > list_b[0].source.rank:
        list_a, list_b = list_b, list_a
    list_a = sorted(list_a, key=lambda r: r.record_id)
    list_b = sorted(list_b, key=lambda r: r.record_id)

    edges, matched = _doi_stage(list_a, list_b, cited)
    rest_a = [r for r in list_a if r.record_id not in matched]
    rest_b = [r for r in list_b if r.record_id not in matched]
    if rest_a and rest_b:
        edges.extend(_fuzzy_stage(rest_a, rest_b, policy, cited))
    edges.sort()
    return edges


def _fuzzy_stage(rest_a, rest_b, policy, cited):
    low = policy.low_sim_threshold
    dist = _pair_distances([r.title_norm for r in rest_a], [r.title_norm for r in rest_b], low)
    len_a = np.array([len(r.title_norm) for r in rest_a], dtype=np.int64)
    len_b = np.array([len(r.title_norm) for r in rest_b], dtype=np.int64)
    longest = np.maximum(len_a[:, None], len_b[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        sims = np.where(longest == 0, 1.0, 1.0 - dist / longest)
    candidates = [
        (-float(sims[i, j]), rest_a[i].record_id, rest_b[j].record_id, int(i), int(j))
        for i, j in zip(*np.nonzero(sims >= low))
    ]
    candidates.sort()
    used_a: set[int] = set()
    used_b: set[int] = set()
    edges = []
    for neg_sim, id_a, id_b, i, j in candidates:
        if i in used_a or j in used_b:
            continue
        ra, rb = rest_a[i], rest_b[j]
        sim = -neg_sim
        if accept_match(sim, len(ra.title_norm), len(rb.title_norm), _same_author(ra, rb), policy):
            edges.append(MatchEdge(cited, id_a, id_b, FUZZY, sim))
            used_a.add(i)
            used_b.add(j)
    return edges


# -- clustering ------------------------------------------------------------


class UnionFind:
    """Disjoint sets with path halving and union by size."""

    def __init__(self, items: Iterable):
        self._parent = {x: x for x in items}
        self._size = dict.fromkeys(self._parent, 1)

    def find(self, x):
        parent = self._parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, x, y) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return
        if self._size[rx] < self._size[ry]:
            rx, ry = ry, rx
        self._parent[ry] = rx
        self._size[rx] += self._size[ry]

    def groups(self) -> list[list]:
        out = defaultdict(list)
        for x in self._parent:
            out[self.find(x)].append(x)
        return list(out.values())


def build_clusters(edges: Iterable[MatchEdge], records: Sequence[CitingRecord]) -> list[CitationCluster]:
    """Merge pairwise edges of one cited document into connected components.

    A component holding two records of the same source is kept whole and
    flagged. Cluster ids are ``<cited_doc_id>#<n>`` with n following the
    smallest member id of each component.
    """
    by_id = {}
    for r in records:
        if r.record_id in by_id:
            raise ContractViolation(f"duplicate record_id {r.record_id!r} in block", r.cited_doc_id)
        by_id[r.record_id] = r
    cited = {r.cited_doc_id for r in records}
    if len(cited) > 1:
        raise ContractViolation(f"build_clusters got several cited documents: {sorted(cited)}",
                                sorted(cited)[0])
    uf = UnionFind(sorted(by_id))
    for e in edges:
        for rid in (e.record_a, e.record_b):
            if rid not in by_id:
                raise ContractViolation(f"edge references unknown record {rid!r}", e.cited_doc_id)
        uf.union(e.record_a, e.record_b)

    comps = sorted(sorted(g) for g in uf.groups())
    clusters = []
    for n, members in enumerate(comps):
        sources = [by_id[m].source for m in members]
        cid = by_id[members[0]].cited_doc_id
        clusters.append(
            CitationCluster(
                cluster_id=f"{cid}#{n}",
                cited_doc_id=cid,
                members=members,
                presence=frozenset(sources),
                flagged=len(sources) != len(set(sources)),
            )
        )
    return clusters


# -- corpus-level driver -----------------------------------------------------


def group_by_cited(records: Iterable[CitingRecord]) -> dict[str, list[CitingRecord]]:
    blocks = defaultdict(list)
    for r in records:
        blocks[r.cited_doc_id].append(r)
    return dict(blocks)


def match_cited_document(records: Sequence[CitingRecord], policy: MatchPolicy):
    """All three pairwise matchings plus clustering for one cited document."""
    by_source = defaultdict(list)
    for r in records:
        by_source[r.source].append(r)
    edges = []
    for sa, sb in combinations(sorted(SourceDatabase, key=lambda s: s.rank), 2):
        if by_source[sa] and by_source[sb]:
            edges.extend(match_block(by_source[sa], by_source[sb], policy))
    edges.sort()
    return edges, build_clusters(edges, records)


def _match_chunk(args):
    chunk, policy = args
    return [match_cited_document(recs, policy) for recs in chunk]


def match_corpus(records: Iterable[CitingRecord], policy: MatchPolicy = MatchPolicy(),
                 workers: int = 1):
    """Match every cited-document block; returns (edges, clusters) in canonical order."""
    blocks = group_by_cited(records)
    keys = sorted(blocks)
    ordered = [blocks[k] for k in keys]
    if workers <= 1 or len(ordered) < 2:
        results = _match_chunk((ordered, policy))
    else:
        n_chunks = min(len(ordered), workers * 4)
        chunks = [ordered[i::n_chunks] for i in range(n_chunks)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_match_chunk, [(c, policy) for c in chunks]))
        results = [None] * len(ordered)
        for ci, part in enumerate(parts):
            for k, res in enumerate(part):
                results[ci + k * n_chunks] = res
    edges, clusters = [], []
    for e, c in results:
        edges.extend(e)
        clusters.extend(c)
    return edges, clusters


# -- file formats ------------------------------------------------------------

EDGE_COLUMNS = ["cited_doc_id", "record_a", "record_b", "method", "similarity"]


def write_edges(edges: Iterable[MatchEdge], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(EDGE_COLUMNS)
    for e in edges:
        w.writerow([e.cited_doc_id, e.record_a, e.record_b, e.method, f"{e.similarity:.6f}"])


def read_edges(fh) -> list[MatchEdge]:
    return [
        MatchEdge(row["cited_doc_id"], row["record_a"], row["record_b"], row["method"],
                  float(row["similarity"]))
        for row in csv.DictReader(fh)
    ]


def write_clusters(clusters: Iterable[CitationCluster], fh) -> None:
    for c in clusters:
        fh.write(json.dumps(c.to_dict(), ensure_ascii=False) + "\n")


def read_clusters(fh) -> list[CitationCluster]:
    return [CitationCluster.from_dict(json.loads(line)) for line in fh if line.strip()]


def edges_to_csv(edges: Iterable[MatchEdge]) -> str:
    buf = io.StringIO()
    write_edges(edges, buf)
    return buf.getvalue()
