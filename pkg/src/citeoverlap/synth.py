"""Synthetic three-database corpora with known cluster structure.

All randomness comes from one ``random.Random(seed)`` instance, consumed in a
fixed order, so a spec and seed always produce the same files.
"""

from __future__ import annotations

import csv
import json
import random
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional

REGION_SOURCES = {
    "G": ("GS",),
    "W": ("WOS",),
    "S": ("SCOPUS",),
    "GW": ("GS", "WOS"),
    "GSc": ("GS", "SCOPUS"),
    "WS": ("WOS", "SCOPUS"),
    "GWS": ("GS", "WOS", "SCOPUS"),
}

DEFAULT_REGION_SHARES = {"GWS": 0.469, "G": 0.369, "GSc": 0.077, "GW": 0.025, "WS": 0.030, "W": 0.015, "S": 0.015}

_WORDS = """
analysis approach assessment behaviour bibliometric carbon cellular citation climate cognitive
comparative computational coverage cultural database density design detection development
diffusion digital dynamics ecological economic education effects empirical energy environment
evaluation evidence evolution experimental exposure factors framework functional genetic global
growth health impact indicators informetrics innovation institutional interaction knowledge
language learning management measurement mechanisms methods metrics model molecular network
neural observations optimal outcomes patterns performance physical policy population prediction
process protein quality quantitative regional regulation research response review risk scholarly
science scientific selection signal social spatial stability statistical structure students
survey sustainable systems theory therapy transfer treatment trends uncertainty urban validation
variation visibility water workflow adaptive algorithm biological boundary catalytic chronic
clinical coastal composite contextual corporate critical crystal deep distributed electronic
emerging ethical financial fluid forest gender hybrid imaging inequality journal laboratory
landscape marine material medical migration mobile narrative nonlinear nutrition ocean organic
peer political public quantum radiation renewable rural semantic sensor soil spectral strategic
surface thermal urgent vascular virtual wireless youth archive authorship benchmark collaborative
""".split()

_SURNAMES = """
smith garcia muller rossi novak kowalski jensen silva tanaka kim nguyen ivanov martin lopez
fischer weber dubois moreau costa santos ferreira hansen larsen nielsen olsen berg holm lund
schmidt wagner becker hoffmann schulz koch richter klein wolf neumann schwarz zimmermann
braun krause hartmann lange werner krueger meier lehmann kaiser fuchs peters scholz moeller
""".split()

_VENUES = [
    ("Scientometrics", "Information Science", "Social Sciences", "Q1"),
    ("Journal of Informetrics", "Information Science", "Social Sciences", "Q1"),
    ("Research Policy", "Management", "Business, Economics & Management", "Q1"),
    ("Online Information Review", "Information Science", "Social Sciences", "Q3"),
    ("Physical Review B", "Condensed Matter Physics", "Physics & Mathematics", "Q2"),
    ("Journal of Chemical Physics", "Physical Chemistry", "Chemical & Material Sciences", "Q2"),
    ("Lancet", "General Medicine", "Health & Medical Sciences", "Q1"),
    ("Ecology Letters", "Ecology", "Life Sciences & Earth Sciences", "Q1"),
    ("IEEE Transactions on Software Engineering", "Software Engineering", "Engineering & Computer Science", "Q1"),
    ("Profesional de la Informacion", "Communication", "Humanities, Literature & Arts", "Q4"),
    ("Journal of Regional Studies", "Geography", "Social Sciences", "Q4"),
    ("Applied Materials Letters", "Materials Science", "Chemical & Material Sciences", "Q3"),
]

_CITED_CATEGORIES = [
    ("Information Science", "Social Sciences"),
    ("Ecology", "Life Sciences & Earth Sciences"),
    ("Condensed Matter Physics", "Physics & Mathematics"),
    ("General Medicine", "Health & Medical Sciences"),
    ("Software Engineering", "Engineering & Computer Science"),
    ("Finance", "Business, Economics & Management"),
    ("Literature", "Humanities, Literature & Arts"),
    ("Polymers & Plastics", "Chemical & Material Sciences"),
]

_WOS_TYPES = ["Article", "Article", "Article", "Review", "Proceedings Paper", "Book Chapter"]
_SCOPUS_TYPES = ["Article", "Article", "Article", "Review", "Conference Paper", "Book Chapter"]
_GS_META_TYPES = [None, None, "journal", "dissertation", "conference"]


@dataclass
class SynthSpec:
    n_cited_docs: int = 1000
    n_records: int = 50000
    regions: dict = field(default_factory=lambda: dict(DEFAULT_REGION_SHARES))
    max_edits: int = 0
    doi_drop: float = 0.0
    doi_rate: float = 0.6
    min_title_len: int = 30
    seed: int = 0

    def __post_init__(self):
        unknown = set(self.regions) - set(REGION_SOURCES)
        if unknown:
            raise ValueError(f"unknown regions: {sorted(unknown)}")
        if any(v < 0 for v in self.regions.values()):
            raise ValueError("region proportions must be non-negative")
        total = sum(self.regions.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"region proportions sum to {total}, not 1")
        if not 0 <= self.doi_drop <= 1 or not 0 <= self.doi_rate <= 1:
            raise ValueError("doi_drop and doi_rate must lie in [0, 1]")
        if self.max_edits < 0 or self.n_cited_docs < 1 or self.n_records < 1:
            raise ValueError("counts must be positive and max_edits non-negative")

    @classmethod
    def from_mapping(cls, d: Mapping) -> "SynthSpec":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)


def allocate(total: int, proportions: Mapping[str, float]) -> dict[str, int]:
    """Integer counts summing to ``total`` by the largest-remainder rule."""
    keys = sorted(proportions)
    raw = {k: proportions[k] * total for k in keys}
    out = {k: int(raw[k]) for k in keys}
    short = total - sum(out.values())
    for k in sorted(keys, key=lambda k: (-(raw[k] - out[k]), k))[:short]:
        out[k] += 1
    return out


def _n_records(counts: Mapping[str, int]) -> int:
    return sum(n * len(REGION_SOURCES[r]) for r, n in counts.items())


def _cluster_counts(spec: SynthSpec) -> dict[str, int]:
    """Region cluster counts whose record total is as close to ``n_records`` as possible."""
    mean_size = sum(p * len(REGION_SOURCES[r]) for r, p in spec.regions.items())
    guess = max(1, round(spec.n_records / mean_size))
    best = None
    for n in range(max(1, guess - 20), guess + 21):
        counts = allocate(n, spec.regions)
        key = (abs(_n_records(counts) - spec.n_records), abs(n - guess), n)
        if best is None or key < best[0]:
            best = (key, counts)
    counts = best[1]
    # close a small residual by moving single clusters between regions whose sizes differ by one
    live = sorted(r for r, p in spec.regions.items() if p > 0)
    while (diff := spec.n_records - _n_records(counts)) != 0:
        step = 1 if diff > 0 else -1
        move = next(((a, b) for a in live for b in live if counts[a] > 1
                     and len(REGION_SOURCES[b]) - len(REGION_SOURCES[a]) == step), None)
        if move is None:
            break
        counts[move[0]] -= 1
        counts[move[1]] += 1
    return counts


def _title(rng: random.Random, min_len: int) -> str:
    words = []
    while len(" ".join(words)) < min_len or len(words) < 5:
        words.append(rng.choice(_WORDS))
    if rng.random() < 0.3:
        words.insert(rng.randrange(2, len(words)), "and")
    text = " ".join(words)
    if rng.random() < 0.4:
        cut = rng.randrange(2, len(words) - 1)
        text = " ".join(words[:cut]) + ": " + " ".join(words[cut:])
    return text[0].upper() + text[1:]


_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def perturb(title: str, n_edits: int, rng: random.Random) -> str:
    """Apply ``n_edits`` letter substitutions, insertions or deletions inside words."""
    chars = list(title)
    for _ in range(n_edits):
        spots = [i for i in range(1, len(chars) - 1)
                 if chars[i].isalpha() and chars[i - 1].isalpha() and chars[i + 1].isalpha()]
        if not spots:
            break
        i = rng.choice(spots)
        op = rng.choice(("sub", "ins", "del"))
        if op == "sub":
            chars[i] = rng.choice([c for c in _LETTERS if c != chars[i].lower()])
        elif op == "ins":
            chars.insert(i, rng.choice(_LETTERS))
        else:
            del chars[i]
    return "".join(chars)


@dataclass
class _Doc:
    doc_no: int
    cited: str
    region: str
    title: str
    authors: list
    year: int
    venue: tuple
    doi: Optional[str]
    base_cites: int


def generate(spec: SynthSpec, out_dir) -> dict:
    """Write ``gs.jsonl``, ``wos.txt``, ``scopus.csv``, category maps and ``truth.json``."""
    rng = random.Random(spec.seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    counts = _cluster_counts(spec)
    regions = [r for r in sorted(counts) for _ in range(counts[r])]
    rng.shuffle(regions)

    cited_ids = [f"X{i:05d}" for i in range(spec.n_cited_docs)]
    min_len = spec.min_title_len + spec.max_edits
    docs = []
    for n, region in enumerate(regions):
        n_auth = rng.randint(1, 4)
        authors = [(rng.choice(_SURNAMES).capitalize(), rng.choice(_LETTERS).upper()) for _ in range(n_auth)]
        docs.append(
            _Doc(
                doc_no=n,
                cited=rng.choice(cited_ids),
                region=region,
                title=_title(rng, min_len),
                authors=authors,
                year=rng.randint(2006, 2018),
                venue=rng.choice(_VENUES),
                doi=f"10.{5000 + n % 97}/syn.{n:07d}" if rng.random() < spec.doi_rate else None,
                base_cites=int(rng.expovariate(1 / 15)),
            )
        )

    gs_lines, wos_rows, scopus_rows, truth = [], [], [], []
    for d in docs:
        sources = REGION_SOURCES[d.region]
        members = {}
        for k, src in enumerate(sources):
            title = d.title if k == 0 else perturb(d.title, rng.randint(0, spec.max_edits), rng)
            doi = d.doi if (d.doi and rng.random() >= spec.doi_drop) else None
            if src == "GS":
                rid = f"G{d.doc_no:08d}"
                gs_lines.append(_gs_entry(d, rid, title, doi, rng))
            elif src == "WOS":
                rid = f"WOS:{d.doc_no:015d}"
                wos_rows.append(_wos_row(d, rid, title, doi, rng))
            else:
                rid = f"2-s2.0-{d.doc_no:011d}"
                scopus_rows.append(_scopus_row(d, rid, title, doi, rng))
            members[src] = rid
        truth.append({"cited_doc_id": d.cited, "region": d.region, "members": members})

    with open(out / "gs.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for obj in gs_lines:
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    wos_header = ["UT", "CD", "AU", "TI", "SO", "PY", "DI", "DT", "LA", "TC"]
    with open(out / "wos.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(wos_header) + "\n")
        for row in wos_rows:
            fh.write("\t".join(row[h] for h in wos_header) + "\n")
    scopus_header = ["Authors", "Title", "Year", "Source title", "Cited by", "DOI",
                     "Document Type", "EID", "Cited Document"]
    with open(out / "scopus.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=scopus_header, lineterminator="\n")
        w.writeheader()
        w.writerows(scopus_rows)
    with open(out / "category_map.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["venue", "category", "broad_area", "quartile"])
        w.writerows(_VENUES)
    with open(out / "cited_docs.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["venue", "category", "broad_area", "quartile"])
        for i, cid in enumerate(cited_ids):
            cat, area = _CITED_CATEGORIES[i % len(_CITED_CATEGORIES)]
            w.writerow([cid, cat, area, ""])

    region_counts = dict(Counter(t["region"] for t in truth))
    truth_doc = {
        "spec": asdict(spec),
        "n_clusters": len(truth),
        "n_records": sum(len(t["members"]) for t in truth),
        "region_counts": {r: region_counts.get(r, 0) for r in REGION_SOURCES},
        "clusters": truth,
    }
    with open(out / "truth.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(truth_doc, fh, ensure_ascii=False)
    return truth_doc


def _gs_entry(d: _Doc, rid, title, doi, rng) -> dict:
    names = ", ".join(f"{g} {f}" for f, g in d.authors[:3])
    if len(d.authors) > 3:
        names += "…"
    venue = d.venue[0]
    obj = {
        "cited_doc_id": d.cited,
        "cluster_id": rid,
        "title": title,
        "byline": f"{names} - {venue}, {d.year} - example.org",
        "cites": d.base_cites + int(rng.expovariate(1 / 5)),
        "versions": rng.randint(1, 6),
    }
    meta = {}
    where = rng.random()
    if doi:
        if where < 0.4:
            obj["url"] = f"https://link.example.com/article/{doi}"
        elif where < 0.7:
            meta["citation_doi"] = doi
        else:
            obj["doi"] = doi
    if "url" not in obj:
        obj["url"] = f"https://example.org/doc/{rid}"
    kind = rng.choice(_GS_META_TYPES)
    if kind == "journal":
        meta["citation_journal_title"] = venue
    elif kind == "dissertation":
        meta["citation_dissertation_institution"] = "University of Granada"
    elif kind == "conference":
        meta["citation_conference_title"] = "Proceedings of the Conference"
    if rng.random() < 0.5:
        meta["citation_language"] = "en"
    if meta:
        obj["meta"] = meta
    return obj


def _wos_row(d: _Doc, rid, title, doi, rng) -> dict:
    return {
        "UT": rid,
        "CD": d.cited,
        "AU": "; ".join(f"{f}, {g}" for f, g in d.authors),
        "TI": title,
        "SO": d.venue[0].upper(),
        "PY": str(d.year),
        "DI": doi or "",
        "DT": rng.choice(_WOS_TYPES),
        "LA": "English",
        "TC": str(int(d.base_cites * rng.uniform(0.4, 0.9))),
    }


def _scopus_row(d: _Doc, rid, title, doi, rng) -> dict:
    return {
        "Authors": ", ".join(f"{f} {g}." for f, g in d.authors),
        "Title": title,
        "Year": str(d.year),
        "Source title": d.venue[0],
        "Cited by": str(int(d.base_cites * rng.uniform(0.5, 1.0))),
        "DOI": doi or "",
        "Document Type": rng.choice(_SCOPUS_TYPES),
        "EID": rid,
        "Cited Document": d.cited,
    }


# -- scoring against truth ------------------------------------------------------------


def truth_pairs(truth: Mapping) -> set:
    pairs = set()
    for t in truth["clusters"]:
        ids = sorted(t["members"].values())
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                pairs.add((t["cited_doc_id"], ids[i], ids[j]))
    return pairs


def evaluate(edges: Iterable, clusters: Iterable, truth: Mapping) -> dict:
    """Pairwise precision/recall/F1 of match edges and region-share errors."""
    from .analytics import REGIONS, partition_regions

    predicted = {(e.cited_doc_id, *sorted((e.record_a, e.record_b))) for e in edges}
    actual = truth_pairs(truth)
    tp = len(predicted & actual)
    precision = tp / len(predicted) if predicted else 1.0
    recall = tp / len(actual) if actual else 1.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    rc = partition_regions(clusters)
    true_counts = truth["region_counts"]
    n_true = sum(true_counts.values())
    diffs = {
        r: 100.0 * (getattr(rc, r) / rc.total - true_counts[r] / n_true) if rc.total else None
        for r in REGIONS
    }
    return {
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "region_counts": rc.as_dict(),
        "true_region_counts": dict(true_counts),
        "region_pp_diff": diffs,
        "max_abs_pp_diff": max(abs(v) for v in diffs.values()),
    }
