"""Filling in DOIs, document types and languages; document-type correction."""

from __future__ import annotations

import csv
import dataclasses
import functools
import hashlib
import json
import logging
import math
import os
import random
import re
import tempfile
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence
from urllib.parse import quote

from .core import CitingRecord, DocumentType, classify_doc_type, normalize_doi

logger = logging.getLogger(__name__)

SUM_TOL = 1e-9


# -- DOIs in landing-page URLs ------------------------------------------------

_URL_DOI_RE = re.compile(r"/(10\.\d{4,9}/[^\s?#]+)")


def extract_doi_from_url(url: Optional[str]) -> Optional[str]:
    """Find the first DOI-shaped path segment in a URL.

    Query strings and fragments are never part of the result.

    >>> extract_doi_from_url("https://link.springer.com/article/10.1007/s11192-013-1089-2")
    '10.1007/s11192-013-1089-2'
    """
    if not url:
        return None
    m = _URL_DOI_RE.search(url)
    if not m:
        return None
    return normalize_doi(m.group(1))


# -- resolver ------------------------------------------------------------------


class ResolverError(Exception):
    pass


class ResolverUnavailable(ResolverError):
    """The resolver kept failing after all retries; safe to retry later."""


class RateLimiter:
    """Spaces calls at least ``1 / rate`` seconds apart across threads."""

    def __init__(self, rate: float = 1.0, clock=time.monotonic, sleep=time.sleep):
        self.interval = 0.0 if rate <= 0 else 1.0 / rate
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next = 0.0

    def wait(self) -> None:
        with self._lock:
            now = self._clock()
            delay = self._next - now
            self._next = max(now, self._next) + self.interval
        if delay > 0:
            self._sleep(delay)


class ResolverCache:
    """One JSON file per request digest; writes are atomic renames."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    @staticmethod
    def digest(kind: str, key: str) -> str:
        return hashlib.sha256(f"{kind}:{key}".encode("utf-8")).hexdigest()

    def lock(self, digest: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(digest, threading.Lock())

    def path(self, digest: str) -> Path:
        return self.directory / f"{digest}.json"

    def get(self, digest: str):
        """Return ``(hit, response)``; ``response`` may be None for a cached not-found."""
        p = self.path(digest)
        if not p.exists():
            return False, None
        with open(p, encoding="utf-8") as fh:
            return True, json.load(fh)["response"]

    def put(self, digest: str, key: str, response) -> None:
        entry = {
            "key": key,
            "fetched_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "response": response,
        }
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(entry, fh, ensure_ascii=False, sort_keys=True)
        os.replace(tmp, self.path(digest))

    def __len__(self):
        return sum(1 for _ in self.directory.glob("*.json"))


def _first(value):
    if isinstance(value, list):
        return value[0] if value else None
    return value


def parse_work(work: Mapping) -> dict:
    """Reduce a works-endpoint message to the fields enrichment uses."""
    return {
        "title": _first(work.get("title")),
        "type": work.get("type"),
        "language": work.get("language"),
        "container": _first(work.get("container-title", work.get("container"))),
    }


class Resolver:
    """Metadata lookup against a works API, with a disk cache.

    DOIs go to ``{base}/works/{doi}``; other identifiers use the
    ``alternative-id`` filter. In offline mode only the cache is consulted.
    """

    def __init__(
        self,
        base_url: Optional[str],
        cache_dir,
        offline: bool = False,
        rate_limit: float = 1.0,
        retries: int = 3,
        backoff: float = 1.0,
        timeout: float = 30.0,
        session=None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.base_url = base_url.rstrip("/") if base_url else None
        self.cache = ResolverCache(cache_dir)
        self.offline = offline or not self.base_url
        self.limiter = RateLimiter(rate_limit, sleep=sleep)
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self._session = session
        self._sleep = sleep

    @property
    def session(self):
        if self._session is None:
            import requests

            self._session = requests.Session()
        return self._session

    def resolve_metadata(self, key: str) -> Optional[dict]:
        doi = normalize_doi(key)
        kind, ident = ("doi", doi) if doi else ("altid", key.strip())
        digest = ResolverCache.digest(kind, ident)
        with self.cache.lock(digest):
            hit, response = self.cache.get(digest)
            if hit:
                return response
            if self.offline:
                return None
            response = self._fetch(kind, ident)
            self.cache.put(digest, f"{kind}:{ident}", response)
            return response

    def _request(self, kind, ident):
        if kind == "doi":
            return self.session.get(f"{self.base_url}/works/{quote(ident, safe='/:;()')}",
                                    timeout=self.timeout)
        return self.session.get(f"{self.base_url}/works",
                                params={"filter": f"alternative-id:{ident}"}, timeout=self.timeout)

    def _fetch(self, kind, ident) -> Optional[dict]:
        import requests

        last = None
        for attempt in range(self.retries + 1):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            self.limiter.wait()
            try:
                resp = self._request(kind, ident)
            except (requests.ConnectionError, requests.Timeout) as exc:
                last = str(exc)
                continue
            if resp.status_code == 404:
                return None
            if resp.status_code == 429 or resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise ResolverError(f"{kind} {ident}: HTTP {resp.status_code}")
            data = resp.json()
            message = data.get("message", data) if isinstance(data, dict) else {}
            if "items" in message:
                items = message["items"]
                if not items:
                    return None
                message = items[0]
            return parse_work(message)
        raise ResolverUnavailable(f"{kind} {ident}: gave up after {self.retries + 1} attempts ({last})")


# -- languages -------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def _wos_language_table() -> dict[str, str]:
    with resources.files("citeoverlap.data").joinpath("wos_languages.csv").open(encoding="utf-8") as fh:
        return {row["name"].strip().lower(): row["code"].strip() for row in csv.DictReader(fh)}


def wos_language_code(name: Optional[str]) -> Optional[str]:
    """Map a WoS language name such as ``Spanish`` to ``es``; None if unknown."""
    if not name:
        return None
    key = name.strip().lower()
    table = _wos_language_table()
    if key in table:
        return table[key]
    if key in set(table.values()):
        return key
    return None


@dataclass(frozen=True)
class LanguageProfiles:
    stopwords: dict[str, frozenset]
    weights: dict[str, float]

    @classmethod
    def from_rows(cls, rows: Iterable[tuple[str, str]]) -> "LanguageProfiles":
        stop = {code: frozenset(words.split()) for code, words in rows}
        df = Counter(w for words in stop.values() for w in words)
        return cls(stop, {w: 1.0 / n for w, n in df.items()})

    @classmethod
    def load(cls, path) -> "LanguageProfiles":
        with open(path, encoding="utf-8", newline="") as fh:
            return cls.from_rows((r["code"], r["stopwords"]) for r in csv.DictReader(fh))


@functools.lru_cache(maxsize=None)
def default_profiles() -> LanguageProfiles:
    with resources.files("citeoverlap.data").joinpath("language_profiles.csv").open(encoding="utf-8") as fh:
        return LanguageProfiles.from_rows((r["code"], r["stopwords"]) for r in csv.DictReader(fh))


def _script_counts(text: str) -> Counter:
    c = Counter()
    for ch in text:
        o = ord(ch)
        if 0x3040 <= o <= 0x30FF:
            c["kana"] += 1
        elif 0xAC00 <= o <= 0xD7AF or 0x1100 <= o <= 0x11FF or 0x3130 <= o <= 0x318F:
            c["hangul"] += 1
        elif 0x4E00 <= o <= 0x9FFF or 0x3400 <= o <= 0x4DBF or 0xF900 <= o <= 0xFAFF:
            c["han"] += 1
        elif 0x0400 <= o <= 0x04FF:
            c["cyrillic"] += 1
        if ch.isalpha():
            c["letters"] += 1
    return c


def detect_title_language(
    title: str, profiles: Optional[LanguageProfiles] = None, floor: float = 0.65
) -> Optional[str]:
    """Guess a title's language from its script, then from stopword hits.

    Stopword hits are weighted by how many profiles share the word. The best
    profile must beat the runner-up by a relative margin of ``floor``.
    """
    if not title:
        return None
    sc = _script_counts(title)
    letters = sc["letters"]
    if letters == 0:
        return None
    if sc["kana"]:
        return "ja"
    if sc["hangul"]:
        return "ko"
    if sc["han"] / letters >= 0.5:
        return "zh"
    if sc["cyrillic"] / letters >= 0.5:
        return "ru"
    profiles = profiles or default_profiles()
    tokens = title.lower().split()
    scores = {}
    for code, words in profiles.stopwords.items():
        s = sum(profiles.weights[t] for t in tokens if t in words)
        if s > 0:
            scores[code] = s
    if not scores:
        return None
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    best = ranked[0][1]
    second = ranked[1][1] if len(ranked) > 1 else 0.0
    if (best - second) / best < floor:
        return None
    return ranked[0][0]


def detect_language(
    record: CitingRecord,
    wos_lang: Optional[str] = None,
    profiles: Optional[LanguageProfiles] = None,
    floor: float = 0.65,
) -> Optional[str]:
    """Language by preference: record metadata, then WoS, then the title itself."""
    if record.language:
        return record.language
    if wos_lang:
        code = wos_language_code(wos_lang)
        if code:
            return code
        logger.warning("unmapped WoS language %r for %s", wos_lang, record.record_id)
    return detect_title_language(record.title_norm, profiles, floor)


# -- record enrichment -------------------------------------------------------------


def enrich_record(record: CitingRecord, resolver: Optional[Resolver] = None) -> CitingRecord:
    """Return a copy with DOI, type and language filled where possible.

    Present values are never replaced; disagreements are logged.
    """
    changes = {}
    doi = record.doi
    url_doi = extract_doi_from_url(record.url)
    if doi is None and url_doi:
        doi = changes["doi"] = url_doi
    elif doi and url_doi and url_doi != doi:
        logger.info("%s: URL DOI %s differs from %s, keeping the latter", record.record_id, url_doi, doi)

    meta = resolver.resolve_metadata(doi) if (resolver is not None and doi) else None
    if meta:
        dt = classify_doc_type(meta.get("type"))
        if record.doc_type is DocumentType.UNKNOWN and dt is not DocumentType.UNKNOWN:
            changes["doc_type_raw"] = meta.get("type")
            changes["doc_type"] = dt
        lang = meta.get("language")
        if lang and not record.language:
            changes["language"] = lang.lower()
        if "doc_type" in changes or "language" in changes:
            changes["resolved"] = True
    if not changes:
        return record
    return dataclasses.replace(record, **changes)


def enrich_records(records: Sequence[CitingRecord], resolver: Optional[Resolver] = None):
    return [enrich_record(r, resolver) for r in records]


# -- document-type correction ---------------------------------------------------------


@dataclass
class TypeDistribution:
    group: str
    shares: dict[DocumentType, float]

    def __post_init__(self):
        total = sum(self.shares.values())
        if abs(total - 1.0) > SUM_TOL:
            raise ValueError(f"type shares for {self.group!r} sum to {total}, not 1")


@dataclass
class CorrectionSample:
    group: str
    record_ids: list[str]
    seed: int
    labels: dict[str, DocumentType] = field(default_factory=dict)

    def distribution(self) -> dict[DocumentType, float]:
        if not self.labels:
            raise ValueError(f"correction sample {self.group!r} has no labels")
        counts = Counter(self.labels.values())
        n = sum(counts.values())
        return {t: counts.get(t, 0) / n for t in DocumentType if t is not DocumentType.UNKNOWN}


def draw_type_sample(records: Iterable[CitingRecord], group: str, n: int, seed: int) -> CorrectionSample:
    """Sample up to ``n`` UNKNOWN-type records of a group without replacement.

    Uses ``random.Random(seed)`` over record ids in sorted order.
    """
    unknown = sorted({r.record_id for r in records if r.doc_type is DocumentType.UNKNOWN})
    if not unknown:
        raise ValueError(f"group {group!r} has no records of unknown document type")
    rng = random.Random(seed)
    picked = rng.sample(unknown, min(n, len(unknown)))
    return CorrectionSample(group=group, record_ids=picked, seed=seed)


SHEET_COLUMNS = ["record_id", "title", "url", "label"]


def write_label_sheet(sample: CorrectionSample, records: Iterable[CitingRecord], fh) -> None:
    by_id = {r.record_id: r for r in records}
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SHEET_COLUMNS)
    for rid in sample.record_ids:
        r = by_id.get(rid)
        label = sample.labels[rid].value if rid in sample.labels else ""
        w.writerow([rid, r.title_raw if r else "", (r.url or "") if r else "", label])


def read_label_sheet(fh, group: str, seed: int = 0) -> CorrectionSample:
    """Load a filled-in labeling sheet. Blank labels are skipped; UNKNOWN is refused."""
    ids, labels = [], {}
    for lineno, row in enumerate(csv.DictReader(fh), start=2):
        rid = (row.get("record_id") or "").strip()
        if not rid:
            continue
        if rid in labels or rid in ids:
            raise ValueError(f"sheet {group!r} line {lineno}: record {rid} listed twice")
        ids.append(rid)
        label = (row.get("label") or "").strip()
        if not label:
            continue
        try:
            dt = DocumentType(label.upper())
        except ValueError:
            dt = classify_doc_type(label)
        if dt is DocumentType.UNKNOWN:
            raise ValueError(f"sheet {group!r} line {lineno}: label {label!r} is not a usable type")
        labels[rid] = dt
    return CorrectionSample(group=group, record_ids=ids, seed=seed, labels=labels)


def _as_type_map(d: Mapping) -> dict[DocumentType, float]:
    return {DocumentType(k): float(v) for k, v in d.items()}


def apply_correction(
    known_dist: Mapping, unknown_share: float, sample_dist: Mapping, group: str = ""
) -> TypeDistribution:
    """Spread the unknown-type share over types in proportion to a labeled sample.

    ``corrected[t] = known[t] + sample[t] * unknown_share``
    """
    known = _as_type_map(known_dist)
    sample = _as_type_map(sample_dist)
    if known.get(DocumentType.UNKNOWN, 0.0) != 0.0 or sample.get(DocumentType.UNKNOWN, 0.0) != 0.0:
        raise ValueError("known and sample distributions must not carry UNKNOWN mass")
    values = list(known.values()) + list(sample.values()) + [unknown_share]
    if any(not math.isfinite(v) or v < 0 or v > 1 for v in values):
        raise ValueError("shares must lie in [0, 1]")
    if abs(sum(known.values()) + unknown_share - 1.0) > SUM_TOL:
        raise ValueError(f"known shares plus unknown share sum to {sum(known.values()) + unknown_share}")
    if abs(sum(sample.values()) - 1.0) > SUM_TOL:
        raise ValueError(f"sample shares sum to {sum(sample.values())}")
    shares = {
        t: known.get(t, 0.0) + sample.get(t, 0.0) * unknown_share
        for t in DocumentType
        if t is not DocumentType.UNKNOWN
    }
    # inputs may each be off by the tolerance; keep the output on the simplex
    total = sum(shares.values())
    shares = {t: v / total for t, v in shares.items()}
    shares[DocumentType.UNKNOWN] = 0.0
    return TypeDistribution(group, shares)
