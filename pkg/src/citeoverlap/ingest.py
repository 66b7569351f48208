"""Readers for the three export formats, the category map, and the canonical record file."""

from __future__ import annotations

import csv
import io
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .core import (
    CitingRecord,
    SourceDatabase,
    classify_doc_type,
    normalize_doi,
)
from .enrich import wos_language_code

logger = logging.getLogger(__name__)


class IngestError(Exception):
    """A file cannot be parsed at all (bad encoding, broken CSV quoting)."""


@dataclass(frozen=True)
class Reject:
    file: str
    line: int
    reason: str


@dataclass
class ParseResult:
    records: list[CitingRecord] = field(default_factory=list)
    rejects: list[Reject] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    total_lines: int = 0

    def warn(self, msg: str) -> None:
        logger.warning(msg)
        self.warnings.append(msg)


def _read_text(path) -> str:
    data = Path(path).read_bytes()
    skip = 3 if data.startswith(b"\xef\xbb\xbf") else 0
    try:
        return data[skip:].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise IngestError(f"{path}: invalid UTF-8 at byte offset {exc.start + skip}") from exc


def _lines(text: str) -> list[str]:
    # only LF / CRLF end a line; other Unicode separators may sit inside a title
    lines = [ln[:-1] if ln.endswith("\r") else ln for ln in text.split("\n")]
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _to_int(value) -> Optional[int]:
    if value is None:
        return None
    if isinstance(value, int):
        return value
    s = str(value).strip().replace(",", "")
    if not s:
        return None
    try:
        n = int(s)
    except ValueError:
        return None
    return n if n >= 0 else None


def _blank(value) -> Optional[str]:
    if value is None:
        return None
    s = str(value).strip()
    return s or None


def _default_cited(path, cited_doc_id):
    return cited_doc_id or Path(path).stem


# -- Web of Science ------------------------------------------------------------


def _wos_language(result: ParseResult, path, lineno: int, name: Optional[str]) -> Optional[str]:
    if not name:
        return None
    code = wos_language_code(name)
    if code is None:
        result.warn(f"{path}:{lineno}: unmapped WoS language {name!r}")
    return code


WOS_CITED_TAG = "CD"


def parse_wos_export(path, cited_doc_id: Optional[str] = None) -> ParseResult:
    """Parse a tab-delimited WoS export.

    Quotes carry no meaning in this format, so lines are split on raw tabs.
    The cited document comes from a ``CD`` column when present, else from
    ``cited_doc_id``, else from the file stem.
    """
    text = _read_text(path)
    lines = _lines(text)
    result = ParseResult()
    if not lines:
        return result
    header = [h.strip() for h in lines[0].split("\t")]
    idx = {tag: i for i, tag in enumerate(header) if tag}
    fallback_cited = _default_cited(path, cited_doc_id)
    seen = set()

    def get(cells, tag):
        i = idx.get(tag)
        return _blank(cells[i]) if i is not None else None

    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        result.total_lines += 1
        cells = line.split("\t")
        if len(cells) != len(header):
            result.rejects.append(Reject(str(path), lineno,
                                         f"expected {len(header)} fields, found {len(cells)}"))
            continue
        rid = get(cells, "UT")
        title = get(cells, "TI")
        if not rid or not title:
            result.rejects.append(Reject(str(path), lineno, "missing UT or TI"))
            continue
        cited = get(cells, WOS_CITED_TAG) or fallback_cited
        if (cited, rid) in seen:
            result.rejects.append(Reject(str(path), lineno, f"duplicate record_id {rid}"))
            result.warn(f"{path}:{lineno}: duplicate record {rid} for {cited}, keeping first")
            continue
        seen.add((cited, rid))
        authors = [a.strip() for a in (get(cells, "AU") or "").split(";") if a.strip()]
        dt = get(cells, "DT")
        if dt and ";" in dt:
            dt = dt.split(";")[0].strip()
        result.records.append(
            CitingRecord(
                record_id=rid,
                source=SourceDatabase.WOS,
                cited_doc_id=cited,
                title_raw=title,
                authors=authors,
                year=_to_int(get(cells, "PY")),
                venue=get(cells, "SO"),
                doi=normalize_doi(get(cells, "DI")),
                doc_type_raw=dt,
                doc_type=classify_doc_type(dt),
                language=_wos_language(result, path, lineno, get(cells, "LA")),
                citation_count=_to_int(get(cells, "TC")),
            )
        )
    return result


# -- Scopus ------------------------------------------------------------------

SCOPUS_CITED_COLUMN = "Cited Document"
_INITIALS_RE = re.compile(r"^(?:[A-Z][a-z]?\.)+(?:-(?:[A-Z][a-z]?\.)+)*$")


def scopus_author(name: str) -> str:
    """Rewrite Scopus' ``Family I.J.`` style as ``Family, I.J.``."""
    if "," in name:
        return name.strip()
    tokens = name.split()
    k = len(tokens)
    while k > 1 and _INITIALS_RE.match(tokens[k - 1]):
        k -= 1
    if k == len(tokens):
        return name.strip()
    return f"{' '.join(tokens[:k])}, {' '.join(tokens[k:])}"


def _split_scopus_authors(raw: Optional[str]) -> list[str]:
    if not raw or raw.strip() in ("[No author name available]",):
        return []
    parts = raw.split(";") if ";" in raw else re.split(r"(?<=\.),\s+", raw)
    return [scopus_author(p.strip()) for p in parts if p.strip()]


def parse_scopus_export(path, cited_doc_id: Optional[str] = None) -> ParseResult:
    """Parse a Scopus CSV export (RFC 4180 quoting)."""
    text = _read_text(path)
    result = ParseResult()
    reader = csv.reader(io.StringIO(text, newline=""), strict=True)
    try:
        header = next(reader, None)
    except csv.Error as exc:
        raise IngestError(f"{path}: malformed CSV in header row: {exc}") from exc
    if header is None:
        return result
    header = [h.strip() for h in header]
    idx = {name: i for i, name in enumerate(header)}
    if "Cited by" not in idx:
        result.warn(f"{path}: no 'Cited by' column, citation counts left empty")
    fallback_cited = _default_cited(path, cited_doc_id)
    seen = set()
    row_no = 1
    while True:
        try:
            row = next(reader)
        except StopIteration:
            break
        except csv.Error as exc:
            raise IngestError(f"{path}: malformed CSV quoting at row {row_no + 1}: {exc}") from exc
        row_no += 1
        if not row or all(not c.strip() for c in row):
            continue
        result.total_lines += 1
        if len(row) != len(header):
            result.rejects.append(Reject(str(path), row_no,
                                         f"expected {len(header)} fields, found {len(row)}"))
            continue

        def get(name):
            i = idx.get(name)
            return _blank(row[i]) if i is not None else None

        eid, title = get("EID"), get("Title")
        if not eid or not title:
            result.rejects.append(Reject(str(path), row_no, "missing Title or EID"))
            continue
        cited = get(SCOPUS_CITED_COLUMN) or fallback_cited
        if (cited, eid) in seen:
            result.rejects.append(Reject(str(path), row_no, f"duplicate record_id {eid}"))
            result.warn(f"{path}:{row_no}: duplicate record {eid} for {cited}, keeping first")
            continue
        seen.add((cited, eid))
        dt = get("Document Type")
        result.records.append(
            CitingRecord(
                record_id=eid,
                source=SourceDatabase.SCOPUS,
                cited_doc_id=cited,
                title_raw=title,
                authors=_split_scopus_authors(get("Authors")),
                year=_to_int(get("Year")),
                venue=get("Source title"),
                doi=normalize_doi(get("DOI")),
                doc_type_raw=dt,
                doc_type=classify_doc_type(dt),
                language=None,
                citation_count=_to_int(get("Cited by")),
            )
        )
    return result


# -- Google Scholar ------------------------------------------------------------

_YEAR_RE = re.compile(r"^(?:1[5-9]|20)\d\d$")
_VENUE_YEAR_RE = re.compile(r"^(?P<venue>.*?),\s*(?P<year>(?:1[5-9]|20)\d\d)$")


def _clean_ellipsis(s: str) -> str:
    return s.replace("…", "").replace("...", "").strip(" ,")


@dataclass(frozen=True)
class Byline:
    authors: list
    venue: Optional[str]
    year: Optional[int]
    host: Optional[str]


def parse_byline(byline: Optional[str]) -> Byline:
    """Split a results-page byline ``authors - venue, year - host``.

    The venue/year and host segments are both optional.
    """
    if not byline or not byline.strip():
        return Byline([], None, None, None)
    segs = [s.strip() for s in byline.replace("\xa0", " ").split(" - ")]
    authors = [a for a in (_clean_ellipsis(x) for x in segs[0].split(",")) if a]
    venue = year = host = None
    if len(segs) >= 3:
        middle = " - ".join(segs[1:-1])
        host = segs[-1] or None
    elif len(segs) == 2:
        middle, last = segs[1], segs[1]
        if _YEAR_RE.match(last) or _VENUE_YEAR_RE.match(last):
            middle = last
        else:
            middle, host = "", last or None
    else:
        middle = ""
    middle = middle.strip()
    if middle:
        m = _VENUE_YEAR_RE.match(middle)
        if m:
            venue, year = _clean_ellipsis(m.group("venue")) or None, int(m.group("year"))
        elif _YEAR_RE.match(middle):
            year = int(middle)
        else:
            venue = _clean_ellipsis(middle) or None
    return Byline(authors, venue, year, host)


def parse_gs_dump(path, cited_doc_id: Optional[str] = None) -> ParseResult:
    """Parse scraped results-page entries stored as JSON lines."""
    text = _read_text(path)
    result = ParseResult()
    fallback_cited = _default_cited(path, cited_doc_id)
    seen = set()
    for lineno, line in enumerate(_lines(text), start=1):
        if not line.strip():
            continue
        result.total_lines += 1
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            result.rejects.append(Reject(str(path), lineno, f"invalid JSON: {exc.msg}"))
            continue
        if not isinstance(obj, dict):
            result.rejects.append(Reject(str(path), lineno, "line is not a JSON object"))
            continue
        rid = _blank(obj.get("cluster_id"))
        title = _blank(obj.get("title"))
        if not rid or not title:
            result.rejects.append(Reject(str(path), lineno, "missing cluster_id or title"))
            continue
        cited = _blank(obj.get("cited_doc_id")) or fallback_cited
        if (cited, rid) in seen:
            result.rejects.append(Reject(str(path), lineno, f"duplicate cluster_id {rid}"))
            result.warn(f"{path}:{lineno}: duplicate cluster_id {rid} for {cited}, keeping first")
            continue
        seen.add((cited, rid))
        meta = obj.get("meta") or {}
        if not isinstance(meta, dict):
            meta = {}
        bl = parse_byline(obj.get("byline"))
        year = _to_int(obj.get("year"))
        doi = normalize_doi(obj.get("doi")) or normalize_doi(meta.get("citation_doi"))
        raw_type = None
        if meta.get("citation_dissertation_institution"):
            raw_type = "dissertation"
        elif meta.get("citation_conference_title"):
            raw_type = "conference paper"
        elif meta.get("citation_journal_title"):
            raw_type = "article"
        result.records.append(
            CitingRecord(
                record_id=rid,
                source=SourceDatabase.GS,
                cited_doc_id=cited,
                title_raw=title,
                authors=bl.authors,
                year=year if year is not None else bl.year,
                venue=bl.venue,
                doi=doi,
                url=_blank(obj.get("url")),
                doc_type_raw=raw_type,
                doc_type=classify_doc_type(raw_type),
                language=_blank(meta.get("citation_language")),
                citation_count=_to_int(obj.get("cites")),
            )
        )
    return result


PARSERS = {
    SourceDatabase.GS: parse_gs_dump,
    SourceDatabase.WOS: parse_wos_export,
    SourceDatabase.SCOPUS: parse_scopus_export,
}


# -- corpus & canonical file ---------------------------------------------------


@dataclass
class Corpus:
    records: list[CitingRecord] = field(default_factory=list)

    @property
    def cited_docs(self) -> set[str]:
        return {r.cited_doc_id for r in self.records}

    def counts(self) -> dict[SourceDatabase, int]:
        out = {s: 0 for s in SourceDatabase}
        for r in self.records:
            out[r.source] += 1
        return out

    def validate(self) -> None:
        seen = set()
        for r in self.records:
            key = (r.cited_doc_id, r.record_id)
            if key in seen:
                raise ValueError(f"duplicate record {r.record_id} for cited document {r.cited_doc_id}")
            seen.add(key)

    def __eq__(self, other):
        return isinstance(other, Corpus) and [r.to_dict() for r in self.records] == [
            r.to_dict() for r in other.records
        ]


def write_records(records: Iterable[CitingRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")


def read_records(path) -> list[CitingRecord]:
    with open(path, encoding="utf-8") as fh:
        return [CitingRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


def write_rejects(rejects: Iterable[Reject], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["file", "line", "reason"])
    for r in rejects:
        w.writerow([r.file, r.line, r.reason])


# -- category map ----------------------------------------------------------------

QUARTILES = ("Q1", "Q2", "Q3", "Q4")


@dataclass(frozen=True)
class CategoryEntry:
    category: str
    broad_area: str
    quartile: Optional[str]


@dataclass
class CategoryMap:
    entries: dict[str, CategoryEntry] = field(default_factory=dict)
    rejects: list[Reject] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @staticmethod
    def key(venue: Optional[str]) -> str:
        return " ".join((venue or "").split()).lower()

    def get(self, venue: Optional[str]) -> Optional[CategoryEntry]:
        if not venue:
            return None
        return self.entries.get(self.key(venue))

    def __len__(self):
        return len(self.entries)


def load_category_map(path) -> CategoryMap:
    """Read ``venue,category,broad_area,quartile``; later duplicate venues win."""
    text = _read_text(path)
    cmap = CategoryMap()
    reader = csv.reader(io.StringIO(text, newline=""))
    first = True
    for row in reader:
        lineno = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if first:
            first = False
            if [c.strip().lower() for c in row[:4]] == ["venue", "category", "broad_area", "quartile"]:
                continue
        if len(row) != 4:
            cmap.rejects.append(Reject(str(path), lineno, f"expected 4 fields, found {len(row)}"))
            continue
        venue, category, area, quartile = (c.strip() for c in row)
        quartile = quartile.upper()
        if quartile not in QUARTILES and quartile != "":
            cmap.rejects.append(Reject(str(path), lineno, f"invalid quartile {quartile!r}"))
            continue
        key = CategoryMap.key(venue)
        if not key:
            cmap.rejects.append(Reject(str(path), lineno, "empty venue"))
            continue
        if key in cmap.entries:
            msg = f"{path}:{lineno}: duplicate venue {venue!r}, keeping last"
            logger.warning(msg)
            cmap.warnings.append(msg)
        cmap.entries[key] = CategoryEntry(category, area, quartile or None)
    return cmap
