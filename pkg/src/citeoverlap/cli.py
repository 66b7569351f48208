"""Command-line entry point: ingest, enrich, match, report, sample, synth, pipeline.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from .analytics import ALL, UNMAPPED, ClusterIndex
from .core import MatchPolicy, SourceDatabase
from .enrich import Resolver, ResolverError, draw_type_sample, enrich_records, read_label_sheet, write_label_sheet
from .ingest import PARSERS, IngestError, load_category_map, read_records, write_records, write_rejects
from .linkage import ContractViolation, DOI, FUZZY, match_corpus, read_clusters, write_clusters, write_edges
from .report import build_tables, write_bundle
from .synth import SynthSpec, evaluate, generate

logger = logging.getLogger("citeoverlap")

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2
ENV_RESOLVER_URL = "CITEOVERLAP_RESOLVER_URL"
ENV_OFFLINE = "CITEOVERLAP_OFFLINE"
SOURCE_KEYS = {"gs": SourceDatabase.GS, "wos": SourceDatabase.WOS, "scopus": SourceDatabase.SCOPUS}


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    inputs: dict = field(default_factory=dict)
    category_map: Optional[str] = None
    cited_doc_map: Optional[str] = None
    correction_samples: dict = field(default_factory=dict)
    output_dir: str = "out"
    policy: MatchPolicy = field(default_factory=MatchPolicy)
    resolver_url: Optional[str] = None
    offline: bool = True
    rate_limit: float = 1.0
    retries: int = 3
    cache_dir: Optional[str] = None
    workers: int = 1
    seed: Optional[int] = None
    sample_size: int = 500
    top_languages: int = 11

    def validate(self, need_seed: bool = False) -> None:
        out = Path(self.output_dir).resolve()
        for p in self.input_paths():
            rp = Path(p).resolve()
            if rp == out or out in rp.parents:
                raise ConfigError(f"input {p} lies in the output directory {out}")
        if need_seed and self.seed is None:
            raise ConfigError("a seed is required for sampling")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def input_paths(self) -> list[str]:
        paths = []
        for key in sorted(self.inputs):
            paths.extend(self.inputs[key])
        for p in (self.category_map, self.cited_doc_map):
            if p:
                paths.append(p)
        paths.extend(self.correction_samples[k] for k in sorted(self.correction_samples))
        return paths

    def digest(self) -> str:
        # worker count and output location do not change results, so they stay out
        d = {
            "inputs": {k: list(v) for k, v in sorted(self.inputs.items())},
            "category_map": self.category_map,
            "cited_doc_map": self.cited_doc_map,
            "correction_samples": dict(sorted(self.correction_samples.items())),
            "policy": vars(self.policy),
            "resolver_url": self.resolver_url,
            "offline": self.offline,
            "rate_limit": self.rate_limit,
            "retries": self.retries,
            "seed": self.seed,
            "sample_size": self.sample_size,
            "top_languages": self.top_languages,
        }
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    @property
    def out(self) -> Path:
        return Path(self.output_dir)


def _listify(v):
    if v is None:
        return []
    return [v] if isinstance(v, str) else list(v)


def _expand(paths, base: Path) -> list[str]:
    out = []
    for p in paths:
        pp = Path(p)
        if not pp.is_absolute():
            pp = base / pp
        if pp.is_dir():
            out.extend(str(c) for c in sorted(pp.iterdir()) if c.is_file())
        else:
            out.append(str(pp))
    return out


def load_config(path: Optional[str], args: argparse.Namespace) -> PipelineConfig:
    """Defaults < config file < environment < command-line flags."""
    raw = {}
    base = Path.cwd()
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        base = Path(path).resolve().parent

    def rel(p):
        if p is None:
            return None
        pp = Path(p)
        return str(pp if pp.is_absolute() else base / pp)

    inputs = {}
    for key, paths in (raw.get("inputs") or {}).items():
        if key.lower() not in SOURCE_KEYS:
            raise ConfigError(f"unknown input source {key!r}")
        inputs[key.lower()] = _expand(_listify(paths), base)
    resolver = raw.get("resolver") or {}
    policy = dict(raw.get("policy") or {})
    cfg = dict(
        inputs=inputs,
        category_map=rel(raw.get("category_map")),
        cited_doc_map=rel(raw.get("cited_doc_map")),
        correction_samples={k: rel(v) for k, v in (raw.get("correction_samples") or {}).items()},
        output_dir=rel(raw.get("output_dir", "out")),
        resolver_url=resolver.get("base_url"),
        offline=bool(resolver.get("offline", True)),
        rate_limit=float(resolver.get("rate_limit", 1.0)),
        retries=int(resolver.get("retries", 3)),
        cache_dir=rel(resolver.get("cache_dir")),
        workers=int(raw.get("workers", 1)),
        seed=raw.get("seed"),
        sample_size=int(raw.get("sample_size", 500)),
        top_languages=int(raw.get("top_languages", 11)),
    )

    if os.environ.get(ENV_RESOLVER_URL):
        cfg["resolver_url"] = os.environ[ENV_RESOLVER_URL]
        cfg["offline"] = False
    if os.environ.get(ENV_OFFLINE):
        cfg["offline"] = os.environ[ENV_OFFLINE].strip().lower() in ("1", "true", "yes", "on")

    for name in ("gs", "wos", "scopus"):
        flag = getattr(args, name, None)
        if flag:
            cfg["inputs"][name] = _expand(flag, Path.cwd())
    if getattr(args, "output_dir", None):
        cfg["output_dir"] = args.output_dir
    if getattr(args, "category_map", None):
        cfg["category_map"] = args.category_map
    if getattr(args, "cited_doc_map", None):
        cfg["cited_doc_map"] = args.cited_doc_map
    if getattr(args, "workers", None) is not None:
        cfg["workers"] = args.workers
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "resolver_url", None):
        cfg["resolver_url"] = args.resolver_url
        cfg["offline"] = False
    if getattr(args, "offline", False):
        cfg["offline"] = True
    for key, flag in (("high_sim_threshold", "high_sim"), ("low_sim_threshold", "low_sim"),
                      ("min_title_len", "min_title_len")):
        if getattr(args, flag, None) is not None:
            policy[key] = getattr(args, flag)
    try:
        cfg["policy"] = MatchPolicy(**policy)
    except TypeError as exc:
        raise ConfigError(f"bad policy settings: {exc}") from exc
    if cfg["seed"] is not None:
        cfg["seed"] = int(cfg["seed"])
    return PipelineConfig(**cfg)


# -- commands -----------------------------------------------------------------------


def _records_dir(cfg) -> Path:
    return cfg.out / "records"


def _record_file(cfg, source: SourceDatabase) -> Path:
    return _records_dir(cfg) / f"{source.value.lower()}.jsonl"


def _load_all_records(cfg):
    records = []
    for s in SourceDatabase:
        p = _record_file(cfg, s)
        if not p.exists():
            raise FileNotFoundError(f"{p} not found; run ingest first")
        records.extend(read_records(p))
    return records


def _require_files(paths):
    for p in paths:
        if not Path(p).is_file():
            raise FileNotFoundError(f"input file not found: {p}")


def cmd_ingest(cfg: PipelineConfig) -> dict:
    cfg.validate()
    _require_files(p for k in cfg.inputs for p in cfg.inputs[k])
    _records_dir(cfg).mkdir(parents=True, exist_ok=True)
    rejects, counts = [], {}
    for key, source in SOURCE_KEYS.items():
        records, seen, dupes = [], set(), 0
        for path in cfg.inputs.get(key, []):
            res = PARSERS[source](path)
            rejects.extend(res.rejects)
            for r in res.records:
                k = (r.cited_doc_id, r.record_id)
                if k in seen:
                    dupes += 1
                    continue
                seen.add(k)
                records.append(r)
        if dupes:
            logger.warning("%s: dropped %d records repeated across export batches", key, dupes)
        write_records(records, _record_file(cfg, source))
        counts[source.value] = {"records": len(records), "batch_duplicates": dupes}
    with open(cfg.out / "rejects.csv", "w", encoding="utf-8", newline="") as fh:
        write_rejects(rejects, fh)
    counts["rejects"] = len(rejects)
    for s in SourceDatabase:
        print(f"{s.value}: {counts[s.value]['records']} records")
    print(f"rejected lines: {len(rejects)}")
    return counts


def make_resolver(cfg: PipelineConfig) -> Optional[Resolver]:
    if cfg.offline and not cfg.cache_dir:
        return None
    cache = cfg.cache_dir or str(cfg.out / "resolver_cache")
    return Resolver(cfg.resolver_url, cache, offline=cfg.offline, rate_limit=cfg.rate_limit,
                    retries=cfg.retries)


def cmd_enrich(cfg: PipelineConfig) -> dict:
    cfg.validate()
    resolver = make_resolver(cfg)
    stats = {}
    for s in SourceDatabase:
        path = _record_file(cfg, s)
        if not path.exists():
            raise FileNotFoundError(f"{path} not found; run ingest first")
        before = read_records(path)
        after = enrich_records(before, resolver)
        write_records(after, path)
        stats[s.value] = {
            "doi_added": sum(1 for a, b in zip(before, after) if a.doi is None and b.doi),
            "resolved": sum(1 for b in after if b.resolved),
        }
        print(f"{s.value}: {stats[s.value]['doi_added']} DOIs added, {stats[s.value]['resolved']} resolved")
    return stats


def cmd_match(cfg: PipelineConfig) -> dict:
    cfg.validate()
    records = _load_all_records(cfg)
    edges, clusters = match_corpus(records, cfg.policy, workers=cfg.workers)
    with open(cfg.out / "edges.csv", "w", encoding="utf-8", newline="") as fh:
        write_edges(edges, fh)
    with open(cfg.out / "clusters.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        write_clusters(clusters, fh)
    summary = {
        "edges_doi": sum(1 for e in edges if e.method == DOI),
        "edges_fuzzy": sum(1 for e in edges if e.method == FUZZY),
        "clusters": len(clusters),
        "flagged": sum(1 for c in clusters if c.flagged),
    }
    print(f"edges: {summary['edges_doi']} DOI, {summary['edges_fuzzy']} fuzzy; "
          f"clusters: {summary['clusters']} ({summary['flagged']} flagged)")
    return summary


def _file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_corrections(cfg):
    out = {}
    for area, path in sorted(cfg.correction_samples.items()):
        with open(path, encoding="utf-8", newline="") as fh:
            out[area] = read_label_sheet(fh, area)
    return out


def cmd_report(cfg: PipelineConfig) -> dict:
    cfg.validate()
    records = _load_all_records(cfg)
    clusters_path = cfg.out / "clusters.jsonl"
    if not clusters_path.exists():
        raise FileNotFoundError(f"{clusters_path} not found; run match first")
    with open(clusters_path, encoding="utf-8") as fh:
        clusters = read_clusters(fh)
    category_map = load_category_map(cfg.category_map) if cfg.category_map else None
    cited_map = load_category_map(cfg.cited_doc_map) if cfg.cited_doc_map else None
    index = ClusterIndex.build(clusters, records, cited_map)
    tables, skipped, unmapped = build_tables(index, category_map, cited_map, _load_corrections(cfg),
                                             cfg.top_languages)
    manifest = {
        "tool": "citeoverlap",
        "version": __version__,
        "config_digest": cfg.digest(),
        "inputs": {p: _file_digest(p) for p in cfg.input_paths()},
        "skipped": skipped,
        "notes": {
            "mean_ratio": "mean of (1 + gs) / (1 + other) per citing document",
            "ci": "1.96 * sample sd / sqrt(n) on ln(1 + count)",
            "denominator": "citation clusters after linkage",
        },
        "unmapped_venues": unmapped,
    }
    report_dir = cfg.out / "report"
    write_bundle(report_dir, tables, {"manifest": manifest})
    with open(report_dir / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    overall = next(r for r in tables["regions"] if r["group"] == ALL) if tables["regions"] else None
    if overall:
        print("regions: " + ", ".join(f"{k}={overall[k]}" for k in
                                      ("G", "W", "S", "GW", "GSc", "WS", "GWS", "total")))
    for s in skipped:
        print(f"skipped: {s} (no category map)")
    return {"tables": tables, "manifest": manifest}


def cmd_sample(cfg: PipelineConfig) -> list:
    cfg.validate(need_seed=True)
    records = _load_all_records(cfg)
    cited_map = load_category_map(cfg.cited_doc_map) if cfg.cited_doc_map else None
    by_area = {}
    for r in records:
        e = cited_map.get(r.cited_doc_id) if cited_map else None
        by_area.setdefault(e.broad_area if e else UNMAPPED, []).append(r)
    out = cfg.out / "samples"
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for n, area in enumerate(sorted(by_area)):
        try:
            sample = draw_type_sample(by_area[area], area, cfg.sample_size, cfg.seed + n)
        except ValueError as exc:
            logger.warning("%s", exc)
            continue
        name = "".join(ch if ch.isalnum() else "_" for ch in area).strip("_").lower() or "group"
        path = out / f"{name}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            write_label_sheet(sample, by_area[area], fh)
        written.append(str(path))
        print(f"{area}: {len(sample.record_ids)} records -> {path}")
    return written


def cmd_synth(spec_path: str, out_dir: str, seed: Optional[int] = None) -> dict:
    with open(spec_path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if seed is not None:
        raw["seed"] = seed
    spec = SynthSpec.from_mapping(raw)
    truth = generate(spec, out_dir)
    print(f"synthetic corpus: {truth['n_records']} records in {truth['n_clusters']} clusters -> {out_dir}")
    return truth


def cmd_pipeline(cfg: PipelineConfig) -> dict:
    cmd_ingest(cfg)
    cmd_enrich(cfg)
    cmd_match(cfg)
    return cmd_report(cfg)


def cmd_evaluate(out_dir: str, truth_path: str) -> dict:
    from .linkage import read_edges

    with open(truth_path, encoding="utf-8") as fh:
        truth = json.load(fh)
    with open(Path(out_dir) / "edges.csv", encoding="utf-8") as fh:
        edges = read_edges(fh)
    with open(Path(out_dir) / "clusters.jsonl", encoding="utf-8") as fh:
        clusters = read_clusters(fh)
    res = evaluate(edges, clusters, truth)
    print(f"precision {res['precision']:.4f} recall {res['recall']:.4f} f1 {res['f1']:.4f} "
          f"max region error {res['max_abs_pp_diff']:.3f} pp")
    return res


# -- argument parsing --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="citeoverlap", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("-c", "--config", help="JSON configuration file")
        sp.add_argument("-o", "--output-dir")
        sp.add_argument("--gs", nargs="+", help="GS JSON-lines dumps")
        sp.add_argument("--wos", nargs="+", help="WoS tab-delimited exports")
        sp.add_argument("--scopus", nargs="+", help="Scopus CSV exports")
        sp.add_argument("--category-map")
        sp.add_argument("--cited-doc-map")
        sp.add_argument("--workers", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--resolver-url")
        sp.add_argument("--offline", action="store_true")
        sp.add_argument("--high-sim", type=float)
        sp.add_argument("--low-sim", type=float)
        sp.add_argument("--min-title-len", type=int)

    for name, help_ in (
        ("ingest", "parse exports into canonical record files"),
        ("enrich", "fill DOIs, types and languages"),
        ("match", "link records into citation clusters"),
        ("report", "write overlap, distribution and correlation tables"),
        ("sample", "draw labeling sheets of unknown-type records"),
        ("pipeline", "ingest, enrich, match and report"),
    ):
        common(sub.add_parser(name, help=help_))

    sp = sub.add_parser("synth", help="generate a synthetic corpus with known truth")
    sp.add_argument("spec", help="JSON synthesis spec")
    sp.add_argument("-o", "--output-dir", required=True)
    sp.add_argument("--seed", type=int)

    sp = sub.add_parser("evaluate", help="score match output against a synthetic truth file")
    sp.add_argument("truth")
    sp.add_argument("-o", "--output-dir", required=True)
    return p


COMMANDS = {
    "ingest": cmd_ingest,
    "enrich": cmd_enrich,
    "match": cmd_match,
    "report": cmd_report,
    "sample": cmd_sample,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            cmd_synth(args.spec, args.output_dir, args.seed)
        elif args.command == "evaluate":
            cmd_evaluate(args.output_dir, args.truth)
        else:
            cfg = load_config(args.config, args)
            COMMANDS[args.command](cfg)
    except ContractViolation as exc:
        where = f" (cited document {exc.cited_doc_id})" if exc.cited_doc_id else ""
        print(f"error: {exc}{where}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, IngestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, ResolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
