import csv
import json
from pathlib import Path

import pytest

from citeoverlap.cli import main

T1 = "a comprehensive comparison of citation data sources"
T3 = "google scholar as a data source for research assessment"
T3_TYPO = "google scholar as a data sourse for research assessment"


@pytest.fixture
def corpus(tmp_path):
    d = tmp_path / "in"
    d.mkdir()
    gs = [
        {"title": T1, "cluster_id": "g1", "cites": 10, "doi": "10.1000/a", "byline": "A Smith - Scientometrics, 2014 - Springer"},
        {"title": "a doctoral thesis on bibliometric indicators", "cluster_id": "g2", "cites": 0,
         "meta": {"citation_dissertation_institution": "UGR"}},
        {"title": T3, "cluster_id": "g3", "cites": 4},
    ]
    (d / "X1.jsonl").write_text("".join(json.dumps(x) + "\n" for x in gs), encoding="utf-8")
    (d / "X1.txt").write_text(
        "UT\tAU\tTI\tSO\tPY\tDI\tDT\tLA\tTC\n"
        f"W1\tSmith, A\t{T1}\tScientometrics\t2014\t10.1000/A\tArticle\tEnglish\t5\n"
        "W2\tDoe, J\twos only record about journal impact factors\tJournal of Informetrics\t2015\t\tArticle\tEnglish\t3\n",
        encoding="utf-8")
    (d / "X1.csv").write_text(
        "Authors,Title,Year,Source title,Cited by,DOI,Document Type,EID\n"
        f"Smith A.,{T1},2014,Scientometrics,6,,Article,2-s2.0-1\n"
        f"Jones B.,{T3_TYPO},2016,Research Evaluation,2,,Article,2-s2.0-3\n",
        encoding="utf-8")
    (d / "venues.csv").write_text(
        "venue,category,broad_area,quartile\nScientometrics,Information Science,Social Sciences,Q1\n",
        encoding="utf-8")
    return d


def _args(d, out, *extra):
    return ["--gs", str(d / "X1.jsonl"), "--wos", str(d / "X1.txt"), "--scopus", str(d / "X1.csv"),
            "-o", str(out), *extra]


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _tree(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(Path(root).rglob("*")) if p.is_file()}


def test_ingest_counts(corpus, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["ingest", *_args(corpus, out)]) == 0
    for name, n in (("gs", 3), ("wos", 2), ("scopus", 2)):
        lines = (out / "records" / f"{name}.jsonl").read_text().splitlines()
        assert len(lines) == n
    assert "GS: 3 records" in capsys.readouterr().out


def test_ingest_missing_file(tmp_path):
    assert main(["ingest", "--gs", str(tmp_path / "nope.jsonl"), "-o", str(tmp_path / "o")]) == 2


def test_ingest_empty_export(tmp_path):
    (tmp_path / "e.txt").write_text("UT\tTI\n", encoding="utf-8")
    out = tmp_path / "o"
    assert main(["ingest", "--wos", str(tmp_path / "e.txt"), "-o", str(out)]) == 0
    assert (out / "records" / "wos.jsonl").read_text() == ""


def test_match_and_report(corpus, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["pipeline", *_args(corpus, out), "--category-map", str(corpus / "venues.csv")]) == 0
    edges = _read_csv(out / "edges.csv")
    assert sorted((e["record_a"], e["record_b"], e["method"]) for e in edges) == [
        ("W1", "2-s2.0-1", "FUZZY"), ("g1", "2-s2.0-1", "FUZZY"), ("g1", "W1", "DOI"), ("g3", "2-s2.0-3", "FUZZY")]
    assert "1 DOI, 3 fuzzy" in capsys.readouterr().out

    # golden values tallied by hand: clusters {g1,W1,s1}, {g2}, {W2}, {g3,s3}
    (row,) = [r for r in _read_csv(out / "report" / "regions.csv") if r["group"] == "all"]
    assert {k: row[k] for k in ("G", "W", "S", "GW", "GSc", "WS", "GWS", "total")} == {
        "G": "1", "W": "1", "S": "0", "GW": "0", "GSc": "1", "WS": "0", "GWS": "1", "total": "4"}
    assert (row["pct_gs_all"], row["pct_wos_all"], row["pct_scopus_all"]) == ("75.0000", "50.0000", "50.0000")
    assert (row["pct_wos_in_gs"], row["pct_scopus_in_gs"], row["pct_wos_in_scopus"]) == (
        "50.0000", "100.0000", "50.0000")

    (corr,) = _read_csv(out / "report" / "correlation_gs_wos.csv")
    assert corr == {"category": "Information Science", "n": "1", "spearman_r": "",
                    "mean_ratio": "1.8333", "mean_log_gs": "2.3979", "mean_log_other": "1.7918"}
    missed = _read_csv(out / "report" / "missed_by_gs.csv")
    assert {"area": "all", "source": "WOS", "kind": "quartile", "bucket": "unmapped",
            "count": "1", "share": "1.0000"} in missed

    manifest = json.loads((out / "report" / "manifest.json").read_text())
    assert manifest["skipped"] == [] and manifest["unmapped_venues"] == ["Journal of Informetrics"]
    summary = json.loads((out / "report" / "summary.json").read_text())
    assert summary["tables"]["regions"][0]["GWS"] == 1


def test_report_without_category_map(corpus, tmp_path):
    out = tmp_path / "out"
    assert main(["pipeline", *_args(corpus, out)]) == 0
    assert not (out / "report" / "correlation_gs_wos.csv").exists()
    manifest = json.loads((out / "report" / "manifest.json").read_text())
    assert "correlation_gs_wos" in manifest["skipped"]


def test_rerun_and_worker_count_give_identical_bytes(corpus, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cm = ["--category-map", str(corpus / "venues.csv")]
    assert main(["pipeline", *_args(corpus, a, "--workers", "1", *cm)]) == 0
    first = _tree(a)
    assert main(["pipeline", *_args(corpus, a, "--workers", "1", *cm)]) == 0
    assert _tree(a) == first
    assert main(["pipeline", *_args(corpus, b, "--workers", "8", *cm)]) == 0
    assert _tree(b) == first


def test_manifest_digest_tracks_inputs(corpus, tmp_path):
    out = tmp_path / "out"
    main(["pipeline", *_args(corpus, out)])
    before = json.loads((out / "report" / "manifest.json").read_text())
    with open(corpus / "X1.txt", "a", encoding="utf-8") as fh:
        fh.write("W9\tLee, K\tanother wos record title here\tV\t2017\t\tArticle\tEnglish\t1\n")
    main(["pipeline", *_args(corpus, out)])
    after = json.loads((out / "report" / "manifest.json").read_text())
    assert before["config_digest"] == after["config_digest"]
    assert before["inputs"] != after["inputs"]
    main(["pipeline", *_args(corpus, out, "--high-sim", "0.85")])
    assert json.loads((out / "report" / "manifest.json").read_text())["config_digest"] != after["config_digest"]


def test_policy_override_validation(corpus, tmp_path, capsys):
    out = tmp_path / "out"
    main(["ingest", *_args(corpus, out)])
    assert main(["match", "-o", str(out), "--high-sim", "1.01"]) == 1
    assert "error" in capsys.readouterr().err


def test_config_file_and_flag_precedence(corpus, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "inputs": {"gs": str(corpus / "X1.jsonl"), "wos": [str(corpus / "X1.txt")], "scopus": str(corpus / "X1.csv")},
        "output_dir": "from_config",
        "policy": {"min_title_len": 30},
    }))
    assert main(["ingest", "-c", str(cfg)]) == 0
    assert (tmp_path / "from_config" / "records" / "gs.jsonl").exists()
    assert main(["ingest", "-c", str(cfg), "-o", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "records" / "gs.jsonl").exists()


def test_output_dir_must_differ_from_inputs(corpus):
    assert main(["ingest", "--wos", str(corpus), "-o", str(corpus)]) == 1


def test_sample_requires_seed(corpus, tmp_path):
    out = tmp_path / "out"
    main(["ingest", *_args(corpus, out)])
    assert main(["sample", "-o", str(out)]) == 1
    assert main(["sample", "-o", str(out), "--seed", "3"]) == 0
    (sheet,) = (out / "samples").iterdir()
    rows = _read_csv(sheet)
    assert {r["record_id"] for r in rows} == {"g1", "g3"} and rows[0]["label"] == ""


def _spec(tmp_path, **kw):
    spec = {"n_cited_docs": 5, "n_records": 120, "seed": 4, **kw}
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(spec))
    return p


def test_synth_all_three_sources(tmp_path):
    spec = _spec(tmp_path, regions={"GWS": 1.0})
    assert main(["synth", str(spec), "-o", str(tmp_path / "s")]) == 0
    truth = json.loads((tmp_path / "s" / "truth.json").read_text())
    assert truth["clusters"] and all(c["region"] == "GWS" and len(c["members"]) == 3 for c in truth["clusters"])


def test_synth_is_deterministic_and_validated(tmp_path):
    spec = _spec(tmp_path, max_edits=2, doi_drop=0.3)
    main(["synth", str(spec), "-o", str(tmp_path / "a")])
    main(["synth", str(spec), "-o", str(tmp_path / "b")])
    assert _tree(tmp_path / "a") == _tree(tmp_path / "b")
    main(["synth", str(spec), "-o", str(tmp_path / "c"), "--seed", "5"])
    assert _tree(tmp_path / "c") != _tree(tmp_path / "a")
    bad = _spec(tmp_path, regions={"G": 0.5, "GWS": 0.4})
    assert main(["synth", str(bad), "-o", str(tmp_path / "d")]) == 1


def test_synth_clean_round_trip(tmp_path, capsys):
    spec = _spec(tmp_path)
    s, o = tmp_path / "s", tmp_path / "o"
    assert main(["synth", str(spec), "-o", str(s)]) == 0
    assert main(["pipeline", "--gs", str(s / "gs.jsonl"), "--wos", str(s / "wos.txt"),
                 "--scopus", str(s / "scopus.csv"), "-o", str(o)]) == 0
    assert main(["evaluate", str(s / "truth.json"), "-o", str(o)]) == 0
    assert "f1 1.0000" in capsys.readouterr().out
