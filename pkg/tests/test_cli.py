import json

import numpy as np
import pytest
from PIL import Image

from colorbias.cli import main, resolve_settings, build_parser
from colorbias.dataset import write_manifest
from colorbias.report import load_json


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out.strip().splitlines()
    return code, (json.loads(out[-1]) if out else None)


@pytest.fixture
def identity_corpus(tmp_path, capsys):
    code, summary = run(capsys, "synth", "--out", str(tmp_path / "c"), "-n", "5", "--max-size", "90",
                        "--min-size", "20", "--quiet")
    assert code == 0
    return tmp_path / "c" / "manifest.csv"


def test_analyze_identity(identity_corpus, tmp_path, capsys):
    out = tmp_path / "out"
    code, summary = run(capsys, "analyze", "--manifest", str(identity_corpus), "--out", str(out), "--all", "--quiet")
    assert code == 0 and summary == {"processed": 5, "report": str(out / "report.json"), "skipped": 0}
    r = load_json(out / "report.json")
    assert all(not d.delta.any() for d in r.global_deltas)
    assert all(not g.grid.cells.any() for g in r.local)
    assert not r.mud_delta.cells.any()
    assert all(rec["absolute"] == 0 and rec["relative"] == 0 for rec in r.regional)
    assert (out / "local" / "all" / "shift_B.png").exists()


def test_threads_do_not_change_output(identity_corpus, tmp_path, capsys):
    for threads in ("1", "3"):
        code, _ = run(capsys, "analyze", "--manifest", str(identity_corpus), "--out", str(tmp_path / threads),
                      "--all", "--threads", threads, "--no-heatmaps", "--quiet")
        assert code == 0
    assert (tmp_path / "1" / "report.json").read_bytes() == (tmp_path / "3" / "report.json").read_bytes()


def test_single_analysis_and_categories(identity_corpus, tmp_path, capsys):
    code, summary = run(capsys, "analyze", "--manifest", str(identity_corpus), "--out", str(tmp_path / "g"),
                        "--global", "--categories", "urban,workplace", "--no-heatmaps", "--quiet")
    assert code == 0 and summary["processed"] == 2
    r = load_json(tmp_path / "g" / "report.json")
    assert r.parameters["analyses"] == ["global"] and r.local == [] and r.mud is None


def test_regional_subcommand(identity_corpus, tmp_path, capsys):
    code, _ = run(capsys, "regional", "--manifest", str(identity_corpus), "--out", str(tmp_path / "r"),
                  "--top-n", "2", "--quiet")
    assert code == 0
    assert (tmp_path / "r" / "regional" / "top_n.txt").exists()
    records = json.loads((tmp_path / "r" / "regional" / "top_n.json").read_text())
    assert max(rec["rank"] for rec in records) == 2


def test_grayscale_subcommand(identity_corpus, tmp_path, capsys):
    code, summary = run(capsys, "grayscale", "--manifest", str(identity_corpus), "--out", str(tmp_path / "gray"))
    assert code == 0 and summary["written"] == 5
    assert len(list((tmp_path / "gray").glob("*.png"))) == 5


def test_mud_subcommand_and_reuse(identity_corpus, tmp_path, capsys):
    code, summary = run(capsys, "mud", "--reference", str(identity_corpus), "--out", str(tmp_path / "mud"), "--quiet")
    assert code == 0 and summary["source_count"] == 5
    assert (tmp_path / "mud" / "mud.png").exists() and (tmp_path / "mud" / "mud.json").exists()
    code, _ = run(capsys, "synth", "--out", str(tmp_path / "blend"), "-n", "3", "--transform", "mud_blend",
                  "--alpha", "0.5", "--mud-json", str(tmp_path / "mud" / "mud.json"), "--max-size", "80", "--quiet")
    assert code == 0
    code, _ = run(capsys, "analyze", "--manifest", str(tmp_path / "blend" / "manifest.csv"), "--out",
                  str(tmp_path / "o"), "--mud", "--mud-json", str(tmp_path / "mud" / "mud.json"), "--quiet")
    assert code == 0
    r = load_json(tmp_path / "o" / "report.json")
    assert r.parameters["mud_source"] == "json:mud.json"
    assert (r.mud_delta.cells < 0).mean() > 0.9


def test_mud_reference_manifest(identity_corpus, tmp_path, capsys):
    code, _ = run(capsys, "analyze", "--manifest", str(identity_corpus), "--out", str(tmp_path / "o"),
                  "--mud", "--mud-reference", str(identity_corpus), "--no-heatmaps", "--quiet")
    assert code == 0
    r = load_json(tmp_path / "o" / "report.json")
    assert r.parameters["mud_source"].startswith("reference manifest sha256:")


def test_report_subcommand(identity_corpus, tmp_path, capsys):
    run(capsys, "analyze", "--manifest", str(identity_corpus), "--out", str(tmp_path / "a"), "--all",
        "--no-heatmaps", "--quiet")
    code, summary = run(capsys, "report", "--report", str(tmp_path / "a" / "report.json"), "--out",
                        str(tmp_path / "fig"), "--quiet")
    assert code == 0 and summary["written"] > 10
    assert (tmp_path / "fig" / "global" / "delta_astar.png").exists()


def test_manifest_subcommand(tmp_path, capsys):
    (tmp_path / "o" / "urban").mkdir(parents=True)
    Image.fromarray(np.zeros((4, 4, 3), np.uint8)).save(tmp_path / "o" / "urban" / "x.jpg")
    code, summary = run(capsys, "manifest", "--originals", str(tmp_path / "o"), "--colorized",
                        str(tmp_path / "c"), "--out", str(tmp_path / "m.csv"), "--quiet")
    assert code == 0 and summary["entries"] == 1


def test_exit_codes(identity_corpus, tmp_path, capsys):
    code, _ = run(capsys, "analyze", "--manifest", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "x"),
                  "--all", "--quiet")
    assert code == 2
    code, _ = run(capsys, "analyze", "--manifest", str(identity_corpus), "--out", str(tmp_path / "x"), "--quiet")
    assert code == 2  # no analyses enabled
    code, _ = run(capsys, "analyze", "--manifest", str(identity_corpus), "--out", str(tmp_path / "x"),
                  "--all", "--grid", "1", "--quiet")
    assert code == 2
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _ = run(capsys, "analyze", "--manifest", str(identity_corpus), "--out", str(blocker / "sub"),
                  "--global", "--quiet")
    assert code == 3


def test_partial_failure_exit_code(identity_corpus, tmp_path, capsys):
    base = identity_corpus.parent
    Image.fromarray(np.zeros((10, 10, 3), np.uint8)).save(base / "small.png")
    rows = [r.split(",") for r in identity_corpus.read_text().splitlines()[1:]]
    rows.append(["original/img_00000.png.missing", "colorized/img_00000.png", "urban"])
    rows.append(["small.png", "colorized/img_00001.png", "urban"])
    m = write_manifest(base / "bad.csv", rows)
    code, summary = run(capsys, "analyze", "--manifest", str(m), "--out", str(tmp_path / "p"), "--global",
                        "--local", "--no-heatmaps", "--quiet")
    assert code == 1 and summary == {"processed": 5, "report": str(tmp_path / "p" / "report.json"), "skipped": 2}
    r = load_json(tmp_path / "p" / "report.json")
    assert [s["pair_id"] for s in r.skipped] == [5, 6]
    assert r.counts["processed"] + r.counts["skipped"] == r.counts["entries"]


def test_config_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"grid": 32, "top_n": 9, "analyses": ["local"], "threads": 2}))
    parser = build_parser()
    s = resolve_settings(parser.parse_args(["analyze", "--config", str(cfg), "--top-n", "3"]))
    assert (s["grid"], s["top_n"], s["analyses"], s["threads"]) == (32, 3, ["local"], 2)
    monkeypatch.setenv("COLORBIAS_THREADS", "4")
    s = resolve_settings(parser.parse_args(["analyze", "--all"]))
    assert s["threads"] == 4 and s["grid"] == 64 and s["candidates"] == 400
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["analyze", "--config", str(cfg), "--all", "--quiet"]) == 2
