import json

import pytest

from dive.cli import main
from dive.gateway import CassetteBackend
from dive.pipeline import run
from dive.records import read_jsonl, write_jsonl
from tests.conftest import build_record, write_bundle
from tests.test_pipeline import model_handler
from tests.conftest import ScriptedBackend


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def jsonl_lines(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


@pytest.fixture
def gold_file(tmp_path):
    records = [
        build_record("MgH2", doi="10.1/a", material_class="ionic", capacity_wt_pct=7.6),
        build_record("LaNi5", doi="10.1/b", material_class="interstitial", capacity_wt_pct=1.4),
    ]
    path = tmp_path / "gold.jsonl"
    write_jsonl(records, path)
    return path


def test_score_self_is_100(capsys, gold_file):
    code, out, _ = run_cli(capsys, "score", "--gold", str(gold_file), "--pred", str(gold_file))
    assert code == 0
    report = json.loads(out)
    assert report["total"] == 100.0


def test_score_corpus_groups_by_doi(capsys, gold_file, tmp_path):
    pred = tmp_path / "pred.jsonl"
    write_jsonl([build_record("MgH2", doi="10.1/a", material_class="ionic",
                              capacity_wt_pct=7.6)], pred)
    code, out, _ = run_cli(capsys, "score", "--gold", str(gold_file),
                           "--pred", str(pred), "--corpus")
    assert code == 0
    report = json.loads(out)
    assert report["dois"] == ["10.1/a", "10.1/b"]
    totals = [p["total"] for p in report["per_paper"]]
    assert totals == [100.0, 0.0]
    assert report["total"] == 50.0


def test_ingest_reports_bundles(capsys, tmp_path):
    write_bundle(tmp_path / "b1", doi="10.2/x",
                 figures=[("f1", "PCT curves", "![f1](figures/f1.png)")])
    code, out, _ = run_cli(capsys, "ingest", str(tmp_path / "b1"))
    assert code == 0
    line = json.loads(out)
    assert line["doi"] == "10.2/x" and line["figures"] == 1


def test_ingest_bad_bundle_exits_1(capsys, tmp_path):
    (tmp_path / "empty").mkdir()
    code, _, err = run_cli(capsys, "ingest", str(tmp_path / "empty"))
    assert code == 1
    assert "missing" in err


def test_extract_replay_golden(capsys, tmp_path):
    bundle_dir = write_bundle(
        tmp_path / "p1", doi="10.1/p1",
        body=("# LaNi5 study\n\nThe alloy LaNi5 absorbs hydrogen at 298 K "
              "reaching 1.4 wt%.\n\n![fig1](figures/fig1.png)\n"),
        figures=[("fig1", "PCT isotherm curves of LaNi5 at 298 K",
                  "![fig1](figures/fig1.png)")],
    )
    cassette = tmp_path / "fix.jsonl"
    from dive.corpus import load_bundle

    recorder = CassetteBackend(cassette, mode="record", inner=ScriptedBackend(model_handler))
    run(load_bundle(bundle_dir), recorder, "dive")

    out1 = tmp_path / "out1.jsonl"
    out2 = tmp_path / "out2.jsonl"
    for out in (out1, out2):
        code, _, _ = run_cli(capsys, "extract", "--mode", "dive",
                             "--bundle", str(bundle_dir),
                             "--backend", f"cassette:{cassette}",
                             "--out", str(out))
        assert code == 0
    assert out1.read_bytes() == out2.read_bytes()
    records = read_jsonl(out1)
    assert all(r.provenance.doi == "10.1/p1" for r in records)
    assert all(r.provenance.extraction_mode == "dive" for r in records)
    manifest = json.loads((tmp_path / "out1.jsonl.manifest.json").read_text())
    assert manifest["mode"] == "dive"
    assert manifest["bundles"][0]["doi"] == "10.1/p1"


def test_extract_cassette_miss_is_operational_error(capsys, tmp_path):
    bundle_dir = write_bundle(tmp_path / "p2", doi="10.1/p2", body="# T\nMgH2 text.\n")
    cassette = tmp_path / "empty.jsonl"
    cassette.write_text("", "utf-8")
    code, _, err = run_cli(capsys, "extract", "--mode", "dive",
                           "--bundle", str(bundle_dir),
                           "--backend", f"cassette:{cassette}",
                           "--out", str(tmp_path / "o.jsonl"))
    assert code == 1
    assert "cassette" in err


def test_db_append_query_stats_export(capsys, tmp_path, gold_file):
    store_dir = tmp_path / "db"
    code, out, _ = run_cli(capsys, "db", "--store", str(store_dir), "append", str(gold_file))
    assert code == 0
    assert json.loads(out) == {"appended": 2, "skipped_duplicates": 0, "total": 2}

    code, out, _ = run_cli(capsys, "db", "--store", str(store_dir), "append", str(gold_file))
    assert json.loads(out)["skipped_duplicates"] == 2

    code, out, _ = run_cli(capsys, "db", "--store", str(store_dir), "query",
                           "--element", "Mg")
    rows = jsonl_lines(out)
    assert len(rows) == 1 and rows[0]["formula"] == "MgH2"

    code, out, _ = run_cli(capsys, "db", "--store", str(store_dir), "stats",
                           "--kind", "histogram", "--edges", "0,4,8,12")
    counts = json.loads(out)["counts"]
    assert counts["ionic"] == [0, 1, 0]

    code, out, _ = run_cli(capsys, "db", "--store", str(store_dir), "stats",
                           "--kind", "elements", "--lo", "0", "--hi", "14")
    assert {e["element"] for e in json.loads(out)["elements"]} == {"Mg", "La", "Ni"}

    export = tmp_path / "export.jsonl"
    code, out, _ = run_cli(capsys, "db", "--store", str(store_dir), "export",
                           "--out", str(export))
    assert json.loads(out)["exported"] == 2
    assert len(read_jsonl(export)) == 2


def test_train_predict_round_trip(capsys, tmp_path, monkeypatch):
    import numpy as np

    from tests.test_predictor import MINI_GRID
    import dive.cli as cli_mod

    # keep the CLI grid small for test speed
    monkeypatch.setattr(cli_mod, "TrainConfig",
                        lambda seed: __import__("dive.predictor", fromlist=["TrainConfig"]).TrainConfig(
                            seed=seed, grid=[dict(g) for g in MINI_GRID]))
    rng = np.random.default_rng(5)
    pool = ["H", "Mg", "Ni", "La", "Fe", "Li"]
    records = []
    for i in range(80):
        k = int(rng.integers(2, 4))
        els = rng.choice(len(pool), size=k, replace=False)
        formula = "".join(f"{pool[e]}{int(rng.integers(1, 6))}" for e in els)
        from dive.formula import parse_formula

        frac_h = parse_formula(formula).fractions().get("H", 0.0)
        records.append(build_record(formula, doi=f"10.4/{i}",
                                    capacity_wt_pct=min(99.0, 20.0 * frac_h + 1.0)))
    data = tmp_path / "train.jsonl"
    write_jsonl(records, data)

    model_a = tmp_path / "a.json"
    model_b = tmp_path / "b.json"
    digests = []
    for model_path in (model_a, model_b):
        code, out, _ = run_cli(capsys, "train", "--data", str(data), "--seed", "7",
                               "--out", str(model_path))
        assert code == 0
        digests.append(json.loads(out)["digest"])
    assert digests[0] == digests[1]
    assert model_a.read_bytes() == model_b.read_bytes()

    code, out, _ = run_cli(capsys, "predict", "--model", str(model_a),
                           "--formula", "Mg2Fe")
    assert code == 0
    payload = json.loads(out)
    assert payload["canonical_formula"] == "Fe1Mg2"
    code, out2, _ = run_cli(capsys, "predict", "--model", str(model_a),
                            "--formula", "Mg4Fe2")
    assert json.loads(out2)["predicted_capacity_wt_pct"] == payload["predicted_capacity_wt_pct"]


def test_train_unknown_target_is_usage_error(capsys, tmp_path, gold_file):
    code, _, err = run_cli(capsys, "train", "--data", str(gold_file),
                           "--target", "sparkle", "--out", str(tmp_path / "m.json"))
    assert code == 2
    assert "unknown target" in err


def test_design_cli_fallback(capsys, tmp_path, monkeypatch):
    import dive.designer as designer_mod

    monkeypatch.setattr(designer_mod, "predict_capacity",
                        lambda model, c: 8.0 * c.fractions().get("Mg", 0.0))
    from dive.predictor import save_model
    from tests.test_predictor import mini_config, synthetic_dataset
    from dive.predictor import train as train_fn

    model, _ = train_fn(synthetic_dataset(n=60), mini_config())
    model_path = tmp_path / "m.json"
    save_model(model, model_path)

    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({
        "element_pool": ["Mg", "Ni"], "min_capacity": 5.0,
        "max_iterations": 3, "candidates_per_round": 3,
    }), "utf-8")
    trace_path = tmp_path / "trace.json"
    report_path = tmp_path / "report.md"
    code, out, _ = run_cli(capsys, "design", "--spec", str(spec_path),
                           "--model", str(model_path), "--out", str(trace_path),
                           "--report", str(report_path))
    assert code == 0
    outcome = json.loads(out)
    assert outcome["status"] == "success"
    trace = json.loads(trace_path.read_text())
    assert trace["outcome"] == outcome
    assert report_path.read_text().startswith("# Design run")


def test_validate_command(capsys, tmp_path):
    path = tmp_path / "raw.jsonl"
    path.write_text(
        json.dumps({"formula": "MgH2", "capacity": "7.6 wt%"}) + "\n"
        + json.dumps({"formula": "MgH2", "capacity": "120 wt%"}) + "\n",
        "utf-8",
    )
    code, out, _ = run_cli(capsys, "validate", str(path))
    assert code == 1  # one invalid row
    lines = jsonl_lines(out)
    assert lines[0]["capacity_wt_pct"] == 7.6
    assert "invalid" in lines[1]


def test_usage_error_exit_2(capsys):
    with pytest.raises(SystemExit) as err:
        main(["score", "--gold"])  # missing value and --pred
    assert err.value.code == 2


def test_unknown_subcommand_exit_2(capsys):
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 2
