import json

from pathval.cli import EXIT_CONFIG, EXIT_OK, main
from pathval.instances import draw_samples, generate_canonical_instance, read_instance, read_samples, split_data, write_samples
from pathval.numerics import RngStream
from pathval.reformulations import build_path, write_path_csv


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


TINY_CONFIG = {
    "instance": {"kind": "canonical", "d": 3, "seed": 2},
    "method": "ro",
    "n": 60,
    "replications": 2,
    "master_seed": 5,
    "mc_budget": 10000,
    "validators": ["univariate", "plain"],
}


class TestGenData:
    def test_writes_instance_and_samples(self, tmp_path, capsys):
        code, out, _ = run_cli(
            capsys, "gen-data", "--d", "3", "--n", "25", "--seed", "9", "--out", str(tmp_path)
        )
        assert code == EXIT_OK
        inst = read_instance(tmp_path / "instance.json")
        samples = read_samples(tmp_path / "samples.csv")
        assert inst.dim == 3
        assert samples.count == 25 and samples.dim == 3

    def test_deterministic_outputs(self, tmp_path, capsys):
        for sub in ("a", "b"):
            run_cli(
                capsys, "gen-data", "--d", "2", "--n", "10", "--seed", "4",
                "--out", str(tmp_path / sub),
            )
        assert (tmp_path / "a/samples.csv").read_bytes() == (tmp_path / "b/samples.csv").read_bytes()


class TestRun:
    def test_run_with_config_and_overrides(self, tmp_path, capsys):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(TINY_CONFIG), encoding="utf-8")
        out_dir = tmp_path / "results"
        code, out, err = run_cli(
            capsys, "run", "--config", str(cfg_path), "--reps", "3", "--out", str(out_dir)
        )
        assert code == EXIT_OK, err
        doc = json.loads(out)
        assert doc["replications"] == 3
        assert set(doc["rules"]) == {"univariate", "plain"}
        assert (out_dir / "records.csv").exists()
        assert json.loads((out_dir / "summary.json").read_text()) == doc

    def test_unknown_config_key_exits_2(self, tmp_path, capsys):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps({"method": "ro", "surprise": 1}), encoding="utf-8")
        code, _, err = run_cli(capsys, "run", "--config", str(cfg_path))
        assert code == EXIT_CONFIG
        assert "unknown config keys" in err

    def test_invalid_json_exits_2(self, tmp_path, capsys):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text("{not json", encoding="utf-8")
        code, _, err = run_cli(capsys, "run", "--config", str(cfg_path))
        assert code == EXIT_CONFIG

    def test_missing_config_file_exits_2(self, tmp_path, capsys):
        code, _, _ = run_cli(capsys, "run", "--config", str(tmp_path / "nope.json"))
        assert code == EXIT_CONFIG

    def test_bad_validator_override_exits_2(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "run", "--validators", "univariate,nope", "--reps", "1")
        assert code == EXIT_CONFIG


class TestValidate:
    def test_external_path_validation(self, tmp_path, capsys):
        inst = generate_canonical_instance(3, 2)
        samples = draw_samples(inst, 60, RngStream(5, 0))
        split = split_data(samples, 30, 30)
        path = build_path("ro", split.phase1, inst.c, inst.b, inst.alpha, 0.05)
        path_csv = tmp_path / "path.csv"
        write_path_csv(path, path_csv)
        samples_csv = tmp_path / "phase2.csv"
        write_samples(type(samples)(rows=split.phase2), samples_csv)
        report_path = tmp_path / "report.json"
        code, out, err = run_cli(
            capsys, "validate",
            "--path", str(path_csv),
            "--samples", str(samples_csv),
            "--gamma", "0.9",
            "--beta", "0.05",
            "--rule", "univariate",
            "--b", str(inst.b),
            "--out", str(report_path),
        )
        assert code == EXIT_OK, err
        doc = json.loads(report_path.read_text())
        assert doc["rule"] == "univariate"
        assert doc["selected"] is not None
        assert len(doc["candidates"]) == len(path.candidates)

    def test_dimension_mismatch_exits_2(self, tmp_path, capsys):
        inst = generate_canonical_instance(3, 2)
        samples = draw_samples(inst, 60, RngStream(5, 0))
        split = split_data(samples, 30, 30)
        path = build_path("ro", split.phase1, inst.c, inst.b, inst.alpha, 0.05)
        path_csv = tmp_path / "path.csv"
        write_path_csv(path, path_csv)
        other = draw_samples(generate_canonical_instance(2, 1), 10, RngStream(0, 0))
        samples_csv = tmp_path / "phase2.csv"
        write_samples(other, samples_csv)
        code, _, err = run_cli(
            capsys, "validate",
            "--path", str(path_csv), "--samples", str(samples_csv),
            "--gamma", "0.9", "--beta", "0.05", "--rule", "plain", "--b", "2.0",
        )
        assert code == EXIT_CONFIG
        assert "dimension" in err

    def test_report_to_stdout(self, tmp_path, capsys):
        inst = generate_canonical_instance(2, 3)
        samples = draw_samples(inst, 40, RngStream(6, 0))
        split = split_data(samples, 20, 20)
        path = build_path("ro", split.phase1, inst.c, inst.b, inst.alpha, 0.05)
        path_csv = tmp_path / "path.csv"
        write_path_csv(path, path_csv)
        samples_csv = tmp_path / "phase2.csv"
        write_samples(type(samples)(rows=split.phase2), samples_csv)
        code, out, _ = run_cli(
            capsys, "validate",
            "--path", str(path_csv), "--samples", str(samples_csv),
            "--gamma", "0.9", "--beta", "0.05", "--rule", "plain", "--b", "2.0",
        )
        assert code == EXIT_OK
        assert json.loads(out)["rule"] == "plain"


class TestTable:
    def test_matches_run_summary(self, tmp_path, capsys):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(TINY_CONFIG), encoding="utf-8")
        out_dir = tmp_path / "results"
        code, run_out, _ = run_cli(
            capsys, "run", "--config", str(cfg_path), "--out", str(out_dir)
        )
        assert code == EXIT_OK
        code, table_out, _ = run_cli(
            capsys, "table", "--records", str(out_dir / "records.csv"), "--method", "ro"
        )
        assert code == EXIT_OK
        run_doc = json.loads(run_out)
        table_doc = json.loads(table_out)
        # aggregation identical; the hash is not recoverable from the CSV
        assert table_doc["rules"] == run_doc["rules"]
        assert table_doc["benchmark"] == run_doc["benchmark"]
        assert table_doc["replications"] == run_doc["replications"]

    def test_missing_file_exits_2(self, tmp_path, capsys):
        code, _, _ = run_cli(capsys, "table", "--records", str(tmp_path / "none.csv"))
        assert code == EXIT_CONFIG
