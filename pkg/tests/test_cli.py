import json

import pytest

from nelsonlab import cli


def run(args):
    return cli.main(args)


def write_cfg(tmp_path, text):
    p = tmp_path / "run.cfg"
    p.write_text(text, encoding="utf-8")
    return str(p)


class TestConfig:
    def test_defaults_complete(self):
        values = cli.parse_config(None)
        assert set(values) == set(cli.SCHEMA)

    def test_parse_and_override(self, tmp_path):
        path = write_cfg(tmp_path, "model.g = 0.02\n# comment\nbasis.n_max = 3\n")
        values = cli.parse_config(path)
        assert values["model.g"] == 0.02
        assert values["basis.n_max"] == 3

    def test_unknown_key_rejected(self, tmp_path):
        path = write_cfg(tmp_path, "nope.key = 1\n")
        with pytest.raises(cli.ConfigError):
            cli.parse_config(path)

    def test_bad_value_rejected(self, tmp_path):
        path = write_cfg(tmp_path, "model.g = not_a_number\n")
        with pytest.raises(cli.ConfigError):
            cli.parse_config(path)

    def test_unknown_key_exit_code(self, tmp_path):
        path = write_cfg(tmp_path, "nope.key = 1\n")
        assert run(["algebra", "--config", path, "--out", str(tmp_path)]) == cli.EXIT_CONFIG

    def test_config_hash_covers_seed(self, tmp_path):
        values = cli.parse_config(None)
        a = cli.RunConfig(values, seed=1, out_dir=tmp_path).hash()
        b = cli.RunConfig(values, seed=2, out_dir=tmp_path).hash()
        assert a != b


class TestCommands:
    def test_algebra_small_passes(self, tmp_path):
        path = write_cfg(tmp_path, "algebra.draws = 3\nalgebra.n_max = 2\n")
        code = run(["algebra", "--config", path, "--out", str(tmp_path), "--seed", "5"])
        assert code == cli.EXIT_PASS
        rep = json.loads((tmp_path / "algebra_report.json").read_text())
        assert rep["passed"] and rep["max_defect"] < 1e-12

    def test_algebra_corrupt_fails_with_named_identity(self, tmp_path, capsys):
        path = write_cfg(tmp_path, "algebra.draws = 2\nalgebra.n_max = 2\n"
                                   "debug.corrupt_algebra = true\n")
        code = run(["algebra", "--config", path, "--out", str(tmp_path)])
        assert code == cli.EXIT_VERDICT
        assert "ccr" in capsys.readouterr().err

    def test_algebra_nmax_zero_vacuous(self, tmp_path):
        path = write_cfg(tmp_path, "algebra.n_max = 0\n")
        code = run(["algebra", "--config", path, "--out", str(tmp_path)])
        assert code == cli.EXIT_PASS
        rep = json.loads((tmp_path / "algebra_report.json").read_text())
        assert rep["vacuous"]

    def test_dispersion_outputs_and_verdicts(self, tmp_path):
        path = write_cfg(tmp_path, "scan.n_points = 4\ngrid.n_modes = 8\n")
        code = run(["dispersion", "--config", path, "--out", str(tmp_path), "--seed", "3"])
        assert code == cli.EXIT_PASS
        csv = (tmp_path / "dispersion_curve.csv").read_text().strip().split("\n")
        assert csv[0].endswith("config_hash")
        assert len(csv) == 5
        verd = json.loads((tmp_path / "dispersion_verdicts.json").read_text())
        assert verd["sandwich_ok"]
        assert 3.7 <= verd["pt_exponent"] <= 4.3

    def test_dispersion_g_zero_curve_matches_dispersion_law(self, tmp_path):
        path = write_cfg(tmp_path, "model.g = 0.0\nscan.n_points = 3\ngrid.n_modes = 8\n")
        assert run(["dispersion", "--config", path, "--out", str(tmp_path)]) == cli.EXIT_PASS
        rows = (tmp_path / "dispersion_curve.csv").read_text().strip().split("\n")[1:]
        for row in rows:
            cells = row.split(",")
            p, eg = float(cells[0]), float(cells[1])
            assert abs(eg - p * p / 2.0) < 1e-12

    def test_w_and_report_chain(self, tmp_path):
        path = write_cfg(tmp_path, "grid.n_modes = 8\ndynamics.t_max = 30\n")
        assert run(["w", "--config", path, "--out", str(tmp_path)]) == cli.EXIT_PASS
        assert run(["report", "--config", path, "--out", str(tmp_path)]) == cli.EXIT_PASS
        rep = json.loads((tmp_path / "report.json").read_text())
        assert rep["all_pass"]

    def test_manifest_written_with_hash(self, tmp_path):
        path = write_cfg(tmp_path, "algebra.draws = 2\nalgebra.n_max = 1\n")
        run(["algebra", "--config", path, "--out", str(tmp_path), "--seed", "9"])
        man = json.loads((tmp_path / "algebra_manifest.json").read_text())
        assert man["config_hash"] and man["seed"] == 9
        assert "timestamp" in man


class TestDeterminism:
    def test_byte_identical_csv_across_reruns(self, tmp_path):
        path = write_cfg(tmp_path, "grid.n_modes = 8\nscan.n_points = 3\n")
        d1 = tmp_path / "a"
        d2 = tmp_path / "b"
        for d in (d1, d2):
            assert run(["dispersion", "--config", path, "--out", str(d),
                        "--seed", "11"]) == cli.EXIT_PASS
        b1 = (d1 / "dispersion_curve.csv").read_bytes()
        b2 = (d2 / "dispersion_curve.csv").read_bytes()
        assert b1 == b2

    def test_manifests_identical_up_to_timestamp(self, tmp_path):
        path = write_cfg(tmp_path, "grid.n_modes = 8\nscan.n_points = 3\n")
        d1 = tmp_path / "a"
        d2 = tmp_path / "b"
        for d in (d1, d2):
            run(["dispersion", "--config", path, "--out", str(d), "--seed", "11"])
        m1 = json.loads((d1 / "dispersion_manifest.json").read_text())
        m2 = json.loads((d2 / "dispersion_manifest.json").read_text())
        m1.pop("timestamp")
        m2.pop("timestamp")
        assert m1 == m2
