import csv
import json

import numpy as np
import pytest

from fracwave.cli import main
from fracwave.fraccalc import mittag_leffler

NEAR_ZERO_OPERATOR = """
[problem]
interior = 8
a11 = 0.000000000001
alpha = 1.5
T = 2.0
K = 256
a = 1 + x
b = 1

[solver]
routes = timestep
times = 0.5 1.0 2.0
"""

SCALAR_MODE = """
[problem]
kind = jordan
jordan_size = 1
jordan_lambda = 1.0
alpha = 1.5
T = 1.0
K = 1024
a = 1
b = 0

[solver]
routes = timestep,resolvent
times = 0.25 0.5 1.0
"""

REFERENCE = """
[problem]
interior = 16
b1 = 1
alpha = 1.5
T = 1.0
K = 1024
a = sin(pi*x)
b = x*(1 - x)

[solver]
routes = all
times = 0.5 1.0

[observation]
omega = 0 1
times = geometric:40:1e-3

[inversion]
reg_scale = 1e-10
"""


def write(tmp_path, text, name="cfg.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_slice(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["value"]) for r in rows])


class TestSimulate:
    def test_near_zero_operator_is_drift(self, tmp_path):
        cfg = write(tmp_path, NEAR_ZERO_OPERATOR)
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        x = np.linspace(0, 1, 10)[1:-1]
        got = read_slice(out / "u_timestep_t2.csv")
        np.testing.assert_allclose(got, (1 + x) + 1.0 * 2.0, atol=1e-8)
        diffs = (out / "route_differences.csv").read_text().splitlines()
        assert diffs[0] == "time,route_a,route_b,relative_l2_difference"

    def test_scalar_mode_matches_mittag_leffler(self, tmp_path):
        cfg = write(tmp_path, SCALAR_MODE)
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        for t in (0.25, 0.5, 1.0):
            ref = mittag_leffler(1.5, 1.0, -(t**1.5)).real
            got = read_slice(out / f"u_resolvent_t{t:g}.csv")
            assert abs(got[0] - ref) < 1e-9
            got_ts = read_slice(out / f"u_timestep_t{t:g}.csv")
            assert abs(got_ts[0] - ref) < 1e-5

    def test_three_routes_cross_agree(self, tmp_path):
        cfg = write(tmp_path, REFERENCE)
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        with open(out / "route_differences.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 6  # 3 pairs x 2 times
        for r in rows:
            assert float(r["relative_l2_difference"]) < 1e-3

    def test_manifest_echoes_defaults(self, tmp_path):
        cfg = write(tmp_path, NEAR_ZERO_OPERATOR)
        out = tmp_path / "out"
        main(["simulate", "--config", cfg, "--out", str(out)])
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert manifest["config"]["inversion"]["method"] == "tikhonov"
        assert manifest["config"]["problem"]["K"] == 256
        assert "timestep" in manifest["solver_metadata"]

    def test_malformed_alpha_exits_1(self, tmp_path):
        cfg = write(tmp_path, "[problem]\nalpha = 2.5\n")
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 1

    def test_missing_config_exits_1(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "nope.ini"),
                     "--out", str(tmp_path / "o")]) == 1


class TestSpectrum:
    def test_jordan_fixture_multiplicity(self, tmp_path):
        cfg = write(
            tmp_path, "[problem]\nkind = jordan\njordan_size = 2\njordan_lambda = 5\n"
        )
        out = tmp_path / "out"
        assert main(["spectrum", "--config", cfg, "--out", str(out)]) == 0
        with open(out / "spectrum.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1
        assert int(rows[0]["multiplicity"]) == 2
        assert float(rows[0]["re_lambda"]) == pytest.approx(5.0)

    def test_laplacian_closed_form(self, tmp_path):
        cfg = write(tmp_path, "[problem]\ninterior = 8\n")
        out = tmp_path / "out"
        assert main(["spectrum", "--config", cfg, "--out", str(out)]) == 0
        with open(out / "spectrum.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        got = np.sort([float(r["re_lambda"]) for r in rows])
        h = 1.0 / 9.0
        k = np.arange(1, 9)
        np.testing.assert_allclose(got, (2 / h**2) * (1 - np.cos(k * np.pi * h)), rtol=1e-9)

    def test_empty_mesh_config_error(self, tmp_path):
        cfg = write(tmp_path, "[problem]\ninterior = 0\n")
        assert main(["spectrum", "--config", cfg, "--out", str(tmp_path / "o")]) == 1


class TestObservability:
    def test_full_domain_verdict(self, tmp_path):
        cfg = write(
            tmp_path,
            "[problem]\ninterior = 6\nb1 = 1\n\n"
            "[observation]\nomega = 0 1\ntimes = geometric:16:1e-2\n",
        )
        out = tmp_path / "out"
        assert main(["observability", "--config", cfg, "--out", str(out)]) == 0
        verdict = json.loads((out / "verdict.json").read_text())
        assert verdict["numerical_rank"] == 12
        assert verdict["verdict"] == "injective"
        sv = (out / "singular_values.csv").read_text().splitlines()
        assert len(sv) == 13

    def test_omega_outside_domain(self, tmp_path):
        cfg = write(
            tmp_path, "[problem]\ninterior = 6\n\n[observation]\nomega = 3 4\n"
        )
        assert main(["observability", "--config", cfg, "--out", str(tmp_path / "o")]) == 1


class TestInvert:
    CFG = (
        "[problem]\ninterior = 8\nb1 = 1\na = sin(pi*x)\nb = x*(1 - x)\n\n"
        "[observation]\nomega = 0 1\ntimes = geometric:20:1e-2\n\n"
        "[inversion]\nreg_scale = 1e-12\n"
    )

    def test_noiseless_recovery(self, tmp_path):
        cfg = write(tmp_path, self.CFG)
        out = tmp_path / "out"
        assert main(["invert", "--config", cfg, "--out", str(out)]) == 0
        summary = json.loads((out / "recovery_summary.json").read_text())
        assert summary["relative_error"] < 1e-6
        with open(out / "recovery.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 8
        worst = max(abs(float(r["a_true"]) - float(r["a_hat"])) for r in rows)
        assert worst < 1e-6

    def test_zero_data_zero_recovery(self, tmp_path):
        cfg = write(tmp_path, self.CFG.replace("a = sin(pi*x)", "a = 0").replace(
            "b = x*(1 - x)", "b = 0"))
        out = tmp_path / "out"
        assert main(["invert", "--config", cfg, "--out", str(out)]) == 0
        with open(out / "recovery.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert all(float(r["a_hat"]) == 0.0 and float(r["b_hat"]) == 0.0 for r in rows)

    def test_noise_without_seed_exits_1(self, tmp_path):
        cfg = write(tmp_path, self.CFG + "noise = 0.01\n")
        assert main(["invert", "--config", cfg, "--out", str(tmp_path / "o")]) == 1

    def test_seed_flag_and_determinism(self, tmp_path):
        cfg = write(tmp_path, self.CFG + "noise = 0.001\n")
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["invert", "--config", cfg, "--out", str(out1), "--seed", "7"]) == 0
        assert main(["invert", "--config", cfg, "--out", str(out2), "--seed", "7"]) == 0
        assert (out1 / "recovery.csv").read_bytes() == (out2 / "recovery.csv").read_bytes()
        assert (out1 / "manifest.json").read_bytes() == (out2 / "manifest.json").read_bytes()


class TestSelftestAndUsage:
    def test_no_arguments_prints_usage(self, capsys):
        assert main([]) == 0
        assert "simulate" in capsys.readouterr().out

    def test_selftest_subset_passes(self, capsys):
        assert main(["selftest", "--only", "2,8"]) == 0
        out = capsys.readouterr().out
        assert out.count("[PASS]") == 2

    def test_selftest_documented_defect_fails(self, capsys):
        assert main(["selftest", "--only", "6"]) == 3
        out = capsys.readouterr().out
        assert "[FAIL]" in out and "documented defect" in out

    def test_bad_only_exits_1(self):
        assert main(["selftest", "--only", "abc"]) == 1

    def test_route_override(self, tmp_path):
        cfg = write(tmp_path, SCALAR_MODE)
        out = tmp_path / "out"
        assert main(
            ["simulate", "--config", cfg, "--out", str(out), "--route", "resolvent"]
        ) == 0
        assert (out / "u_resolvent_t1.csv").exists()
        assert not (out / "u_timestep_t1.csv").exists()
