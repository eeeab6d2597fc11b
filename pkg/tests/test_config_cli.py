import csv
import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xcoherence.cli import (CSV_HEADER, EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, EXIT_OK,
                            EXIT_UNSTABLE, main, render_csv, run)
from xcoherence.config import (DetectorConfig, ExplicitSystem, Mode, OracleConfig, RunSpec,
                               parse_config, serialize_config)
from xcoherence.correlations import GateOrder
from xcoherence.errors import ConfigSyntaxError, ConfigValidationError
from xcoherence.model import Coupling, ModelParams

from conftest import bench_g2

BENCH_CONFIG = (Path(__file__).resolve().parent.parent / "configs" / "bench.ini").read_text()

MINIMAL = """
[system]
g = 10
kappa = 6, 6
nbar = 0.1, 0.1

[scan]
tau_max = 1
"""


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- parsing -----------------------------------------------------------------

def test_defaults():
    spec = parse_config(MINIMAL)
    assert spec.tau_steps == 200
    assert spec.mode is Mode.ANALYTIC
    assert spec.sim is None
    d = spec.detectors
    assert d.eta_m == 1 and d.eta_s == 1
    assert d.u == (1,) and d.phi == (1,)
    assert d.gate_order is GateOrder.SCHRODINGER_FIRST
    assert spec.system == ModelParams(1, 1, kappa=(6, 6), nbar=(0.1, 0.1),
                                      couplings=[Coupling(0, 0, 10)])


def test_negative_nbar_rejected():
    with pytest.raises(ConfigValidationError, match="nbar must be >= 0"):
        parse_config(MINIMAL.replace("nbar = 0.1, 0.1", "nbar = -1, 0.1"))


@pytest.mark.parametrize("text, match", [
    (MINIMAL + "bogus = 1\n", "unknown key"),
    (MINIMAL + "[plots]\nx = 1\n", "unknown section"),
    (MINIMAL.replace("tau_max = 1", "tau_max = 0"), "tau_max must be > 0"),
    (MINIMAL + "tau_steps = 1\n", "tau_steps must be >= 2"),
    (MINIMAL + "mode = mc\n", "requires an \\[oracle\\]"),
    (MINIMAL + "mode = fast\n", "mode must be"),
    (MINIMAL.replace("kappa = 6, 6", "kappa = 6"), "kappa has length"),
    (MINIMAL.replace("kappa = 6, 6", "kappa = 6, x"), "cannot parse"),
    (MINIMAL.replace("kappa = 6, 6", "kappa = 6,"), "empty vector"),
    (MINIMAL + "[detectors]\nu = 1, 2\n", "u has 2 entries"),
    (MINIMAL + "[detectors]\ngate_order = sideways\n", "gate_order"),
    (MINIMAL + "[detectors]\neta_m = 0\n", "eta"),
    (MINIMAL + "mode = both\n[oracle]\nhorizon = 0.5\n", "horizon"),
    (MINIMAL + "mode = both\n[oracle]\nseed = -3\n", "seed"),
    (MINIMAL.replace("g = 10", "g = 10\ncouplings = 0:0:1"), "either g or couplings"),
    (MINIMAL.replace("g = 10", "couplings = 0:0"), "optical:matter:g"),
    (MINIMAL.replace("g = 10", "drift = 1, 0; 0, 1"), "drift cannot be combined"),
    ("[scan]\ntau_max = 1\n", "missing \\[system\\]"),
    ("[system]\nkappa = 1, 1\n", "tau_max"),
])
def test_validation_errors(text, match):
    with pytest.raises(ConfigValidationError, match=match):
        parse_config(text)


@pytest.mark.parametrize("text, lineno", [
    ("g = 10\n[system]\n", 1),
    ("[system]\nkappa = 6, 6\n[system]\n", 3),
    ("[system]\nkappa = 6, 6\nkappa = 1, 1\n", 3),
    ("[system]\nkappa = 6, 6\nthis line has no separator\n", 3),
])
def test_syntax_errors_carry_line_numbers(text, lineno):
    with pytest.raises(ConfigSyntaxError) as info:
        parse_config(text)
    assert info.value.lineno == lineno
    assert str(info.value).startswith(f"line {lineno}:")


def test_readme_example_parses():
    readme = (Path(__file__).resolve().parent.parent / "README.md").read_text()
    block = readme.split("```ini\n", 1)[1].split("```", 1)[0]
    spec = parse_config(block)
    assert spec.system.couplings == (Coupling(0, 0, 10),)
    assert spec.sim.n_traj == 1000 and spec.mode is Mode.ANALYTIC


def test_inline_comments():
    spec = parse_config(MINIMAL.replace("g = 10", "g = 10   # coupling"))
    assert spec.system.couplings == (Coupling(0, 0, 10),)


def test_explicit_drift_system():
    spec = parse_config("[system]\ndrift = 3, 10j; 10j, 3\ndiffusion = 0.6, 0.6\n"
                        "[scan]\ntau_max = 0.5\ntau_steps = 11\n")
    assert isinstance(spec.system, ExplicitSystem)
    res = run(spec)
    np.testing.assert_allclose(res.analytic.values, bench_g2(spec.tau_grid), atol=1e-12)


def test_couplings_key():
    spec = parse_config("[system]\nn_optical = 2\ncouplings = 0:0:1.5, 1:0:2-1j\n"
                        "kappa = 1, 2, 3\n[detectors]\nu = 1, 0.5j\n[scan]\ntau_max = 1\n")
    assert spec.system.couplings == (Coupling(0, 0, 1.5), Coupling(1, 0, 2 - 1j))
    assert spec.detectors.u == (1, 0.5j)


@pytest.mark.parametrize("text", [MINIMAL, BENCH_CONFIG,
                                  "[system]\ndrift = 3, 10j; 10j, 3\ndiffusion = 0.6, 0.6\n"
                                  "[scan]\ntau_max = 0.5\n"])
def test_round_trip(text):
    spec = parse_config(text)
    once = serialize_config(spec)
    again = parse_config(once)
    assert again == spec
    assert serialize_config(again) == once


finite = st.floats(0.01, 50, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(kappa=st.tuples(finite, finite, finite), nbar=st.tuples(finite, finite, finite),
       det=st.tuples(*[st.floats(-20, 20)] * 3),
       g=st.complex_numbers(max_magnitude=20, allow_nan=False, allow_infinity=False),
       eta=st.floats(0.01, 1), tau_max=finite, steps=st.integers(2, 5000),
       order=st.sampled_from(list(GateOrder)), mode=st.sampled_from(list(Mode)),
       seed=st.integers(0, 2**64 - 1))
def test_round_trip_property(kappa, nbar, det, g, eta, tau_max, steps, order, mode, seed):
    spec = RunSpec(
        system=ModelParams(2, 1, kappa, det, nbar, [Coupling(1, 0, g)]),
        detectors=DetectorConfig((1, 0.3 - 0.2j), (1j,), eta, 1.0, order),
        tau_max=tau_max, tau_steps=steps, mode=mode,
        sim=OracleConfig(horizon=tau_max + 1, seed=seed))
    assert parse_config(serialize_config(spec)) == spec


# -- run / write ---------------------------------------------------------------

def test_analytic_csv_matches_closed_form(tmp_path):
    cfg = write(tmp_path, BENCH_CONFIG.replace("mode = both", "mode = analytic"))
    out = tmp_path / "out"
    assert main(["--config", cfg, "--output", str(out), "--quiet"]) == EXIT_OK
    rows = read_csv(out / "g2.csv")
    assert tuple(rows[0]) == CSV_HEADER
    assert (out / "g2.csv").read_text().splitlines()[0] == "tau,g2_analytic,g2_mc,g2_mc_stderr"
    tau = np.array([float(r[0]) for r in rows[1:]])
    g2 = np.array([float(r[1]) for r in rows[1:]])
    assert tau.size == 21
    assert np.abs(g2 - bench_g2(tau)).max() < 1e-9
    assert all(r[2] == "" and r[3] == "" for r in rows[1:])


def test_three_point_grid_gives_four_lines():
    spec = parse_config(MINIMAL + "tau_steps = 3\n")
    text = render_csv(run(spec))
    assert len(text.splitlines()) == 4
    assert text.endswith("\n")


def test_mc_only_leaves_analytic_empty(tmp_path):
    cfg = write(tmp_path, BENCH_CONFIG.replace("n_traj = 2000", "n_traj = 20")
                .replace("tau_steps = 21", "tau_steps = 3"))
    out = tmp_path / "out"
    assert main(["--config", cfg, "--output", str(out), "--mode", "mc", "--quiet"]) == EXIT_OK
    rows = read_csv(out / "g2.csv")
    assert all(r[1] == "" and r[2] and r[3] for r in rows[1:])


def test_overrides(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--output", str(out), "--tau-max", "0.5",
                 "--tau-steps", "6", "--quiet"]) == EXIT_OK
    tau = [float(r[0]) for r in read_csv(out / "g2.csv")[1:]]
    np.testing.assert_allclose(tau, np.linspace(0, 0.5, 6))


def test_report_contents(tmp_path):
    cfg = write(tmp_path, BENCH_CONFIG.replace("n_traj = 2000", "n_traj = 50"))
    out = tmp_path / "out"
    assert main(["--config", cfg, "--output", str(out), "--seed", "7", "--quiet"]) == EXIT_OK
    report = (out / "report.txt").read_text()
    for needle in ("lambda[0] = 3", "cond(U)", "Lyapunov residual", "steady covariance",
                   "couplings = 0:0:10", "seed = 7", "effective dt", "points beyond 3 stderr"):
        assert needle in report


@pytest.mark.slow
def test_both_mode_mc_within_three_se(tmp_path):
    cfg = write(tmp_path, BENCH_CONFIG)
    out = tmp_path / "out"
    assert main(["--config", cfg, "--output", str(out), "--quiet"]) == EXIT_OK
    rows = read_csv(out / "g2.csv")[1:]
    an = np.array([float(r[1]) for r in rows])
    mc = np.array([float(r[2]) for r in rows])
    se = np.array([float(r[3]) for r in rows])
    assert np.all(np.abs(mc - an) <= 3 * se)


def test_reruns_are_byte_identical(tmp_path):
    cfg = write(tmp_path, BENCH_CONFIG.replace("n_traj = 2000", "n_traj = 40"))
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["--config", cfg, "--output", str(out), "--quiet"]) == EXIT_OK
    for name in ("g2.csv", "report.txt"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


# -- exit codes ----------------------------------------------------------------

MALFORMED = {
    "syntax": ("[system\nkappa = 1\n", EXIT_CONFIG),
    "unknown_key": (MINIMAL + "colour = red\n", EXIT_CONFIG),
    "negative_nbar": (MINIMAL.replace("nbar = 0.1, 0.1", "nbar = -1, 0.1"), EXIT_CONFIG),
    "step_guard": (BENCH_CONFIG.replace("burn_in = 2", "burn_in = 0.1"), EXIT_CONFIG),
    "unstable": (MINIMAL.replace("kappa = 6, 6", "kappa = 0, 0"), EXIT_UNSTABLE),
    "zero_intensity": (MINIMAL.replace("nbar = 0.1, 0.1", "nbar = 0, 0"), EXIT_NUMERICAL),
    "defective": ("[system]\ndrift = 1, 1; 0, 1\ndiffusion = 1, 1\n[scan]\ntau_max = 1\n",
                  EXIT_NUMERICAL),
}


@pytest.mark.parametrize("name", sorted(MALFORMED))
def test_exit_codes(tmp_path, name, capsys):
    text, code = MALFORMED[name]
    out = tmp_path / "out"
    assert main(["--config", write(tmp_path, text), "--output", str(out), "--quiet"]) == code
    assert not (out / "g2.csv").exists()
    assert "xcoherence: error:" in capsys.readouterr().err


def test_io_error_exit_code(tmp_path, capsys):
    blocker = tmp_path / "not_a_dir"
    blocker.write_text("")
    cfg = write(tmp_path, MINIMAL.replace("tau_max = 1", "tau_max = 1\ntau_steps = 3"))
    assert main(["--config", cfg, "--output", str(blocker / "sub"), "--quiet"]) == EXIT_IO
    assert str(blocker) in capsys.readouterr().err


def test_missing_and_binary_config(tmp_path):
    assert main(["--config", str(tmp_path / "nope.ini"), "--quiet"]) == EXIT_IO
    bad = tmp_path / "bad.ini"
    bad.write_bytes(b"\xff\xfe\x00[system]")
    assert main(["--config", str(bad), "--output", str(tmp_path), "--quiet"]) == EXIT_CONFIG


def test_bad_cli_seed(tmp_path):
    cfg = write(tmp_path, BENCH_CONFIG)
    assert main(["--config", cfg, "--seed", str(2**64), "--output", str(tmp_path)]) == EXIT_CONFIG


def test_prints_paths_unless_quiet(tmp_path, capsys):
    cfg = write(tmp_path, MINIMAL.replace("tau_max = 1", "tau_max = 1\ntau_steps = 3"))
    out = tmp_path / "o"
    assert main(["--config", cfg, "--output", str(out)]) == EXIT_OK
    printed = capsys.readouterr().out.split()
    assert printed == [os.path.join(str(out), "g2.csv"), os.path.join(str(out), "report.txt")]
