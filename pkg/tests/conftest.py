import numpy as np
import pytest

from xcoherence.correlations import DetectionGeometry
from xcoherence.model import ModelParams, ModeSystem, build_system

BENCH = dict(g=10.0, kappa=6.0, nbar=0.1)


def bench_params(g=BENCH["g"]):
    return ModelParams(1, 1, kappa=(6.0, 6.0), nbar=(0.1, 0.1), couplings=[(0, 0, g)])


@pytest.fixture
def bench():
    return build_system(bench_params())


@pytest.fixture
def point_geom():
    return DetectionGeometry([1.0], [1.0])


def bench_g2(tau):
    tau = np.abs(np.asarray(tau, dtype=float))
    return 1.0 + np.exp(-6 * tau) * np.sin(10 * tau) ** 2


def random_passive_system(rng, n_modes):
    """Beam-splitter network with positive damping; always stable."""
    n_opt = int(rng.integers(1, n_modes))
    n_mat = n_modes - n_opt
    couplings = [(a, i, complex(rng.normal(0, 3), rng.normal(0, 3)))
                 for a in range(n_opt) for i in range(n_mat) if rng.random() < 0.7]
    return build_system(ModelParams(
        n_opt, n_mat,
        kappa=rng.uniform(0.5, 6.0, n_modes),
        detuning=rng.normal(0, 2.0, n_modes),
        nbar=rng.uniform(0.0, 2.0, n_modes),
        couplings=couplings,
    ))


def random_nonnormal_system(rng, n_modes):
    """Dense complex drift shifted to be stable; eigenvectors far from orthogonal."""
    A = rng.normal(size=(n_modes, n_modes)) + 1j * rng.normal(size=(n_modes, n_modes))
    shift = -np.linalg.eigvals(A).real.min() + rng.uniform(0.3, 2.0)
    M = A + shift * np.eye(n_modes)
    D = rng.uniform(0.0, 3.0, n_modes)
    n_opt = int(rng.integers(1, n_modes))
    return ModeSystem(M, D, n_opt, n_modes - n_opt)


def stable_corpus(seed=20260, count=50, max_modes=8):
    rng = np.random.default_rng(seed)
    systems = []
    for k in range(count):
        n = int(rng.integers(2, max_modes + 1))
        make = random_passive_system if k % 2 == 0 else random_nonnormal_system
        systems.append(make(rng, n))
    return systems


# -- acceptance reporting ----------------------------------------------------

CRITERIA = {}


@pytest.fixture
def criterion():
    def record(number, passed, detail):
        CRITERIA[number] = (bool(passed), detail)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        passed, detail = CRITERIA[number]
        terminalreporter.write_line(
            f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
