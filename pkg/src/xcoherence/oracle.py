"""Monte Carlo oracle: Euler-Maruyama trajectories of ``dx = -M x dt + B dW``.

Nothing here uses Wick factorization or the eigenvector machinery of
:mod:`xcoherence.correlations`; eigenvalues are only consulted for the step
and burn-in guards and to size the batch-means windows.

Each trajectory draws its noise from its own Philox stream keyed by
``(seed, trajectory index)``, so results do not depend on how trajectories
are grouped into blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correlations import DetectionGeometry, G2Trace, Provenance
from .errors import StepGuardError, TauOffGridError, UnstableSystemError, ZeroIntensityError
from .model import ModeSystem

__all__ = [
    "SimParams",
    "TrajectoryEnsemble",
    "TwoTimeEstimate",
    "simulate_ensemble",
    "estimate_two_time",
    "estimate_g2",
]

STEP_GUARD = 0.1
BURN_IN_DECAYS = 5.0
BATCH_DECAYS = 10.0


@dataclass(frozen=True)
class SimParams:
    """Integrator settings.

    ``sample_every`` is the number of integrator steps between stored samples;
    delays passed to the estimators must be multiples of ``dt * sample_every``.
    """

    dt: float
    burn_in: float
    horizon: float
    n_traj: int
    seed: int = 0
    sample_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")
        if not self.burn_in >= 0:
            raise ValueError("burn_in must be >= 0")
        if int(self.n_traj) != self.n_traj or self.n_traj < 2:
            raise ValueError("n_traj must be an integer >= 2")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise ValueError("sample_every must be a positive integer")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")

    @property
    def sample_interval(self) -> float:
        return self.dt * self.sample_every

    @property
    def burn_steps(self) -> int:
        return int(round(self.burn_in / self.dt))

    @property
    def n_samples(self) -> int:
        return int(round(self.horizon / self.sample_interval)) + 1


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    samples: np.ndarray            # (n_traj, n_samples, n_modes)
    params: SimParams
    system: ModeSystem
    batch_length: float            # time span of one batch-means window

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.shape[1]) * self.params.sample_interval


@dataclass(frozen=True, eq=False)
class TwoTimeEstimate:
    """Matrix estimate with standard errors of its real and imaginary parts."""

    value: np.ndarray
    stderr_real: np.ndarray
    stderr_imag: np.ndarray
    n_batches: int

    @property
    def stderr(self) -> np.ndarray:
        return np.hypot(self.stderr_real, self.stderr_imag)


def _check_guards(system: ModeSystem, params: SimParams) -> float:
    lam = np.linalg.eigvals(system.drift)
    min_re = float(lam.real.min())
    if min_re <= 0:
        raise UnstableSystemError(f"min Re(lambda) = {min_re:.6g} <= 0")
    if params.dt * np.abs(lam).max() >= STEP_GUARD:
        raise StepGuardError(
            f"dt * max|lambda| = {params.dt * np.abs(lam).max():.3g} must be < {STEP_GUARD}")
    if params.burn_in < BURN_IN_DECAYS / min_re * (1 - 1e-12):
        raise StepGuardError(
            f"burn_in {params.burn_in:g} shorter than {BURN_IN_DECAYS:g} / min Re(lambda) "
            f"= {BURN_IN_DECAYS / min_re:.4g}")
    return min_re


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for one trajectory."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def _propagate(x, step_matrix):
    # row-by-row accumulation; a BLAS matmul would make rounding depend on block shape
    acc = x[:, 0:1] * step_matrix[0]
    for j in range(1, step_matrix.shape[0]):
        acc += x[:, j:j + 1] * step_matrix[j]
    return acc


def simulate_ensemble(system: ModeSystem, params: SimParams,
                      block_size: int = 2048, chunk_steps: int = 500) -> TrajectoryEnsemble:
    """Integrate ``n_traj`` independent trajectories from ``x = 0``.

    Each step is ``x <- x - M x dt + sqrt(dt) B z`` with ``B = sqrt(D)`` and
    ``z`` standard complex normal (``<|z|^2> = 1``). The first ``burn_in`` time
    units are discarded; then ``horizon`` time units are stored every
    ``sample_every`` steps.
    """
    min_re = _check_guards(system, params)
    n = system.n_modes
    dt = params.dt
    step_matrix = (np.eye(n) - dt * system.drift).T
    noise_scale = np.sqrt(dt / 2) * np.sqrt(np.diag(system.diffusion))
    burn, stride, n_samples = params.burn_steps, params.sample_every, params.n_samples
    total_steps = burn + (n_samples - 1) * stride

    samples = np.empty((params.n_traj, n_samples, n), dtype=complex)
    for start in range(0, params.n_traj, block_size):
        idx = range(start, min(start + block_size, params.n_traj))
        rngs = [trajectory_rng(params.seed, k) for k in idx]
        x = np.zeros((len(idx), n), dtype=complex)
        if burn == 0:
            samples[idx.start:idx.stop, 0] = x
        step = 0
        while step < total_steps:
            m = min(chunk_steps, total_steps - step)
            raw = np.stack([g.standard_normal((m, n, 2)) for g in rngs], axis=1)
            z = (raw[..., 0] + 1j * raw[..., 1]) * noise_scale
            for j in range(m):
                x = _propagate(x, step_matrix) + z[j]
                step += 1
                k = step - burn
                if k >= 0 and k % stride == 0:
                    samples[idx.start:idx.stop, k // stride] = x
    samples.setflags(write=False)
    return TrajectoryEnsemble(samples, params, system, BATCH_DECAYS / min_re)


def _lag(ens: TrajectoryEnsemble, tau: float) -> int:
    h = ens.params.sample_interval
    k = int(round(tau / h))
    if abs(k * h - tau) > 1e-9 * max(h, abs(tau)):
        raise TauOffGridError(f"tau = {tau!r} is not a multiple of the sampling interval {h!r}")
    if abs(k) >= ens.samples.shape[1]:
        raise TauOffGridError(f"tau = {tau!r} exceeds the sampling horizon")
    return k


def _pairs(n_samples: int, lag: int):
    """Index slices (earlier, later) so that later - earlier == lag."""
    count = n_samples - abs(lag)
    a = slice(max(0, -lag), max(0, -lag) + count)
    b = slice(max(0, lag), max(0, lag) + count)
    return a, b, count


def _batched(ens: TrajectoryEnsemble, values: np.ndarray) -> np.ndarray:
    """Non-overlapping batch means along axis 1, flattened over trajectories.

    ``values`` has shape ``(n_traj, count, ...)``; leftover origins that do not
    fill a batch are dropped.
    """
    count = values.shape[1]
    per = max(1, int(round(ens.batch_length / ens.params.sample_interval)))
    nb = count // per
    if nb == 0:
        per, nb = count, 1
    v = values[:, : nb * per].reshape(values.shape[0], nb, per, *values.shape[2:])
    return v.mean(axis=2).reshape(values.shape[0] * nb, *values.shape[2:])


def _mean_se(batches: np.ndarray):
    mean = batches.mean(axis=0)
    se = batches.std(axis=0, ddof=1) / np.sqrt(batches.shape[0])
    return mean, se


def estimate_two_time(ens: TrajectoryEnsemble, tau: float) -> TwoTimeEstimate:
    """Empirical ``<x_k(t + tau) x_l*(t)>`` averaged over trajectories and origins."""
    lag = _lag(ens, tau)
    X = ens.samples
    first, second, _ = _pairs(X.shape[1], lag)
    prod = X[:, second, :, None] * X[:, first, None, :].conj()
    batches = _batched(ens, prod)
    mean, _ = _mean_se(batches)
    _, se_re = _mean_se(batches.real)
    _, se_im = _mean_se(batches.imag)
    return TwoTimeEstimate(mean, se_re, se_im, batches.shape[0])


def estimate_g2(ens: TrajectoryEnsemble, geom: DetectionGeometry, tau_grid) -> G2Trace:
    """Raw fourth-moment estimate of ``g2_x`` with batch-means standard errors.

    ``g2 = <|Psi(t_s)|^2 |E(t_m)|^2> / (<|Psi|^2> <|E|^2>)``; the intensity
    means are taken over the same origins as the numerator. Standard errors
    use the delta method on the ratio.
    """
    tau = np.asarray(tau_grid, dtype=float)
    v_m, v_s = geom.projectors(ens.system)
    X = ens.samples
    I_m = np.abs(X @ v_m) ** 2
    I_s = np.abs(X @ v_s) ** 2
    values = np.empty(tau.size)
    stderr = np.empty(tau.size)
    for n, t in enumerate(tau):
        lag = _lag(ens, float(geom.delay(t)))  # t_m - t_s in samples
        s_idx, m_idx, _ = _pairs(X.shape[1], lag)
        num = _batched(ens, I_s[:, s_idx] * I_m[:, m_idx])
        bs = _batched(ens, I_s[:, s_idx])
        bm = _batched(ens, I_m[:, m_idx])
        N, S, Mm = num.mean(), bs.mean(), bm.mean()
        if S <= 0 or Mm <= 0:
            raise ZeroIntensityError("empirical detector intensity is zero")
        g = N / (S * Mm)
        influence = num / (S * Mm) - g * bs / S - g * bm / Mm
        values[n] = g
        stderr[n] = influence.std(ddof=1) / np.sqrt(influence.size)
    return G2Trace(tau, values, Provenance.MONTE_CARLO, stderr=stderr,
                   system=ens.system, geometry=geom)
