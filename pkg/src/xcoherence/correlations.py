"""Stationary two-time correlations, joint counting rates and g2 cross-correlation.

With ``M = U diag(lam) U^-1`` the eigenmodes ``y = U^-1 x`` obey independent
Ornstein-Uhlenbeck equations driven by noise of covariance
``C = U^-1 D U^-dagger``. Their stationary correlations are

    <y_i(t) y_j*(s)> = C_ij exp(-lam_i (t - s)) / (lam_i + lam_j*)     t >= s
    <y_i(t) y_j*(s)> = C_ij exp(-lam_j* (s - t)) / (lam_i + lam_j*)    t <  s

and ``<x(t) x^dagger(s)> = U <y(t) y^dagger(s)> U^dagger``. Correctness of this
placement is checked through the Lyapunov equation ``M S + S M^dagger = D``.

The variables are c-numbers whose moments are the normally ordered operator
moments, so for a zero-mean Gaussian state the joint counting rate is

    w = eta_m eta_s (|<Psi^dagger(t_s) E(t_m)>|^2 + I_s I_m).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import (NonDiagonalizableError, StepTooCoarseError,
                     UnstableSystemError, ZeroIntensityError)
from .model import ModeSystem
from .spectral import SpectralDecomposition, eigendecompose

__all__ = [
    "GateOrder",
    "Provenance",
    "DetectionGeometry",
    "CorrelationKernel",
    "G2Trace",
    "correlation_kernel",
    "stationary_kernel",
    "two_time",
    "steady_covariance",
    "lyapunov_residual",
    "steady_intensities",
    "cross_amplitude",
    "fourth_order_rate",
    "counting_probability",
    "g2_cross",
    "check_lyapunov",
]

# relative threshold below which a projected intensity counts as zero
_INTENSITY_EPS = 1e-13
LYAPUNOV_GUARD = 1e-8


class GateOrder(enum.Enum):
    """Which detector window closes first in the gated scheme.

    ``SCHRODINGER_FIRST``: the matter detector fires at the reference time and
    the optical detector a delay ``tau`` later (``tau = t_m - t_s``).
    ``MAXWELL_FIRST``: roles swapped, ``tau = t_s - t_m``.
    """

    SCHRODINGER_FIRST = "schrodinger_first"
    MAXWELL_FIRST = "maxwell_first"


class Provenance(enum.Enum):
    ANALYTIC = "analytic"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True, eq=False)
class DetectionGeometry:
    """Point detectors: mode-function values at the detector positions and
    broadband responsivities."""

    optical_amplitudes: np.ndarray
    matter_amplitudes: np.ndarray
    eta_m: float = 1.0
    eta_s: float = 1.0
    gate_order: GateOrder = GateOrder.SCHRODINGER_FIRST

    def __post_init__(self):
        u = np.array(self.optical_amplitudes, dtype=complex).reshape(-1)
        phi = np.array(self.matter_amplitudes, dtype=complex).reshape(-1)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(phi))):
            raise ValueError("detector amplitudes must be finite")
        if not np.any(u != 0):
            raise ValueError("at least one optical amplitude must be nonzero")
        if not np.any(phi != 0):
            raise ValueError("at least one matter amplitude must be nonzero")
        if not (self.eta_m > 0 and self.eta_s > 0):
            raise ValueError("eta_m and eta_s must be > 0")
        u.setflags(write=False)
        phi.setflags(write=False)
        object.__setattr__(self, "optical_amplitudes", u)
        object.__setattr__(self, "matter_amplitudes", phi)
        object.__setattr__(self, "eta_m", float(self.eta_m))
        object.__setattr__(self, "eta_s", float(self.eta_s))
        object.__setattr__(self, "gate_order", GateOrder(self.gate_order))

    def projectors(self, system: ModeSystem) -> tuple[np.ndarray, np.ndarray]:
        """Full-length vectors ``(v_m, v_s)`` with ``E = v_m . x``, ``Psi = v_s . x``."""
        if self.optical_amplitudes.size != system.n_optical:
            raise ValueError(
                f"{self.optical_amplitudes.size} optical amplitudes for "
                f"{system.n_optical} optical modes")
        if self.matter_amplitudes.size != system.n_matter:
            raise ValueError(
                f"{self.matter_amplitudes.size} matter amplitudes for "
                f"{system.n_matter} matter modes")
        return (system.optical_vector(self.optical_amplitudes),
                system.matter_vector(self.matter_amplitudes))

    def delay(self, tau):
        """Signed ``t_m - t_s`` for a gate-relative delay ``tau``."""
        if self.gate_order is GateOrder.SCHRODINGER_FIRST:
            return tau
        return -np.asarray(tau)


@dataclass(frozen=True, eq=False)
class CorrelationKernel:
    C: np.ndarray
    denominators: np.ndarray
    decomp: SpectralDecomposition
    diffusion: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        """``C_ij / (lam_i + lam_j*)``: the equal-time eigenbasis covariance."""
        return self.C / self.denominators


@dataclass(frozen=True, eq=False)
class G2Trace:
    tau: np.ndarray
    values: np.ndarray
    provenance: Provenance
    stderr: np.ndarray | None = None
    system: ModeSystem | None = None
    geometry: DetectionGeometry | None = None

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        if tau.ndim != 1 or np.any(np.diff(tau) <= 0):
            raise ValueError("tau must be a strictly increasing 1-d grid")
        values = np.asarray(self.values, dtype=float)
        if values.shape != tau.shape or not np.all(np.isfinite(values)):
            raise ValueError("values must be finite and match tau")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "values", values)
        if self.stderr is not None:
            object.__setattr__(self, "stderr", np.asarray(self.stderr, dtype=float))


def correlation_kernel(decomp: SpectralDecomposition, D) -> CorrelationKernel:
    """Eigenbasis noise covariance ``U^-1 D U^-dagger`` and denominators."""
    lam = decomp.eigenvalues
    if np.any(lam.real <= 0):
        raise UnstableSystemError(
            f"min Re(lambda) = {lam.real.min():.6g} <= 0; no stationary state")
    D = np.asarray(D)
    if D.ndim == 1:
        D = np.diag(D)
    Uinv = decomp.inverse
    C = Uinv @ D @ Uinv.conj().T
    den = lam[:, None] + lam.conj()[None, :]
    return CorrelationKernel(C, den, decomp, np.array(D, dtype=float))


def stationary_kernel(system: ModeSystem, **eig_kwargs) -> CorrelationKernel:
    return correlation_kernel(eigendecompose(system.drift, **eig_kwargs), system.diffusion)


def two_time(kernel: CorrelationKernel, t: float, s: float) -> np.ndarray:
    """Stationary ``<x(t) x^dagger(s)>`` in the mode basis."""
    lam = kernel.decomp.eigenvalues
    U = kernel.decomp.vectors
    if t >= s:
        G = kernel.weights * np.exp(-lam * (t - s))[:, None]
    else:
        G = kernel.weights * np.exp(-lam.conj() * (s - t))[None, :]
    return U @ G @ U.conj().T


def steady_covariance(kernel: CorrelationKernel) -> np.ndarray:
    """Equal-time covariance ``S`` solving ``M S + S M^dagger = D``."""
    U = kernel.decomp.vectors
    return U @ kernel.weights @ U.conj().T


def lyapunov_residual(M, S, D) -> float:
    """Frobenius norm of ``M S + S M^dagger - D``."""
    M = np.asarray(M)
    return float(np.linalg.norm(M @ S + S @ M.conj().T - D))


def steady_intensities(kernel: CorrelationKernel, v_m, v_s) -> tuple[float, float]:
    """Projected steady intensities ``(I_s, I_m)``; raises on zero."""
    S = steady_covariance(kernel)
    scale = np.linalg.norm(S)
    out = []
    for name, v in (("Schrodinger", v_s), ("Maxwell", v_m)):
        intensity = float(np.real(v @ S @ v.conj()))
        if intensity <= _INTENSITY_EPS * scale * np.vdot(v, v).real:
            raise ZeroIntensityError(f"steady {name} detector intensity is zero")
        out.append(intensity)
    return out[0], out[1]


def cross_amplitude(kernel: CorrelationKernel, v_m, v_s, delay) -> np.ndarray:
    """Projected ``<Psi^dagger(t_s) E(t_m)>`` as a function of ``delay = t_m - t_s``.

    Vectorized over ``delay``; negative delays use the ``t < s`` branch.
    """
    lam = kernel.decomp.eigenvalues
    U = kernel.decomp.vectors
    K = kernel.weights
    left = U.T @ v_m
    right = U.conj().T @ v_s.conj()
    later = left * (K @ right)       # delay >= 0: sum_i exp(-lam_i d) later_i
    earlier = (left @ K) * right     # delay < 0: sum_j exp(-lam_j* |d|) earlier_j

    d = np.asarray(delay, dtype=float)
    flat = d.reshape(-1)
    out = np.empty(flat.shape, dtype=complex)
    pos = flat >= 0
    out[pos] = np.exp(-np.outer(flat[pos], lam)) @ later
    out[~pos] = np.exp(np.outer(flat[~pos], lam.conj())) @ earlier
    return out.reshape(d.shape)


def _rate_from_delay(kernel, geom, system, delay):
    v_m, v_s = geom.projectors(system)
    I_s, I_m = steady_intensities(kernel, v_m, v_s)
    A = cross_amplitude(kernel, v_m, v_s, delay)
    return geom.eta_m * geom.eta_s * (np.abs(A) ** 2 + I_s * I_m)


def fourth_order_rate(system: ModeSystem, geom: DetectionGeometry,
                      t_s: float, t_m: float, kernel: CorrelationKernel | None = None) -> float:
    """Joint counting rate ``w(t_s, t_m)`` of the matter and optical detectors.

    Gaussian factorization of ``<E^-(t_m) Psi^dagger(t_s) Psi(t_s) E^+(t_m)>``
    into the cross term ``|A_sm|^2`` and the product of steady intensities.
    Depends only on ``t_m - t_s``.
    """
    if t_s < 0 or t_m < 0:
        raise ValueError("t_s and t_m must be >= 0")
    kernel = kernel if kernel is not None else stationary_kernel(system)
    return float(_rate_from_delay(kernel, geom, system, t_m - t_s))


def counting_probability(system: ModeSystem, geom: DetectionGeometry,
                         T_s: float, T_m: float, step: float | None = None) -> float:
    """Probability of one count at each detector within gates ``T_s`` and ``T_m``.

    Composite trapezoidal rule for the double integral of ``w(t_1, t_2)`` over
    ``[0, T_s] x [0, T_m]``. Each gate is split into ``ceil(T / step)`` equal
    intervals; the default step is ``min(T_s, T_m) / 200``.
    """
    if not (T_s > 0 and T_m > 0):
        raise ValueError("gate lengths must be > 0")
    if step is None:
        step = min(T_s, T_m) / 200
    if not step > 0:
        raise ValueError("step must be > 0")
    if step > min(T_s, T_m) / 2:
        raise StepTooCoarseError(
            f"step {step:g} leaves fewer than 2 intervals in the shorter gate")
    kernel = stationary_kernel(system)

    def nodes(T):
        n = max(2, int(np.ceil(T / step - 1e-9)))
        t = np.linspace(0.0, T, n + 1)
        w = np.full(n + 1, T / n)
        w[[0, -1]] /= 2
        return t, w

    t1, w1 = nodes(T_s)
    t2, w2 = nodes(T_m)
    h1, h2 = t1[1], t2[1]
    if abs(h1 - h2) <= 1e-12 * h1:
        # equal spacing: delays form a lattice, so sum the weight products
        # per delay and evaluate the rate once per lattice point
        pair_weight = np.convolve(w2, w1[::-1])
        delays = np.arange(-(t1.size - 1), t2.size) * h1
        rate = _rate_from_delay(kernel, geom, system, delays)
        return float(pair_weight @ rate)
    rate = _rate_from_delay(kernel, geom, system, t2[None, :] - t1[:, None])
    return float(w1 @ rate @ w2)


def g2_cross(system: ModeSystem, geom: DetectionGeometry, tau_grid,
             kernel: CorrelationKernel | None = None) -> G2Trace:
    """Normalized cross-correlation ``g2_x(tau) = 1 + |A_sm|^2 / (I_s I_m)``.

    ``tau`` is measured from the detector whose gate closes first (see
    :class:`GateOrder`); negative values select the opposite time ordering.
    """
    tau = np.asarray(tau_grid, dtype=float)
    kernel = kernel if kernel is not None else stationary_kernel(system)
    v_m, v_s = geom.projectors(system)
    I_s, I_m = steady_intensities(kernel, v_m, v_s)
    A = cross_amplitude(kernel, v_m, v_s, geom.delay(tau))
    values = 1.0 + np.abs(A) ** 2 / (I_s * I_m)
    return G2Trace(tau, values, Provenance.ANALYTIC, system=system, geometry=geom)


def check_lyapunov(system: ModeSystem, kernel: CorrelationKernel,
                   guard: float = LYAPUNOV_GUARD) -> tuple[np.ndarray, float]:
    """Steady covariance and its Lyapunov residual; raise if above ``guard``."""
    S = steady_covariance(kernel)
    res = lyapunov_residual(system.drift, S, system.diffusion)
    if res > guard * max(np.linalg.norm(system.diffusion), 1.0):
        raise NonDiagonalizableError(f"Lyapunov residual {res:.3g} too large")
    return S, res
