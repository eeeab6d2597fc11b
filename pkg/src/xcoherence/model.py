"""Linear mode-system description: drift, diffusion and mode bookkeeping.

The state vector is ordered optical modes first, then matter modes::

    x = (a_0, ..., a_{N-1}, c_0, ..., c_{M-1})

and evolves as ``dx/dt = -M x + B xi`` with ``D = B B^dagger`` diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ModelError, NonDiagonalizableError

__all__ = [
    "Coupling",
    "ModelParams",
    "ModeSystem",
    "Diagnostics",
    "build_system",
    "validate",
]


def _frozen(a, dtype):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Coupling:
    """Beam-splitter type coupling ``g a_alpha^dagger c_i + h.c.``."""

    optical: int
    matter: int
    g: complex


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the coupled optical/matter mode system.

    Per-mode vectors (``kappa``, ``detuning``, ``nbar``) list the optical
    modes first and the matter modes after them.
    """

    n_optical: int
    n_matter: int
    kappa: Sequence[float]
    detuning: Sequence[float] | None = None
    nbar: Sequence[float] | None = None
    couplings: Sequence[Coupling | tuple] = ()
    parametric_couplings: Sequence[Coupling | tuple] = ()

    def __post_init__(self):
        n_opt, n_mat = int(self.n_optical), int(self.n_matter)
        if n_opt != self.n_optical or n_opt < 1:
            raise ModelError("n_optical must be a positive integer")
        if n_mat != self.n_matter or n_mat < 1:
            raise ModelError("n_matter must be a positive integer")
        n = n_opt + n_mat

        def vec(name, value, default):
            if value is None:
                value = np.full(n, default)
            arr = np.asarray(value, dtype=float).reshape(-1)
            if arr.shape != (n,):
                raise ModelError(
                    f"{name} has length {arr.size}, expected n_optical + n_matter = {n}")
            if not np.all(np.isfinite(arr)):
                raise ModelError(f"{name} must be finite")
            return tuple(float(v) for v in arr)

        kappa = vec("kappa", self.kappa, 0.0)
        detuning = vec("detuning", self.detuning, 0.0)
        nbar = vec("nbar", self.nbar, 0.0)
        if min(kappa) < 0:
            raise ModelError("kappa must be >= 0")
        if min(nbar) < 0:
            raise ModelError("nbar must be >= 0")

        couplings = tuple(_as_coupling(c, n_opt, n_mat) for c in self.couplings)
        seen = set()
        for c in couplings:
            key = (c.optical, c.matter)
            if key in seen:
                raise ModelError(f"duplicate coupling for pair (optical={key[0]}, matter={key[1]})")
            seen.add(key)

        object.__setattr__(self, "n_optical", n_opt)
        object.__setattr__(self, "n_matter", n_mat)
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "detuning", detuning)
        object.__setattr__(self, "nbar", nbar)
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(
            self, "parametric_couplings",
            tuple(_as_coupling(c, n_opt, n_mat) for c in self.parametric_couplings))

    @property
    def n_modes(self) -> int:
        return self.n_optical + self.n_matter


def _as_coupling(c, n_opt, n_mat) -> Coupling:
    if not isinstance(c, Coupling):
        try:
            alpha, i, g = c
        except (TypeError, ValueError):
            raise ModelError(f"coupling must be (optical, matter, g), got {c!r}") from None
        c = Coupling(int(alpha), int(i), complex(g))
    if not 0 <= c.optical < n_opt:
        raise ModelError(f"coupling optical index {c.optical} out of range [0, {n_opt})")
    if not 0 <= c.matter < n_mat:
        raise ModelError(f"coupling matter index {c.matter} out of range [0, {n_mat})")
    if not np.isfinite(complex(c.g)):
        raise ModelError("coupling strength must be finite")
    return c


@dataclass(frozen=True, eq=False)
class ModeSystem:
    """Drift ``M``, diagonal diffusion ``D`` and the optical/matter partition.

    Use :func:`build_system` for the physical model, or construct directly
    (e.g. ``ModeSystem(drift, diffusion, n_optical=1, n_matter=1)``) to supply
    an arbitrary drift matrix. ``diffusion`` may be given as its diagonal.
    """

    drift: np.ndarray
    diffusion: np.ndarray
    n_optical: int
    n_matter: int
    params: ModelParams | None = field(default=None, compare=False)

    def __post_init__(self):
        n_opt, n_mat = int(self.n_optical), int(self.n_matter)
        if n_opt < 1 or n_mat < 1:
            raise ModelError("n_optical and n_matter must both be >= 1")
        n = n_opt + n_mat
        drift = np.array(self.drift, dtype=complex)
        if drift.shape != (n, n):
            raise ModelError(f"drift has shape {drift.shape}, expected ({n}, {n})")
        if not np.all(np.isfinite(drift)):
            raise ModelError("drift must be finite")

        diff = np.asarray(self.diffusion)
        if diff.ndim == 1:
            diff = np.diag(diff)
        if diff.shape != (n, n):
            raise ModelError(f"diffusion has shape {diff.shape}, expected ({n}, {n})")
        if np.iscomplexobj(diff):
            if np.any(diff.imag != 0):
                raise ModelError("diffusion must be real")
            diff = diff.real
        diff = np.array(diff, dtype=float)
        if np.any(diff[~np.eye(n, dtype=bool)] != 0):
            raise ModelError("diffusion must be diagonal")
        if not np.all(np.isfinite(diff)) or np.any(np.diag(diff) < 0):
            raise ModelError("diffusion diagonal must be finite and >= 0")

        object.__setattr__(self, "n_optical", n_opt)
        object.__setattr__(self, "n_matter", n_mat)
        object.__setattr__(self, "drift", _frozen(drift, complex))
        object.__setattr__(self, "diffusion", _frozen(diff, float))

    @property
    def n_modes(self) -> int:
        return self.n_optical + self.n_matter

    @property
    def optical(self) -> slice:
        return slice(0, self.n_optical)

    @property
    def matter(self) -> slice:
        return slice(self.n_optical, self.n_modes)

    def optical_vector(self, amplitudes) -> np.ndarray:
        """Embed optical mode amplitudes into a full-length state vector."""
        v = np.zeros(self.n_modes, dtype=complex)
        v[self.optical] = amplitudes
        return v

    def matter_vector(self, amplitudes) -> np.ndarray:
        v = np.zeros(self.n_modes, dtype=complex)
        v[self.matter] = amplitudes
        return v


def build_system(params: ModelParams) -> ModeSystem:
    """Assemble the drift and diffusion matrices from physical parameters.

    The diagonal is ``kappa_k / 2 + 1j * detuning_k``. A coupling ``g`` between
    optical mode ``alpha`` and matter mode ``i`` gives ``M[alpha, i] = 1j * g``
    and ``M[i, alpha] = 1j * conj(g)``, the Heisenberg equations of
    ``g a^dagger c + g* c^dagger a``. ``D = diag(nbar * kappa)``.

    Raises
    ------
    ModelError
        If parametric couplings are present. They need the doubled phase
        space ``(a, c, a^dagger, c^dagger)``; supply a drift matrix directly
        to :class:`ModeSystem` instead.
    """
    if params.parametric_couplings:
        raise ModelError(
            "parametric (a c) couplings are not representable on the state vector "
            "(a, c); construct ModeSystem with an explicit drift matrix instead")
    n = params.n_modes
    n_opt = params.n_optical
    drift = np.zeros((n, n), dtype=complex)
    kappa = np.asarray(params.kappa)
    drift[np.diag_indices(n)] = kappa / 2 + 1j * np.asarray(params.detuning)
    for c in params.couplings:
        g = complex(c.g)
        drift[c.optical, n_opt + c.matter] = 1j * g
        drift[n_opt + c.matter, c.optical] = 1j * g.conjugate()
    diffusion = np.asarray(params.nbar) * kappa
    return ModeSystem(drift, diffusion, params.n_optical, params.n_matter, params=params)


@dataclass(frozen=True, eq=False)
class Diagnostics:
    eigenvalues: np.ndarray
    min_real: float
    cond: float
    diagonalizable: bool
    stable: bool
    message: str = ""


def validate(system: ModeSystem, stability_tol: float = 1e-12, **eig_kwargs) -> Diagnostics:
    """Report stability and conditioning of ``system``. Never raises."""
    from .spectral import eigendecompose

    message = ""
    try:
        dec = eigendecompose(system.drift, **eig_kwargs)
        lam, cond, ok = dec.eigenvalues, dec.cond, True
    except NonDiagonalizableError as exc:
        lam = np.linalg.eigvals(system.drift)
        lam = lam[np.lexsort((lam.imag, lam.real))]
        cond, ok, message = float("inf"), False, str(exc)
    min_re = float(np.min(lam.real))
    return Diagnostics(
        eigenvalues=lam,
        min_real=min_re,
        cond=float(cond),
        diagonalizable=ok,
        stable=bool(min_re > stability_tol),
        message=message,
    )
