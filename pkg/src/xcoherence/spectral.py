"""Eigendecomposition of the (non-Hermitian, complex) drift matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonDiagonalizableError

__all__ = ["SpectralDecomposition", "eigendecompose", "propagator"]

DEFAULT_TOL = 1e-10
DEFAULT_COND_MAX = 1e8


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """``M = U diag(eigenvalues) U^-1`` with conditioning diagnostics.

    Columns of ``vectors`` are unit-norm right eigenvectors whose first
    non-negligible component is real and positive.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray
    inverse: np.ndarray
    cond: float
    residual: float

    @property
    def size(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.eigenvalues) @ self.inverse


def _normalize_columns(U):
    U = U / np.linalg.norm(U, axis=0)
    for k in range(U.shape[1]):
        col = U[:, k]
        # first component that is not roundoff noise fixes the phase
        lead = np.flatnonzero(np.abs(col) > 1e-8)[0]
        U[:, k] = col * (abs(col[lead]) / col[lead])
    return U


def eigendecompose(M, tol: float = DEFAULT_TOL,
                   cond_max: float = DEFAULT_COND_MAX) -> SpectralDecomposition:
    """Diagonalize ``M``.

    Eigenvalues are sorted by real part, then imaginary part.

    Parameters
    ----------
    M : array_like
        Square complex matrix with finite entries.
    tol : float
        Relative reconstruction tolerance, ``||U L U^-1 - M|| <= tol ||M||``
        (Frobenius norms).
    cond_max : float
        Ceiling on the 2-norm condition number of ``U``.

    Raises
    ------
    NonDiagonalizableError
        If ``cond(U) > cond_max`` or the reconstruction residual exceeds
        ``tol``; both signal a defective or nearly defective ``M``.
    """
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"M must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("M must have finite entries")

    lam, U = np.linalg.eig(M)
    order = np.lexsort((lam.imag, lam.real))
    lam = lam[order]
    U = _normalize_columns(U[:, order])

    cond = float(np.linalg.cond(U))
    if not np.isfinite(cond) or cond > cond_max:
        raise NonDiagonalizableError(
            f"eigenvector matrix condition number {cond:.3g} exceeds ceiling {cond_max:.3g}")
    U_inv = np.linalg.inv(U)
    residual = float(np.linalg.norm((U * lam) @ U_inv - M))
    if residual > tol * np.linalg.norm(M):
        raise NonDiagonalizableError(
            f"reconstruction residual {residual:.3g} exceeds {tol:g} * ||M||")

    for a in (lam, U, U_inv):
        a.setflags(write=False)
    return SpectralDecomposition(lam, U, U_inv, cond, residual)


def propagator(decomp: SpectralDecomposition, t: float) -> np.ndarray:
    """``exp(-M t) = U diag(exp(-lambda t)) U^-1`` for ``t >= 0``."""
    if t < 0:
        raise ValueError("propagator requires t >= 0")
    return (decomp.vectors * np.exp(-decomp.eigenvalues * t)) @ decomp.inverse
