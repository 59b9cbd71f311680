"""Shared dense-matrix helpers for symmetric PSD inputs.

All routines work on plain float64 ndarrays and are deterministic for
identical inputs: eigendecompositions go through LAPACK ``syevd`` via
``numpy.linalg.eigh`` and every sign/ordering ambiguity is fixed explicitly
by the callers that need it.
"""

from __future__ import annotations

import numpy as np


class SingularMatrixError(ValueError):
    """Raised when a matrix is singular beyond the regularization floor."""

    def __init__(self, name: str, detail: str = ""):
        self.name = name
        msg = f"matrix '{name}' is singular beyond the regularization floor"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


def default_floor(m: np.ndarray) -> float:
    """Eigenvalue floor scaled to the matrix: max(1e-12, 1e-10 * trace/N)."""
    n = m.shape[0]
    return max(1e-12, 1e-10 * float(np.trace(m)) / n)


def check_symmetric(m: np.ndarray, name: str, tol: float = 1e-10) -> None:
    """Raise ValueError if ``m`` is not square-symmetric within ``tol``.

    The tolerance is absolute for unit-scale matrices and scales with the
    matrix magnitude for larger ones.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix '{name}' must be square, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
    if float(np.max(np.abs(m - m.T))) > tol * scale:
        raise ValueError(f"matrix '{name}' is not symmetric within {tol:g}")


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Average away round-off asymmetry."""
    return 0.5 * (m + m.T)


def sym_inverse(m: np.ndarray, name: str, floor: float | None = None) -> np.ndarray:
    """Inverse of a symmetric PSD matrix via eigendecomposition.

    Eigenvalues below the floor are raised to it before inversion so that
    near-singular day matrices do not abort rolling runs.  A matrix with no
    usable spectrum (all eigenvalues at or below zero, or non-finite
    entries) raises :class:`SingularMatrixError` naming the offender.
    """
    m = np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise SingularMatrixError(name, "non-finite entries")
    if floor is None:
        floor = default_floor(m)
    lam, vec = np.linalg.eigh(symmetrize(m))
    if lam[-1] <= 0.0:
        raise SingularMatrixError(name, "no positive eigenvalues")
    lam = np.maximum(lam, floor)
    inv = (vec / lam) @ vec.T
    return symmetrize(inv)


def floor_psd(m: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """Project a symmetric matrix to the PSD cone by clipping eigenvalues."""
    lam, vec = np.linalg.eigh(symmetrize(m))
    if lam[0] >= floor:
        return symmetrize(np.asarray(m, dtype=np.float64))
    lam = np.maximum(lam, floor)
    return symmetrize((vec * lam) @ vec.T)


def min_eigenvalue(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(symmetrize(m))[0])
