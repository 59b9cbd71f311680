"""Conditional decomposition A = H B H' for symmetric PSD pairs.

Given two symmetric positive semidefinite matrices A and B of the same size,
build H from their paired eigendecompositions:

    A = Ua diag(la) Ua',   B = Ub diag(lb) Ub',
    H = Ua diag(sqrt(la / lb)) Ub'

so that H B H' reproduces A exactly up to round-off (the diagonal middle
factor satisfies R lb R = la by construction, independent of how the
eigenvector bases pair up).  Both spectra are sorted descending and each
eigenvector's largest-magnitude entry is made positive, which pins a unique,
deterministic H; in particular A == B yields H == I.

Eigenvalues of B below a floor are raised to it so the middle factor stays
finite; the result is then flagged as regularized and the reconstruction
residual reports how much fidelity was lost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import check_symmetric, default_floor, symmetrize


@dataclass(frozen=True)
class CondSvdResult:
    """Solution of A = H B H' with its diagnostics.

    residual is the relative Frobenius reconstruction error
    ||H B H' - A||_F / ||A||_F; it exceeds the usual round-off level only
    when eigenvalues of B had to be floored (regularized is then True).
    """

    h: np.ndarray
    residual: float
    regularized: bool
    floor_used: float


def _signed_descending_eigh(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition with descending eigenvalues and fixed vector signs.

    The entry of largest magnitude in each eigenvector is made positive
    (first such entry on exact ties), removing the sign ambiguity so the
    output is a pure function of the input.
    """
    lam, vec = np.linalg.eigh(symmetrize(m))
    # stable sort keeps the eigensolver's order among tied eigenvalues
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    vec = vec[:, order]
    for j in range(vec.shape[1]):
        k = int(np.argmax(np.abs(vec[:, j])))
        if vec[k, j] < 0.0:
            vec[:, j] = -vec[:, j]
    return lam, vec


def conditional_svd(
    a: np.ndarray,
    b: np.ndarray,
    floor: float | None = None,
) -> CondSvdResult:
    """Solve A = H B H' for H.

    Parameters
    ----------
    a, b : symmetric PSD matrices of equal shape.  Symmetry is enforced to
        1e-10 (relative to the matrix magnitude); eigenvalues may dip to
        -1e-10 from round-off and are clipped to zero.
    floor : replacement value for eigenvalues of ``b`` below it.  Defaults
        to ``max(1e-12, 1e-10 * trace(b)/n)``.

    Raises
    ------
    ValueError : on dimension mismatch or asymmetry beyond tolerance.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    check_symmetric(a, "A")
    check_symmetric(b, "B")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: A is {a.shape}, B is {b.shape}")
    if floor is None:
        floor = default_floor(b)

    lam_a, vec_a = _signed_descending_eigh(a)
    lam_b, vec_b = _signed_descending_eigh(b)

    neg_tol_a = 1e-10 * max(1.0, abs(float(lam_a[0])))
    neg_tol_b = 1e-10 * max(1.0, abs(float(lam_b[0])))
    if lam_a[-1] < -neg_tol_a:
        raise ValueError(f"A is not PSD: smallest eigenvalue {lam_a[-1]:.3e}")
    if lam_b[-1] < -neg_tol_b:
        raise ValueError(f"B is not PSD: smallest eigenvalue {lam_b[-1]:.3e}")
    lam_a = np.maximum(lam_a, 0.0)
    lam_b = np.maximum(lam_b, 0.0)

    regularized = bool(np.any(lam_b < floor))
    lam_b_used = np.maximum(lam_b, floor)

    middle = np.sqrt(lam_a / lam_b_used)
    h = (vec_a * middle) @ vec_b.T

    hbht = h @ b @ h.T
    denom = float(np.linalg.norm(a))
    residual = float(np.linalg.norm(hbht - a)) / max(denom, np.finfo(np.float64).tiny)

    return CondSvdResult(h=h, residual=residual, regularized=regularized, floor_used=floor)
