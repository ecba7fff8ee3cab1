"""Linear algebra in the weighted L2 geometry.

An atom matrix ``M`` acts on atom vectors.  With ``D`` the diagonal of atom
weights, ``M`` is nu-selfadjoint when ``D M`` is symmetric, and nu-PSD when
its similarity transform ``D^{1/2} M D^{-1/2}`` is PSD.  Null atoms (zero
weight) are excluded from the geometry: spectral transforms act on the
positive-weight block and return matrices with zero rows and columns at null
atoms.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import NotPositiveError

__all__ = [
    "selfadjoint_defect",
    "symmetrized",
    "spectral_transform",
    "psd_sqrt",
    "numerical_rank",
]


def selfadjoint_defect(M: np.ndarray, weights: np.ndarray) -> float:
    """Largest violation of ``w(x) M[x,y] == w(y) M[y,x]``."""
    WM = weights[:, None] * np.asarray(M, dtype=float)
    return float(np.abs(WM - WM.T).max())


def symmetrized(M: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Similarity transform to a symmetric matrix on the positive-weight block.

    Returns ``(Ms, pos)`` where ``pos`` is the positive-weight mask and
    ``Ms = D^{1/2} M D^{-1/2}`` restricted to ``pos``, averaged with its
    transpose to remove roundoff asymmetry.
    """
    weights = np.asarray(weights, dtype=float)
    pos = weights > 0
    d = np.sqrt(weights[pos])
    Mp = np.asarray(M, dtype=float)[np.ix_(pos, pos)]
    Ms = (d[:, None] * Mp) / d[None, :]
    return 0.5 * (Ms + Ms.T), pos


def spectral_transform(
    M: np.ndarray, weights: np.ndarray, fn: Callable[[np.ndarray], np.ndarray]
) -> np.ndarray:
    """Apply ``fn`` to the spectrum of a nu-selfadjoint matrix.

    ``fn`` receives the eigenvalue array of the symmetrized positive block and
    returns transformed eigenvalues (it may raise to reject a spectrum).  The
    result is mapped back to an atom matrix with zero rows and columns at null
    atoms.
    """
    M = np.asarray(M, dtype=float)
    Ms, pos = symmetrized(M, weights)
    lam, U = np.linalg.eigh(Ms)
    vals = np.asarray(fn(lam), dtype=float)
    Rs = (U * vals) @ U.T
    d = np.sqrt(np.asarray(weights, dtype=float)[pos])
    Rp = (Rs / d[:, None]) * d[None, :]
    out = np.zeros_like(M)
    out[np.ix_(pos, pos)] = Rp
    return out


def psd_sqrt(
    M: np.ndarray,
    weights: np.ndarray,
    *,
    clamp: float = 1e-12,
    reject: float = 1e-8,
) -> np.ndarray:
    """Nu-PSD square root of a nu-selfadjoint nu-PSD matrix.

    Eigenvalues below ``clamp * lambda_max`` are set to zero before taking the
    root; an eigenvalue below ``-reject * lambda_max`` means the input is
    genuinely indefinite and raises ``NotPositiveError``.
    """

    def root(lam: np.ndarray) -> np.ndarray:
        lmax = max(float(lam.max()), 0.0) if lam.size else 0.0
        if lam.size and float(lam.min()) < -reject * lmax:
            raise NotPositiveError(
                f"matrix is not positive semidefinite: eigenvalue {lam.min():.3e} "
                f"below -{reject:g} * {lmax:.3e}"
            )
        lam = np.where(lam < clamp * lmax, 0.0, lam)
        return np.sqrt(lam)

    return spectral_transform(M, weights, root)


def numerical_rank(columns: np.ndarray, *, cutoff: float = 1e-10) -> int:
    """Rank of a column stack, counting singular values above ``cutoff * s_max``."""
    columns = np.asarray(columns, dtype=float)
    if columns.size == 0:
        return 0
    s = np.linalg.svd(columns, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > cutoff * s[0]))
