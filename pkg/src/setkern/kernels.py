"""Symmetric kernels indexed by pairs of measurable sets.

The builtin kernels are biadditive over disjoint unions and arise from an
atom matrix ``M`` through ``K(A, B) = sum_{x in A, y in B} w(x) M[x, y]``:
the overlap (Wiener) kernel uses the identity, operator-induced kernels a
user matrix, and Green kernels the fundamental matrix of a transient chain.
The product kernel ``w(A) w(B)`` and arbitrary callables (used to build
counterexamples) are also supported.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidOperatorError
from .linalg import selfadjoint_defect, symmetrized
from .measure import MeasurableSet, MeasureSpace

__all__ = [
    "SetKernel",
    "GramMatrix",
    "wiener_kernel",
    "rank_one_kernel",
    "operator_kernel",
    "counting_kernel",
    "gram",
    "check_positive_definite",
    "schwarz_check",
]

Evaluator = Callable[[MeasurableSet, MeasurableSet], float]


@dataclass(frozen=True, eq=False)
class SetKernel:
    """A real symmetric kernel on pairs of finite-measure sets.

    ``matrix`` is the inducing atom matrix when the kernel is operator- or
    Green-induced, and ``None`` otherwise.  Evaluation is pure; instances are
    immutable and safe to share.
    """

    space: MeasureSpace
    kind: str
    evaluator: Evaluator
    matrix: np.ndarray | None = None

    def __call__(self, A: MeasurableSet, B: MeasurableSet) -> float:
        self.space.validate_set(A)
        self.space.validate_set(B)
        return float(self.evaluator(A, B))

    @classmethod
    def from_callable(cls, space: MeasureSpace, fn: Evaluator, kind: str = "custom") -> "SetKernel":
        """Wrap an arbitrary symmetric evaluator (mainly for tests)."""
        return cls(space=space, kind=kind, evaluator=fn)


def wiener_kernel(space: MeasureSpace) -> SetKernel:
    """Overlap kernel ``K(A, B) = w(A & B)``, the white-noise covariance."""
    return SetKernel(space=space, kind="wiener", evaluator=lambda A, B: space.measure(A & B))


def rank_one_kernel(space: MeasureSpace) -> SetKernel:
    """Product kernel ``K(A, B) = w(A) w(B)``; its Gram matrices have rank one."""
    return SetKernel(
        space=space, kind="rank_one", evaluator=lambda A, B: space.measure(A) * space.measure(B)
    )


def counting_kernel(space: MeasureSpace) -> SetKernel:
    """Cardinality kernel ``K(A, B) = |A & B|``.

    Positive definite, but it ignores the weights: on a space with a null
    atom it charges a null set and therefore admits no weighted-L2
    realization.  Kept as the standard counterexample.
    """
    return SetKernel(space=space, kind="counting", evaluator=lambda A, B: float(len(A & B)))


def operator_kernel(space: MeasureSpace, M: np.ndarray, *, tol: float = 1e-10) -> SetKernel:
    """Kernel induced by a nu-selfadjoint, nu-PSD atom matrix.

    ``K(A, B) = <chi_A, M chi_B>`` in the weighted L2 pairing, i.e. the
    double sum of ``w(x) M[x, y]`` over ``x in A, y in B``.

    Raises
    ------
    InvalidOperatorError
        If ``M`` has the wrong shape, violates the weighted symmetry
        ``w(x) M[x,y] == w(y) M[y,x]`` beyond ``tol``, or is indefinite
        beyond ``tol`` relative to its largest eigenvalue.
    """
    M = np.asarray(M, dtype=float)
    n = space.size
    if M.shape != (n, n):
        raise InvalidOperatorError(f"operator matrix must be {n}x{n}, got {M.shape}")
    w = space.weight_array
    defect = selfadjoint_defect(M, w)
    scale = max(1.0, float(np.abs(w[:, None] * M).max()))
    if defect > tol * scale:
        raise InvalidOperatorError(
            f"matrix is not selfadjoint in the weighted geometry (defect {defect:.3e})"
        )
    Ms, _ = symmetrized(M, w)
    lam = np.linalg.eigvalsh(Ms)
    lmax = max(float(lam.max()), 0.0)
    if float(lam.min()) < -tol * max(lmax, 1.0):
        raise InvalidOperatorError(
            f"matrix is indefinite (eigenvalue {lam.min():.3e}) and induces no valid kernel"
        )
    WM = w[:, None] * M

    def evaluate(A: MeasurableSet, B: MeasurableSet) -> float:
        if not A.members or not B.members:
            return 0.0
        return float(WM[np.ix_(A.indices, B.indices)].sum())

    return SetKernel(space=space, kind="operator", evaluator=evaluate, matrix=M)


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Kernel values over a finite family of sets, symmetrized by construction."""

    sets: tuple[MeasurableSet, ...]
    entries: np.ndarray

    def eigenvalues(self) -> np.ndarray:
        if self.entries.size == 0:
            return np.zeros(0)
        return np.linalg.eigvalsh(self.entries)

    @property
    def min_eigenvalue(self) -> float:
        ev = self.eigenvalues()
        return float(ev.min()) if ev.size else 0.0


def gram(kernel: SetKernel, sets: Sequence[MeasurableSet]) -> GramMatrix:
    """Evaluate the kernel pairwise over ``sets``."""
    sets = tuple(sets)
    m = len(sets)
    entries = np.zeros((m, m))
    for i in range(m):
        for j in range(i, m):
            v = kernel(sets[i], sets[j])
            entries[i, j] = v
            entries[j, i] = v
    return GramMatrix(sets=sets, entries=entries)


def check_positive_definite(
    kernel: SetKernel, sets: Sequence[MeasurableSet], tol: float = 1e-10
) -> bool:
    """Certify the quadratic form on ``sets`` is nonnegative.

    Passes iff the smallest Gram eigenvalue is at least ``-tol`` relative to
    the Gram trace (absolute when the trace is below one).  For biadditive
    kernels the singleton family is decisive, so callers typically include
    the singletons alongside the sets of interest.
    """
    g = gram(kernel, sets)
    if g.entries.size == 0:
        return True
    scale = max(1.0, abs(float(np.trace(g.entries))))
    return g.min_eigenvalue >= -tol * scale


def schwarz_check(
    kernel: SetKernel, A: MeasurableSet, B: MeasurableSet, tol: float = 1e-10
) -> bool:
    """Check ``K(A,B)^2 <= K(A,A) K(B,B) + tol``.

    This is the Cauchy-Schwarz bound in the kernel's reproducing geometry;
    in particular a set with ``K(A,A) == 0`` cannot pair with anything.
    """
    return kernel(A, B) ** 2 <= kernel(A, A) * kernel(B, B) + tol
