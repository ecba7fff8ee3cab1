"""Realization of set-kernels as inner products in the weighted L2 space.

A kernel admits a family ``{k_A}`` of atom vectors with
``K(A, B) = <k_A, k_B>`` in the weighted pairing exactly when it charges no
null set.  The construction goes through densities: ``g(x, B) = K({x}, B) / w(x)``
assembles a nu-selfadjoint PSD operator ``T`` with ``<chi_A, T chi_B> = K(A, B)``,
and ``k_A = T^{1/2} chi_A``.  The map sending ``K(., A)`` to ``k_A`` extends to
an isometry ``b`` of the kernel's reproducing space into weighted L2; its
adjoint, Parseval expansions over orthonormal bases, and the range dimension
are all computable here.  A pushforward verifier for measure-space morphisms
rounds out the module.

Null atoms are treated as L2-equivalence classes: densities, ``T`` and every
``k_A`` vanish there.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    AbsoluteContinuityError,
    InconsistencyError,
    InvalidBasisError,
    InvalidMapError,
    NotPositiveError,
    VerificationError,
)
from .kernels import SetKernel, gram
from .linalg import numerical_rank, psd_sqrt, symmetrized
from .measure import MeasurableSet, MeasureSpace, SimpleFunction

__all__ = [
    "AbsoluteContinuityReport",
    "DensityReport",
    "Factorization",
    "RkhsElement",
    "check_absolute_continuity",
    "radon_nikodym_density",
    "build_T",
    "sqrt_T",
    "realize",
    "reverse_direction",
    "isometry_b",
    "coisometry_b_star",
    "onb_factorization",
    "b_range_dimension",
    "verify_pushforward",
    "export_factorization",
    "write_factorization",
]


@dataclass(frozen=True)
class AbsoluteContinuityReport:
    """Null sets charged by a kernel.

    ``violations`` lists each probed set ``A`` with ``w(A) == 0`` but
    ``K(A, A) > tol``; an empty list certifies the probed family.
    """

    violations: tuple[tuple[MeasurableSet, float], ...]
    probed: int
    tol: float

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class DensityReport:
    """Agreement between factorization densities and direct kernel densities."""

    max_residual: float
    checked: int
    tol: float
    absolute_continuity_ok: bool


def _null_singletons(space: MeasureSpace) -> list[MeasurableSet]:
    return [space.singleton(i) for i in range(space.size) if space.weights[i] == 0.0]


def check_absolute_continuity(
    kernel: SetKernel,
    probe_sets: Sequence[MeasurableSet] = (),
    tol: float = 1e-10,
) -> AbsoluteContinuityReport:
    """Probe whether the kernel vanishes on null sets.

    The probed family is ``probe_sets`` together with every zero-weight
    singleton.  By the Schwarz bound, ``K(A, A) == 0`` already forces
    ``K(A, B) == 0`` for every ``B``, so only diagonal values are inspected.
    """
    space = kernel.space
    family: list[MeasurableSet] = []
    for A in list(probe_sets) + _null_singletons(space):
        if A not in family:
            family.append(A)
    violations = []
    for A in family:
        if space.measure(A) == 0.0:
            value = kernel(A, A)
            if value > tol:
                violations.append((A, value))
    return AbsoluteContinuityReport(violations=tuple(violations), probed=len(family), tol=tol)


def radon_nikodym_density(kernel: SetKernel, B: MeasurableSet, *, tol: float = 1e-10) -> np.ndarray:
    """Density of ``K(., B)`` against the atom weights.

    Returns the atom vector ``g(., B)`` with ``g(x, B) = K({x}, B) / w(x)``
    on positive atoms and zero on null atoms, so that the weighted sum of
    ``g(., B)`` over any set ``A`` reconstructs ``K(A, B)``.

    Raises
    ------
    AbsoluteContinuityError
        If some null atom carries kernel mass against ``B``, in which case no
        such density exists.
    """
    space = kernel.space
    w = space.weight_array
    g = np.zeros(space.size)
    for i in range(space.size):
        value = kernel(space.singleton(i), B)
        if w[i] > 0:
            g[i] = value / w[i]
        elif abs(value) > tol:
            raise AbsoluteContinuityError(
                f"kernel charges null atom {space.atoms[i]!r} against {B}: no density exists"
            )
    return g


def build_T(kernel: SetKernel, *, tol: float = 1e-10, psd_reject: float = 1e-8) -> np.ndarray:
    """Assemble the positive operator representing the kernel on indicators.

    ``T[x, y] = K({x}, {y}) / w(x)`` on positive atoms, zero rows and columns
    on null atoms.  The result satisfies ``<chi_A, T chi_B> = K(A, B)`` in the
    weighted pairing for every pair of sets, is nu-selfadjoint by symmetry of
    the kernel, and is certified nu-PSD.

    Raises
    ------
    AbsoluteContinuityError
        If the kernel charges a null singleton.
    NotPositiveError
        If the singleton Gram is indefinite beyond ``psd_reject`` relative to
        its largest eigenvalue.
    """
    space = kernel.space
    report = check_absolute_continuity(kernel, tol=tol)
    if not report.ok:
        A, value = report.violations[0]
        raise AbsoluteContinuityError(
            f"kernel charges null set {A} with K(A,A)={value:.3e}: no realization exists"
        )
    w = space.weight_array
    pos = space.positive
    n = space.size
    singles = space.singletons()
    K_sing = np.zeros((n, n))
    idx = np.flatnonzero(pos)
    for a, i in enumerate(idx):
        for j in idx[a:]:
            v = kernel(singles[i], singles[j])
            K_sing[i, j] = v
            K_sing[j, i] = v
    # PSD certificate on the weighted-geometry symmetrization D^{-1/2} K D^{-1/2}.
    d = np.sqrt(w[idx])
    Ms = K_sing[np.ix_(idx, idx)] / d[:, None] / d[None, :]
    lam = np.linalg.eigvalsh(0.5 * (Ms + Ms.T))
    lmax = max(float(lam.max()), 0.0)
    if float(lam.min()) < -psd_reject * max(lmax, 1.0):
        raise NotPositiveError(
            f"kernel is indefinite on singletons (eigenvalue {lam.min():.3e})"
        )
    T = np.zeros((n, n))
    T[idx, :] = K_sing[idx, :] / w[idx, None]
    return T


def sqrt_T(T: np.ndarray, space: MeasureSpace) -> np.ndarray:
    """Nu-PSD square root of a nu-selfadjoint nu-PSD atom matrix.

    Computed by symmetrizing with the weight diagonal, taking a symmetric
    eigendecomposition with eigenvalues below ``1e-12 * lambda_max`` clamped
    to zero, and conjugating back.  An eigenvalue below
    ``-1e-8 * lambda_max`` raises ``NotPositiveError``.
    """
    return psd_sqrt(np.asarray(T, dtype=float), space.weight_array)


@dataclass(frozen=True, eq=False)
class Factorization:
    """A realized kernel: operator ``T``, its root ``S``, and the ``k_A`` family.

    ``S`` is the unique nu-PSD square root, so ``S @ S == T`` and
    ``k_A = S chi_A`` satisfies ``<k_A, k_B> = K(A, B)`` in the weighted
    pairing.  ``residual`` is the largest singleton-pair reconstruction error
    observed when the factorization was built.
    """

    space: MeasureSpace
    kernel: SetKernel
    T: np.ndarray
    S: np.ndarray
    residual: float

    def k(self, A: MeasurableSet) -> np.ndarray:
        """The factor vector ``k_A = S chi_A``."""
        return self.S @ self.space.indicator(A)

    def apply_S(self, phi: SimpleFunction | np.ndarray) -> np.ndarray:
        """Apply ``S`` to a simple function (or pointwise atom vector)."""
        if isinstance(phi, SimpleFunction):
            phi = phi.values(self.space.size)
        return self.S @ np.asarray(phi, dtype=float)

    def s_norm_squared(self, phi: SimpleFunction | np.ndarray) -> float:
        """Weighted L2 norm squared of ``S phi``; the exact second moment."""
        v = self.apply_S(phi)
        return self.space.inner(v, v)


def realize(kernel: SetKernel, *, tol: float = 1e-8) -> Factorization:
    """Construct the weighted-L2 realization of a kernel.

    Requires the kernel to vanish on null sets and to be PSD on singletons;
    then ``k_A = T^{1/2} chi_A`` reproduces the kernel.  The reconstruction
    is verified on all singleton pairs before returning.

    Raises
    ------
    AbsoluteContinuityError, NotPositiveError
        Propagated from the operator assembly.
    VerificationError
        If the singleton-pair reconstruction residual exceeds ``tol``.
    """
    space = kernel.space
    T = build_T(kernel)
    S = sqrt_T(T, space)
    w = space.weight_array
    # <S chi_x, S chi_y> = (S^T D S)[x, y] must equal K({x},{y}) = (D T)[x, y].
    lhs = S.T @ (w[:, None] * S)
    rhs = w[:, None] * T
    residual = float(np.abs(lhs - rhs).max())
    if residual > tol:
        raise VerificationError(
            f"factorization failed verification: singleton residual {residual:.3e} > {tol:g}"
        )
    return Factorization(space=space, kernel=kernel, T=T, S=S, residual=residual)


def reverse_direction(
    factorization: Factorization,
    sets: Sequence[MeasurableSet] | None = None,
    *,
    tol: float = 1e-9,
) -> DensityReport:
    """Recover kernel densities from a factorization and cross-check them.

    For each probe set ``B`` the factorization side computes ``T chi_B``,
    which must agree with the directly evaluated density
    ``K({x}, B) / w(x)``; agreement shows the realized kernel indeed vanishes
    on null sets and has the stated densities.

    Raises
    ------
    InconsistencyError
        If any probe residual exceeds ``tol``.
    """
    space = factorization.space
    if sets is None:
        sets = list(space.singletons()) + [space.full_set()]
    worst = 0.0
    for B in sets:
        from_factorization = factorization.T @ space.indicator(B)
        direct = radon_nikodym_density(factorization.kernel, B)
        worst = max(worst, float(np.abs(from_factorization - direct).max()))
    if worst > tol:
        raise InconsistencyError(
            f"factorization densities disagree with kernel densities: {worst:.3e} > {tol:g}"
        )
    ac = check_absolute_continuity(factorization.kernel)
    return DensityReport(
        max_residual=worst, checked=len(list(sets)), tol=tol, absolute_continuity_ok=ac.ok
    )


@dataclass(frozen=True, eq=False)
class RkhsElement:
    """Finite combination ``F = sum_i alpha_i K(., A_i)`` in the kernel's space."""

    terms: tuple[tuple[float, MeasurableSet], ...]

    def __post_init__(self):
        norm = []
        for coef, s in self.terms:
            if not isinstance(s, MeasurableSet):
                s = MeasurableSet(frozenset(s))
            norm.append((float(coef), s))
        object.__setattr__(self, "terms", tuple(norm))

    def coefficients(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms], dtype=float)

    def sets(self) -> tuple[MeasurableSet, ...]:
        return tuple(s for _, s in self.terms)

    def evaluate(self, kernel: SetKernel, A: MeasurableSet) -> float:
        """The function value ``F(A) = sum_i alpha_i K(A, A_i)``."""
        return float(sum(c * kernel(A, s) for c, s in self.terms))

    def norm_squared(self, kernel: SetKernel) -> float:
        """Reproducing-space norm squared, the Gram quadratic form."""
        if not self.terms:
            return 0.0
        alpha = self.coefficients()
        G = gram(kernel, self.sets()).entries
        return float(alpha @ G @ alpha)

    def to_simple(self) -> SimpleFunction:
        """The simple function with the same coefficients over the same sets."""
        return SimpleFunction(self.terms)


def isometry_b(factorization: Factorization, element: RkhsElement) -> np.ndarray:
    """Image of an element under the isometry into weighted L2.

    ``b`` sends ``K(., A)`` to ``k_A`` and extends linearly, so the image is
    ``S`` applied to the matching simple function; its weighted L2 norm
    equals the element's reproducing-space norm.
    """
    if not element.terms:
        return np.zeros(factorization.space.size)
    return factorization.apply_S(element.to_simple())


def coisometry_b_star(
    factorization: Factorization, phi: np.ndarray, A: MeasurableSet
) -> float:
    """Value at ``A`` of the adjoint image of an L2 vector: ``<phi, k_A>``."""
    return factorization.space.inner(np.asarray(phi, dtype=float), factorization.k(A))


def _check_onb(
    factorization: Factorization, basis: Sequence[np.ndarray], tol: float
) -> np.ndarray:
    space = factorization.space
    if len(basis) == 0:
        raise InvalidBasisError("empty basis")
    B = np.asarray([np.asarray(v, dtype=float) for v in basis])
    if B.shape[1] != space.size:
        raise InvalidBasisError("basis vectors must match the space size")
    w = space.weight_array
    G = B @ (w[:, None] * B.T)
    if float(np.abs(G - np.eye(len(basis))).max()) > tol:
        raise InvalidBasisError("family is not orthonormal in the weighted pairing")
    n_pos = int(space.positive.sum())
    scaled = B[:, space.positive] * np.sqrt(w[space.positive])[None, :]
    if numerical_rank(scaled.T) < n_pos:
        raise InvalidBasisError("basis does not span the positive-weight atoms")
    return B


def onb_factorization(
    factorization: Factorization,
    basis: Sequence[np.ndarray],
    A: MeasurableSet,
    B: MeasurableSet,
    *,
    tol: float = 1e-10,
) -> float:
    """Parseval expansion of ``K(A, B)`` through an orthonormal basis.

    Returns ``sum_n <phi_n, k_A> <k_B, phi_n>`` in the weighted pairing; for
    any complete orthonormal basis this equals ``K(A, B)``, independently of
    the basis chosen.

    Raises
    ------
    InvalidBasisError
        If the family is not orthonormal within ``tol`` or does not span the
        positive-weight atoms.
    """
    Bmat = _check_onb(factorization, basis, tol)
    w = factorization.space.weight_array
    cA = Bmat @ (w * factorization.k(A))
    cB = Bmat @ (w * factorization.k(B))
    return float(cA @ cB)


def b_range_dimension(
    factorization: Factorization,
    family: Sequence[MeasurableSet] = (),
    *,
    cutoff: float = 1e-10,
) -> int:
    """Dimension of the closed span of the ``k_A`` family in weighted L2.

    The columns are ``k_A`` for every singleton plus the requested family,
    scaled into the weighted geometry; the isometry is onto exactly when this
    equals the number of positive-weight atoms.
    """
    space = factorization.space
    sets = list(space.singletons()) + [A for A in family]
    cols = np.column_stack([factorization.k(A) for A in sets])
    scaled = np.sqrt(space.weight_array)[:, None] * cols
    return numerical_rank(scaled, cutoff=cutoff)


def verify_pushforward(
    source: MeasureSpace,
    target: MeasureSpace,
    mapping: Mapping[int, int] | Sequence[int],
    *,
    tol: float = 1e-12,
) -> bool:
    """Check that an atom map transports the source weights onto the target.

    ``mapping`` sends every source atom index to a target atom index; the
    check passes iff for each target atom the total mapped source mass equals
    its weight within ``tol``.

    Raises
    ------
    InvalidMapError
        If some source atom is unmapped or a target index is out of range.
    """
    if isinstance(mapping, Mapping):
        images = [mapping.get(i) for i in range(source.size)]
    else:
        images = list(mapping)
        if len(images) < source.size:
            images += [None] * (source.size - len(images))
    pushed = np.zeros(target.size)
    for i in range(source.size):
        y = images[i] if i < len(images) else None
        if y is None:
            raise InvalidMapError(f"source atom {source.atoms[i]!r} is unmapped")
        y = int(y)
        if not 0 <= y < target.size:
            raise InvalidMapError(f"target index {y} out of range for {source.atoms[i]!r}")
        pushed[y] += source.weights[i]
    return bool(np.abs(pushed - target.weight_array).max() <= tol)


def export_factorization(
    factorization: Factorization, family: Sequence[MeasurableSet] = ()
) -> dict:
    """Serializable view of a factorization: atoms, weights, ``T``, k-vectors.

    The k-vectors cover every singleton plus the requested family, each keyed
    by the atom names of its set.
    """
    space = factorization.space
    sets = list(space.singletons())
    for A in family:
        if A not in sets:
            sets.append(A)
    return {
        "atoms": list(space.atoms),
        "weights": [float(w) for w in space.weights],
        "T": [[float(v) for v in row] for row in factorization.T],
        "k": [
            {
                "set": [space.atoms[i] for i in A.indices],
                "vector": [float(v) for v in factorization.k(A)],
            }
            for A in sets
        ],
    }


def write_factorization(
    factorization: Factorization, path: str | Path, family: Sequence[MeasurableSet] = ()
) -> None:
    """Write the JSON export with stable ordering."""
    data = export_factorization(factorization, family)
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
