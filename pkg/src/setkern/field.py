"""Mean-zero Gaussian fields indexed by sets, and their stochastic integrals.

A finite family of sets determines a Gaussian vector whose covariance is the
kernel's Gram matrix; draws come from a PSD factor of that Gram.  Stochastic
integrals of simple functions are linear combinations of field coordinates,
and their second moments are checked against the exact values supplied by a
factorization (the isometry identity: mean square of the integral equals the
weighted-L2 norm squared of the transformed integrand).

Sampling is reproducible and embarrassingly parallel: normals are produced by
a counter-based generator keyed on ``(seed, chunk index)`` with a fixed chunk
size, and Monte Carlo reductions always combine chunk partials in index
order, so results are bit-identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, InvalidCovarianceError, OrderingError, UnsupportedFunctionError
from .factorization import Factorization
from .kernels import GramMatrix, SetKernel, gram
from .measure import MeasurableSet, Partition, SimpleFunction, is_partition, is_refinement

__all__ = [
    "FieldSampler",
    "ItoResult",
    "build_sampler",
    "ito_integral",
    "ito_isometry_check",
    "cross_moment_check",
    "projection_second_moment",
    "refinement_sweep",
    "CHUNK_SIZE",
]

CHUNK_SIZE = 8192


def _chunk_normals(seed: int, chunk: int, rows: int, cols: int) -> np.ndarray:
    bitgen = np.random.Philox(key=np.array([seed, chunk], dtype=np.uint64))
    return np.random.Generator(bitgen).standard_normal((rows, cols))


@dataclass(frozen=True, eq=False)
class FieldSampler:
    """Sampler for the Gaussian vector of a finite set family.

    ``factor`` is a (possibly rank-deficient) matrix with
    ``factor @ factor.T`` equal to the Gram within roundoff.  Instances are
    immutable; sampling is pure given ``(seed, n)``.
    """

    family: tuple[MeasurableSet, ...]
    gram: GramMatrix
    factor: np.ndarray
    seed: int

    @property
    def rank(self) -> int:
        return self.factor.shape[1]

    def index_of(self, A: MeasurableSet) -> int:
        try:
            return self.family.index(A)
        except ValueError:
            raise UnsupportedFunctionError(f"set {A} is not in the sampler family") from None

    def sample(self, n: int, workers: int = 1) -> np.ndarray:
        """Draw ``n`` i.i.d. field vectors, shape ``(n, len(family))``.

        Identical output for any ``workers`` value and across runs with the
        same seed.
        """
        m = len(self.family)
        out = np.empty((n, m))
        starts = range(0, n, CHUNK_SIZE)

        def fill(start: int) -> None:
            count = min(CHUNK_SIZE, n - start)
            z = _chunk_normals(self.seed, start // CHUNK_SIZE, count, self.rank)
            out[start : start + count] = z @ self.factor.T

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(fill, starts))
        else:
            for start in starts:
                fill(start)
        return out


def build_sampler(
    kernel: SetKernel, family: Sequence[MeasurableSet], seed: int, *, tol: float = 1e-10
) -> FieldSampler:
    """Factor the Gram of ``family`` for sampling.

    Uses a symmetric eigendecomposition, dropping eigenvalues below
    ``1e-12`` of the largest (rank deficiency is expected, e.g. for the
    product kernel).  An eigenvalue below ``-tol`` relative to the largest
    means the Gram is indefinite and ``InvalidCovarianceError`` is raised.
    """
    family = tuple(family)
    g = gram(kernel, family)
    if len(family) == 0:
        return FieldSampler(family=family, gram=g, factor=np.zeros((0, 0)), seed=int(seed))
    lam, U = np.linalg.eigh(g.entries)
    lmax = max(float(lam.max()), 0.0)
    if float(lam.min()) < -tol * max(lmax, 1.0):
        raise InvalidCovarianceError(
            f"Gram matrix is indefinite: eigenvalue {lam.min():.3e} with top {lmax:.3e}"
        )
    order = np.argsort(lam)[::-1]
    keep = order[lam[order] > 1e-12 * lmax] if lmax > 0 else order[:0]
    L = U[:, keep] * np.sqrt(lam[keep])
    return FieldSampler(family=family, gram=g, factor=L, seed=int(seed))


def _coefficients(phi: SimpleFunction, sampler: FieldSampler) -> np.ndarray:
    alpha = np.zeros(len(sampler.family))
    for coef, s in phi.terms:
        alpha[sampler.index_of(s)] += coef
    return alpha


def ito_integral(sampler: FieldSampler, phi: SimpleFunction, draw: np.ndarray) -> float:
    """Integral of a simple function against one field draw.

    ``phi`` must be supported on the sampler family; the value is the
    coefficient-weighted sum of the draw's coordinates.
    """
    draw = np.asarray(draw, dtype=float)
    if draw.shape != (len(sampler.family),):
        raise DomainError("draw length must match the sampler family")
    return float(_coefficients(phi, sampler) @ draw)


@dataclass(frozen=True)
class ItoResult:
    """Monte Carlo second moment against its exact counterpart."""

    estimate: float
    std_error: float
    n_samples: int
    exact: float

    @property
    def deviation_sigmas(self) -> float:
        dev = abs(self.estimate - self.exact)
        if self.std_error == 0.0:
            return 0.0 if dev == 0.0 else float("inf")
        return dev / self.std_error

    def within(self, n_sigma: float = 5.0) -> bool:
        return abs(self.estimate - self.exact) <= n_sigma * self.std_error


def _mc_product_moment(
    sampler: FieldSampler, alpha: np.ndarray, beta: np.ndarray, n: int, workers: int
) -> tuple[float, float]:
    """Mean and standard error of ``Z_alpha * Z_beta`` over ``n`` draws."""
    L = sampler.factor
    starts = list(range(0, n, CHUNK_SIZE))

    def partial(start: int) -> tuple[float, float]:
        count = min(CHUNK_SIZE, n - start)
        z = _chunk_normals(sampler.seed, start // CHUNK_SIZE, count, sampler.rank)
        W = z @ L.T
        vals = (W @ alpha) * (W @ beta)
        return float(np.sum(vals)), float(np.sum(vals * vals))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(partial, starts))
    else:
        partials = [partial(s) for s in starts]
    # Fixed-order reduction keeps results independent of the worker count.
    s1 = 0.0
    s2 = 0.0
    for a, b in partials:
        s1 += a
        s2 += b
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0) * (n / (n - 1)) if n > 1 else 0.0
    return mean, float(np.sqrt(var / n))


def ito_isometry_check(
    kernel: SetKernel,
    factorization: Factorization,
    phi: SimpleFunction,
    n: int,
    *,
    seed: int = 0,
    workers: int = 1,
) -> ItoResult:
    """Monte Carlo check of the integral's second moment.

    Estimates the mean square of the integral of ``phi`` over ``n`` draws
    and compares with the exact value, the weighted-L2 norm squared of the
    transformed integrand.
    """
    sampler = build_sampler(kernel, phi.sets(), seed)
    alpha = _coefficients(phi, sampler)
    exact = factorization.s_norm_squared(phi)
    estimate, se = _mc_product_moment(sampler, alpha, alpha, n, workers)
    return ItoResult(estimate=estimate, std_error=se, n_samples=n, exact=exact)


def cross_moment_check(
    kernel: SetKernel,
    factorization: Factorization,
    phi: SimpleFunction,
    psi: SimpleFunction,
    n: int,
    *,
    seed: int = 0,
    workers: int = 1,
) -> ItoResult:
    """Monte Carlo check of the covariance of two integrals.

    The exact value is the weighted-L2 pairing of the two transformed
    integrands.
    """
    family: list[MeasurableSet] = []
    for s in phi.sets() + psi.sets():
        if s not in family:
            family.append(s)
    sampler = build_sampler(kernel, family, seed)
    alpha = _coefficients(phi, sampler)
    beta = _coefficients(psi, sampler)
    space = factorization.space
    exact = space.inner(factorization.apply_S(phi), factorization.apply_S(psi))
    estimate, se = _mc_product_moment(sampler, alpha, beta, n, workers)
    return ItoResult(estimate=estimate, std_error=se, n_samples=n, exact=exact)


def projection_second_moment(
    kernel: SetKernel,
    factorization: Factorization,
    phi: SimpleFunction,
    partition: Partition,
    *,
    rcond: float = 1e-10,
) -> float:
    """Second moment of the integral's projection onto a partition's span.

    Projects (in mean-square) the integral of ``phi`` onto the span of the
    field values of the partition blocks: with ``c_i`` the pairing of the
    transformed integrand with each transformed block indicator and ``G`` the
    block Gram, the value is ``c^T G^+ c``.  Singular Grams are handled by a
    pseudo-inverse with relative cutoff ``rcond``.
    """
    space = factorization.space
    if not is_partition(space, partition.blocks):
        raise DomainError("blocks do not partition the space")
    Sphi = factorization.apply_S(phi)
    c = np.array([space.inner(Sphi, factorization.k(b)) for b in partition.blocks])
    G = gram(kernel, partition.blocks).entries
    return float(c @ np.linalg.pinv(G, rcond=rcond) @ c)


def refinement_sweep(
    kernel: SetKernel,
    factorization: Factorization,
    phi: SimpleFunction,
    partitions: Sequence[Partition],
) -> list[float]:
    """Projection second moments along a refinement-ordered partition chain.

    The sequence is nondecreasing and bounded by the exact second moment; it
    attains it when the finest partition separates all atoms where the
    transformed integrand varies (in particular on the singleton partition).

    Raises
    ------
    OrderingError
        If some partition does not refine its predecessor.
    """
    parts = list(partitions)
    for i in range(len(parts) - 1):
        if not is_refinement(parts[i], parts[i + 1]):
            raise OrderingError(f"partition {i + 1} does not refine partition {i}")
    return [projection_second_moment(kernel, factorization, phi, p) for p in parts]
