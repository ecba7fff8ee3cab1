"""Reversible substochastic chains on the atom space and their Green kernels.

Rows of the transition matrix may sum to less than one; the deficit is
killing (absorption) mass, which is what makes a finite chain transient.
Reversible chains are exactly random walks on weighted graphs: given edge
conductances ``c(x, y)`` and killing ``kill(x)``, the reference weights are
``w(x) = sum_y c(x, y) + kill(x)`` and ``P[x, y] = c(x, y) / w(x)``, so
detailed balance holds by construction.

Transience is certified spectrally: the largest weighted singular value of
``P`` must stay below one, which makes the Green series
``G = I + P + P^2 + ...`` geometrically convergent.  ``G`` is computed by a
direct solve of ``(I - P) G = I`` (authoritative) and cross-validated against
the truncated series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InconsistencyError, InvalidChainError, NotTransientError
from .kernels import SetKernel
from .linalg import spectral_transform, symmetrized
from .measure import MeasurableSet, MeasureSpace

__all__ = [
    "MarkovChain",
    "GreenData",
    "reversibility_defect",
    "check_reversibility",
    "check_transient",
    "green",
    "green_kernel",
    "green_root",
    "k_from_green",
    "contractivity_check",
    "spectral_gap",
]

TRANSIENCE_GAP = 1e-10


@dataclass(frozen=True, eq=False)
class MarkovChain:
    """A substochastic transition matrix over the atoms of a measure space.

    All atom weights must be strictly positive: the weights are the
    reversing measure, and an atom without mass has no dynamics.
    """

    space: MeasureSpace
    transitions: np.ndarray

    def __post_init__(self):
        P = np.array(self.transitions, dtype=float)
        P.setflags(write=False)
        object.__setattr__(self, "transitions", P)
        n = self.space.size
        if P.shape != (n, n):
            raise InvalidChainError(f"transition matrix must be {n}x{n}, got {P.shape}")
        if not np.all(np.isfinite(P)):
            raise InvalidChainError("transition entries must be finite")
        if P.min() < 0:
            raise InvalidChainError("transition entries must be nonnegative")
        rows = P.sum(axis=1)
        if rows.max() > 1 + 1e-12:
            raise InvalidChainError(
                f"rows must sum to at most 1 (substochastic), got {rows.max():.6g}"
            )
        if not np.all(self.space.weight_array > 0):
            raise InvalidChainError("chains require strictly positive atom weights")

    @classmethod
    def from_conductances(
        cls,
        atoms: Sequence[str],
        edges: Iterable[tuple[str, str, float]],
        kill: Mapping[str, float] | Sequence[float] | None = None,
    ) -> "MarkovChain":
        """Random walk on a weighted graph with optional per-atom killing.

        Edge conductances are symmetric by construction, the derived weights
        are ``w(x) = sum_y c(x, y) + kill(x)``, and every atom needs an edge
        or killing mass so its weight is positive.
        """
        atoms = [str(a) for a in atoms]
        index = {a: i for i, a in enumerate(atoms)}
        n = len(atoms)
        if n == 0:
            raise InvalidChainError("need at least one atom")
        C = np.zeros((n, n))
        for x, y, c in edges:
            c = float(c)
            if c < 0:
                raise InvalidChainError(f"conductance must be nonnegative, got {c} on ({x},{y})")
            try:
                i, j = index[str(x)], index[str(y)]
            except KeyError as e:
                raise InvalidChainError(f"edge references unknown atom {e.args[0]!r}") from None
            C[i, j] += c
            if i != j:
                C[j, i] += c
        killv = np.zeros(n)
        if isinstance(kill, Mapping):
            for a, m in kill.items():
                if str(a) not in index:
                    raise InvalidChainError(f"killing references unknown atom {a!r}")
                killv[index[str(a)]] = float(m)
        elif kill is not None:
            killv = np.asarray(list(kill), dtype=float)
            if killv.shape != (n,):
                raise InvalidChainError("killing sequence must have one entry per atom")
        if killv.min() < 0:
            raise InvalidChainError("killing mass must be nonnegative")
        w = C.sum(axis=1) + killv
        if w.min() <= 0:
            dead = atoms[int(np.argmin(w))]
            raise InvalidChainError(f"atom {dead!r} has neither conductance nor killing")
        P = C / w[:, None]
        return cls(space=MeasureSpace(tuple(atoms), tuple(w)), transitions=P)


def reversibility_defect(chain: MarkovChain) -> float:
    """Largest violation of detailed balance ``w(x) P[x,y] == w(y) P[y,x]``."""
    WP = chain.space.weight_array[:, None] * chain.transitions
    return float(np.abs(WP - WP.T).max())


def check_reversibility(chain: MarkovChain, tol: float = 1e-10) -> bool:
    """True iff detailed balance holds within ``tol``.

    The atom-level identity integrates to the set-level balance
    ``sum_A w P(., B) == sum_B w P(., A)`` by biadditivity.
    """
    return reversibility_defect(chain) <= tol


def _symmetric_spectrum(chain: MarkovChain) -> np.ndarray:
    Ms, _ = symmetrized(chain.transitions, chain.space.weight_array)
    return np.linalg.eigvalsh(Ms)


def check_transient(chain: MarkovChain) -> float:
    """Spectral certificate of transience.

    Returns the largest weighted singular value ``rho`` of the transition
    matrix (for a reversible chain, the largest absolute eigenvalue of its
    symmetrization).  Transience requires ``rho < 1 - 1e-10``, which gives
    the Green series a geometric tail bound; otherwise ``NotTransientError``
    is raised.
    """
    lam = _symmetric_spectrum(chain)
    rho = float(np.abs(lam).max())
    if rho >= 1 - TRANSIENCE_GAP:
        raise NotTransientError(
            f"chain is not transient: spectral bound {rho:.12g} reaches 1", spectral_bound=rho
        )
    return rho


@dataclass(frozen=True, eq=False)
class GreenData:
    """Green function of a transient chain with its convergence certificate."""

    G: np.ndarray
    spectral_bound: float
    series_terms: int
    series_agreement: float


def _neumann_sum(P: np.ndarray, terms: int) -> np.ndarray:
    # Partial sum I + P + ... + P^(k-1) with k the next power of two >= terms,
    # via the doubling identity S_{2k} = S_k + P^k S_k.
    n = P.shape[0]
    S = np.eye(n)
    Q = P.copy()
    k = 1
    while k < terms:
        S = S + Q @ S
        Q = Q @ Q
        k *= 2
    return S


def green(chain: MarkovChain, *, series_tol: float = 1e-10, agree_tol: float = 1e-8) -> GreenData:
    """Green function ``G = (I - P)^{-1}``, cross-validated against the series.

    The solve is authoritative (one step of iterative refinement is applied);
    the truncated series uses enough terms for a ``series_tol`` geometric
    tail, and the two must agree entrywise within ``agree_tol``.

    Raises
    ------
    NotTransientError
        If the spectral bound reaches one.
    InconsistencyError
        If solve and series disagree beyond ``agree_tol``.
    """
    rho = check_transient(chain)
    P = chain.transitions
    n = P.shape[0]
    A = np.eye(n) - P
    G = np.linalg.solve(A, np.eye(n))
    G = G + np.linalg.solve(A, np.eye(n) - A @ G)
    if rho == 0.0:
        terms = 1
    else:
        terms = max(1, math.ceil(math.log(series_tol * (1 - rho)) / math.log(rho)))
    S = _neumann_sum(P, terms)
    agreement = float(np.abs(S - G).max())
    if agreement > agree_tol:
        raise InconsistencyError(
            f"Green series and solve disagree: {agreement:.3e} > {agree_tol:g}"
        )
    return GreenData(G=G, spectral_bound=rho, series_terms=terms, series_agreement=agreement)


def green_kernel(chain: MarkovChain, *, balance_tol: float = 1e-10) -> SetKernel:
    """Kernel ``K(A, B) = sum_{x in A} w(x) G(x, B)`` of a reversible transient chain.

    Symmetric because detailed balance makes ``w G`` symmetric; positive
    definite because ``G`` is the inverse of ``I - P`` with spectrum in
    ``(0, 2]`` of the weighted geometry.
    """
    if not check_reversibility(chain, tol=balance_tol):
        raise InvalidChainError(
            f"chain is not reversible (defect {reversibility_defect(chain):.3e}); "
            "the Green kernel would not be symmetric"
        )
    data = green(chain)
    WG = chain.space.weight_array[:, None] * data.G

    def evaluate(A: MeasurableSet, B: MeasurableSet) -> float:
        if not A.members or not B.members:
            return 0.0
        return float(WG[np.ix_(A.indices, B.indices)].sum())

    return SetKernel(space=chain.space, kind="green", evaluator=evaluate, matrix=data.G)


def green_root(chain: MarkovChain) -> np.ndarray:
    """The operator ``(I - P)^{-1/2}`` in the weighted geometry."""

    def inv_sqrt(lam: np.ndarray) -> np.ndarray:
        top = float(lam.max())
        if top >= 1 - TRANSIENCE_GAP:
            raise NotTransientError(
                f"chain is not transient: spectral bound {top:.12g} reaches 1",
                spectral_bound=top,
            )
        return 1.0 / np.sqrt(1.0 - lam)

    return spectral_transform(chain.transitions, chain.space.weight_array, inv_sqrt)


def k_from_green(chain: MarkovChain, A: MeasurableSet) -> np.ndarray:
    """Factor vector ``k_A = (I - P)^{-1/2} chi_A``.

    Pairs of these vectors reproduce the Green kernel in the weighted
    pairing, which is the same factorization the generic engine derives from
    the kernel alone.
    """
    return green_root(chain) @ chain.space.indicator(A)


def contractivity_check(
    chain: MarkovChain, *, probes: int = 1000, seed: int = 0, tol: float = 1e-10
) -> bool:
    """Verify the transition operator is a weighted-L2 contraction.

    Checks the spectral norm bound ``<= 1`` and, on random probe vectors,
    the quadratic-form bound ``|<phi, P phi>| <= |phi|^2`` (both within
    ``tol``).
    """
    lam = _symmetric_spectrum(chain)
    if float(np.abs(lam).max()) > 1 + tol:
        return False
    rng = np.random.default_rng(seed)
    w = chain.space.weight_array
    P = chain.transitions
    phis = rng.standard_normal((probes, chain.space.size))
    quad = np.einsum("ij,j,ij->i", phis, w, phis @ P.T)
    norms = np.einsum("ij,j,ij->i", phis, w, phis)
    return bool(np.all(np.abs(quad) <= norms + tol))


def spectral_gap(chain: MarkovChain) -> float:
    """Smallest weighted eigenvalue of ``I - P``; positive for transient chains."""
    lam = _symmetric_spectrum(chain)
    return float(1.0 - lam.max())
