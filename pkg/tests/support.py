"""Shared generators for the test suite.

Everything takes an explicit numpy Generator so tests stay reproducible.
"""

from __future__ import annotations

import numpy as np

from setkern import (
    MarkovChain,
    MeasurableSet,
    MeasureSpace,
    Partition,
    SetKernel,
    SimpleFunction,
    operator_kernel,
)


def random_space(rng: np.random.Generator, n: int, zero_atoms: int = 0) -> MeasureSpace:
    """Weights uniform in [0.1, 3]; optionally force some atoms to weight zero."""
    weights = rng.uniform(0.1, 3.0, size=n)
    if zero_atoms:
        idx = rng.choice(n, size=min(zero_atoms, n - 1), replace=False)
        weights[idx] = 0.0
    atoms = tuple(f"x{i}" for i in range(n))
    return MeasureSpace(atoms, tuple(weights))


def random_psd_matrix(rng: np.random.Generator, n: int, well_conditioned: bool = False) -> np.ndarray:
    """Symmetric PSD matrix; eigenvalues in [0.2, 3] when well conditioned."""
    if well_conditioned:
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        return Q @ np.diag(rng.uniform(0.2, 3.0, size=n)) @ Q.T
    B = rng.standard_normal((n, n))
    return B.T @ B / n


def random_nu_psd_matrix(
    rng: np.random.Generator, space: MeasureSpace, well_conditioned: bool = False
) -> np.ndarray:
    """A matrix that is selfadjoint and PSD in the weighted geometry.

    Built as D^{-1/2} S D^{1/2} with S symmetric PSD, restricted to the
    positive-weight block (zero rows and columns at null atoms).
    """
    w = space.weight_array
    pos = np.flatnonzero(space.positive)
    S = random_psd_matrix(rng, len(pos), well_conditioned=well_conditioned)
    d = np.sqrt(w[pos])
    M = np.zeros((space.size, space.size))
    M[np.ix_(pos, pos)] = (S / d[:, None]) * d[None, :]
    return M


def random_operator_kernel(
    rng: np.random.Generator, space: MeasureSpace, well_conditioned: bool = False
) -> SetKernel:
    return operator_kernel(space, random_nu_psd_matrix(rng, space, well_conditioned))


def random_set(rng: np.random.Generator, space: MeasureSpace, allow_empty: bool = False) -> MeasurableSet:
    while True:
        mask = rng.random(space.size) < 0.5
        if mask.any() or allow_empty:
            return MeasurableSet(frozenset(np.flatnonzero(mask).tolist()))


def random_sets(rng: np.random.Generator, space: MeasureSpace, count: int) -> list[MeasurableSet]:
    return [random_set(rng, space) for _ in range(count)]


def random_simple_function(
    rng: np.random.Generator, space: MeasureSpace, max_terms: int = 4
) -> SimpleFunction:
    k = int(rng.integers(1, max_terms + 1))
    terms = tuple(
        (float(rng.uniform(-2.0, 2.0)), random_set(rng, space)) for _ in range(k)
    )
    return SimpleFunction(terms)


def random_conductance_chain(
    rng: np.random.Generator, n: int, min_kill: float = 0.05
) -> MarkovChain:
    """Connected conductance graph with killing mass on a nonempty random subset."""
    atoms = [f"s{i}" for i in range(n)]
    edges = []
    for i in range(1, n):
        j = int(rng.integers(0, i))
        edges.append((atoms[i], atoms[j], float(rng.uniform(0.2, 2.0))))
    for _ in range(n // 2):
        i, j = rng.integers(0, n, size=2)
        edges.append((atoms[int(i)], atoms[int(j)], float(rng.uniform(0.2, 2.0))))
    n_kill = int(rng.integers(1, n + 1))
    killed = rng.choice(n, size=n_kill, replace=False)
    kill = {atoms[int(i)]: float(rng.uniform(min_kill, 0.5)) for i in killed}
    return MarkovChain.from_conductances(atoms, edges, kill)


def splitting_partitions(rng: np.random.Generator, space: MeasureSpace) -> list[Partition]:
    """Full splitting sequence from the one-block partition down to singletons."""
    blocks = [frozenset(range(space.size))]
    chain = [Partition(tuple(MeasurableSet(b) for b in blocks))]
    while any(len(b) > 1 for b in blocks):
        splittable = [i for i, b in enumerate(blocks) if len(b) > 1]
        i = int(rng.choice(splittable))
        members = sorted(blocks[i])
        rng.shuffle(members)
        cut = int(rng.integers(1, len(members)))
        blocks = (
            blocks[:i]
            + [frozenset(members[:cut]), frozenset(members[cut:])]
            + blocks[i + 1 :]
        )
        chain.append(Partition(tuple(MeasurableSet(b) for b in blocks)))
    return chain


def random_refinement_chain(
    rng: np.random.Generator, space: MeasureSpace, min_length: int = 3
) -> list[Partition]:
    """Refinement-ordered chain of length >= min_length ending at singletons."""
    full = splitting_partitions(rng, space)
    if len(full) <= min_length:
        return full
    middle = rng.choice(len(full) - 2, size=min(min_length - 2, len(full) - 2), replace=False) + 1
    keep = sorted({0, len(full) - 1, *middle.tolist()})
    return [full[i] for i in keep]


def enumerate_partitions(n: int) -> list[list[frozenset[int]]]:
    """All set partitions of range(n)."""
    if n == 0:
        return [[]]
    out: list[list[frozenset[int]]] = []

    def grow(i: int, blocks: list[list[int]]) -> None:
        if i == n:
            out.append([frozenset(b) for b in blocks])
            return
        for b in blocks:
            b.append(i)
            grow(i + 1, blocks)
            b.pop()
        blocks.append([i])
        grow(i + 1, blocks)
        blocks.pop()

    grow(0, [])
    return out
