"""Measure space, sets, simple functions, partitions."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from setkern import (
    DomainError,
    InvalidSetError,
    MeasurableSet,
    MeasureSpace,
    Partition,
    SimpleFunction,
    is_partition,
    is_refinement,
)
from support import enumerate_partitions


@pytest.fixture
def space():
    return MeasureSpace(("a", "b", "c"), (1.0, 2.0, 0.5))


# ---------------------------------------------------------------------------
# construction invariants


def test_weights_must_be_nonnegative():
    with pytest.raises(DomainError):
        MeasureSpace(("a",), (-1.0,))


def test_some_weight_must_be_positive():
    with pytest.raises(DomainError):
        MeasureSpace(("a", "b"), (0.0, 0.0))


def test_atoms_must_be_unique():
    with pytest.raises(DomainError):
        MeasureSpace(("a", "a"), (1.0, 1.0))


def test_zero_weight_atoms_are_allowed():
    sp = MeasureSpace(("a", "b"), (1.0, 0.0))
    assert sp.measure(sp.subset("b")) == 0.0


# ---------------------------------------------------------------------------
# measure


def test_measure_sums_weights(space):
    assert space.measure(space.subset("a", "b")) == 3.0


def test_measure_empty_set(space):
    assert space.measure(MeasurableSet(frozenset())) == 0.0


def test_measure_full_space():
    sp = MeasureSpace(("a", "b", "c"), (1.0, 1.0, 1.0))
    assert sp.measure(sp.full_set()) == 3.0


def test_measure_rejects_out_of_range(space):
    with pytest.raises(InvalidSetError):
        space.measure(MeasurableSet(frozenset({7})))


# ---------------------------------------------------------------------------
# weighted inner product


def test_inner_of_indicator_is_measure(space):
    f = SimpleFunction.indicator(space.subset("a"))
    assert space.l2_inner(f, f) == 1.0


def test_inner_disjoint_supports_vanishes(space):
    f = SimpleFunction.indicator(space.subset("a"))
    g = SimpleFunction.indicator(space.subset("b"))
    assert space.l2_inner(f, g) == 0.0


def test_inner_weighted_expansion(space):
    # f = chi_a + 2 chi_b against chi_{a,b}: 1*1*1 + 2*1*2 = 5.
    f = SimpleFunction(((1.0, space.subset("a")), (2.0, space.subset("b"))))
    g = SimpleFunction.indicator(space.subset("a", "b"))
    assert space.l2_inner(f, g) == pytest.approx(5.0, abs=1e-12)


def test_inner_rejects_foreign_function(space):
    f = SimpleFunction(((1.0, MeasurableSet(frozenset({5}))),))
    with pytest.raises(DomainError):
        space.l2_inner(f, f)


# ---------------------------------------------------------------------------
# simple function canonical form


def test_simple_function_equality_is_pointwise(space):
    split = SimpleFunction(((1.0, space.subset("a")), (1.0, space.subset("b"))))
    merged = SimpleFunction.indicator(space.subset("a", "b"))
    assert split == merged
    assert hash(split) == hash(merged)


def test_simple_function_cancellation():
    A = MeasurableSet(frozenset({0}))
    f = SimpleFunction(((1.0, A), (-1.0, A)))
    assert f == SimpleFunction.zero()


# ---------------------------------------------------------------------------
# partitions


def test_singleton_partition(space):
    assert is_partition(space, space.singletons())


def test_overlapping_blocks_rejected(space):
    assert not is_partition(space, [space.subset("a", "b"), space.subset("b", "c")])


def test_non_covering_blocks_rejected():
    sp = MeasureSpace(("a", "b"), (1.0, 1.0))
    assert not is_partition(sp, [sp.subset("a")])


def test_refinement_by_singletons(space):
    coarse = Partition((space.full_set(),))
    fine = Partition(space.singletons())
    assert is_refinement(coarse, fine)


def test_refinement_is_reflexive(space):
    p = Partition((space.subset("a"), space.subset("b", "c")))
    assert is_refinement(p, p)


def test_refinement_counterexample(space):
    coarse = Partition((space.subset("a"), space.subset("b", "c")))
    fine = Partition((space.subset("a", "b"), space.subset("c")))
    assert not is_refinement(coarse, fine)


def test_refinement_rejects_mismatched_coverage(space):
    p = Partition((space.full_set(),))
    q = Partition((space.subset("a"),))
    with pytest.raises(DomainError):
        is_refinement(p, q)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_refinement_is_a_partial_order(n):
    # Exhaustive over all set partitions: reflexive, antisymmetric up to
    # block reordering, transitive.
    sp = MeasureSpace(tuple(f"x{i}" for i in range(n)), (1.0,) * n)
    parts = [
        Partition(tuple(MeasurableSet(b) for b in blocks))
        for blocks in enumerate_partitions(n)
    ]
    m = len(parts)
    R = np.zeros((m, m), dtype=bool)
    for i in range(m):
        for j in range(m):
            R[i, j] = is_refinement(parts[i], parts[j])
    assert np.all(np.diag(R))
    for i in range(m):
        for j in range(m):
            if i != j and R[i, j] and R[j, i]:
                assert set(parts[i].blocks) == set(parts[j].blocks)
    # transitive closure stays inside the relation
    assert not np.any((R @ R) & ~R)


# ---------------------------------------------------------------------------
# property tests


@st.composite
def spaces(draw):
    n = draw(st.integers(min_value=1, max_value=6))
    weights = draw(
        st.lists(
            st.floats(min_value=0.0, max_value=3.0, allow_nan=False),
            min_size=n,
            max_size=n,
        ).filter(lambda ws: any(w > 0 for w in ws))
    )
    return MeasureSpace(tuple(f"x{i}" for i in range(n)), tuple(weights))


@st.composite
def space_and_disjoint_sets(draw):
    sp = draw(spaces())
    labels = draw(st.lists(st.integers(0, 2), min_size=sp.size, max_size=sp.size))
    A = MeasurableSet(frozenset(i for i, l in enumerate(labels) if l == 0))
    B = MeasurableSet(frozenset(i for i, l in enumerate(labels) if l == 1))
    return sp, A, B


@given(space_and_disjoint_sets())
def test_measure_additive_over_disjoint_unions(data):
    sp, A, B = data
    assert sp.measure(A | B) == pytest.approx(sp.measure(A) + sp.measure(B), abs=1e-12)


@st.composite
def space_and_two_functions(draw):
    sp = draw(spaces())
    coefs = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False)

    def fn():
        k = draw(st.integers(1, 3))
        terms = []
        for _ in range(k):
            members = draw(st.frozensets(st.integers(0, sp.size - 1)))
            terms.append((draw(coefs), MeasurableSet(members)))
        return SimpleFunction(tuple(terms))

    return sp, fn(), fn()


@settings(max_examples=200)
@given(space_and_two_functions())
def test_cauchy_schwarz(data):
    sp, f, g = data
    lhs = sp.l2_inner(f, g) ** 2
    rhs = sp.l2_inner(f, f) * sp.l2_inner(g, g)
    assert lhs <= rhs + 1e-12


@given(space_and_two_functions())
def test_inner_is_symmetric(data):
    sp, f, g = data
    assert sp.l2_inner(f, g) == pytest.approx(sp.l2_inner(g, f), abs=1e-12)
