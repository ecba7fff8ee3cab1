"""Realization engine: densities, operator assembly, square roots, isometries."""

import numpy as np
import pytest

from setkern import (
    AbsoluteContinuityError,
    Factorization,
    InconsistencyError,
    InvalidBasisError,
    InvalidMapError,
    MeasurableSet,
    MeasureSpace,
    NotPositiveError,
    RkhsElement,
    SetKernel,
    b_range_dimension,
    build_T,
    check_absolute_continuity,
    coisometry_b_star,
    counting_kernel,
    export_factorization,
    gram,
    isometry_b,
    onb_factorization,
    operator_kernel,
    radon_nikodym_density,
    rank_one_kernel,
    realize,
    reverse_direction,
    sqrt_T,
    verify_pushforward,
    wiener_kernel,
)
from support import (
    random_nu_psd_matrix,
    random_operator_kernel,
    random_sets,
    random_simple_function,
    random_space,
)


@pytest.fixture
def space():
    return MeasureSpace(("a", "b", "c"), (1.0, 2.0, 0.5))


@pytest.fixture
def null_space():
    return MeasureSpace(("a", "b", "c"), (1.0, 1.0, 0.0))


def nu_orthonormal_bases(rng, space):
    """Two distinct complete orthonormal bases of the weighted L2 space."""
    w = space.weight_array
    pos = np.flatnonzero(space.positive)
    singleton_basis = []
    for i in pos:
        v = np.zeros(space.size)
        v[i] = 1.0 / np.sqrt(w[i])
        singleton_basis.append(v)
    Q, _ = np.linalg.qr(rng.standard_normal((len(pos), len(pos))))
    rotated = []
    for j in range(len(pos)):
        v = np.zeros(space.size)
        v[pos] = Q[:, j] / np.sqrt(w[pos])
        rotated.append(v)
    return singleton_basis, rotated


# ---------------------------------------------------------------------------
# absolute continuity


def test_wiener_has_no_violations(null_space):
    assert check_absolute_continuity(wiener_kernel(null_space)).ok


def test_counting_kernel_charges_null_atom(null_space):
    report = check_absolute_continuity(counting_kernel(null_space), [null_space.subset("c")])
    assert not report.ok
    (A, value), = report.violations
    assert A == null_space.subset("c")
    assert value == 1.0


def test_rank_one_has_no_violations(null_space):
    assert check_absolute_continuity(rank_one_kernel(null_space)).ok


# ---------------------------------------------------------------------------
# densities


def test_wiener_density_is_indicator(space):
    B = space.subset("b", "c")
    np.testing.assert_allclose(radon_nikodym_density(wiener_kernel(space), B), space.indicator(B))


def test_rank_one_density_is_constant():
    sp = MeasureSpace(("a", "b", "c"), (0.5, 0.3, 0.2))  # total mass one
    B = sp.subset("a", "b")
    g = radon_nikodym_density(rank_one_kernel(sp), B)
    np.testing.assert_allclose(g, sp.measure(B) * np.ones(3), atol=1e-12)


def test_operator_density_applies_the_matrix(space):
    rng = np.random.default_rng(0)
    M = random_nu_psd_matrix(rng, space)
    k = operator_kernel(space, M)
    B = space.subset("b", "c")
    np.testing.assert_allclose(
        radon_nikodym_density(k, B), M @ space.indicator(B), atol=1e-12
    )


def test_density_reconstructs_kernel_by_weighted_sums(space):
    rng = np.random.default_rng(1)
    k = random_operator_kernel(rng, space)
    for B in random_sets(rng, space, 10):
        g = radon_nikodym_density(k, B)
        for A in random_sets(rng, space, 10):
            recon = float(np.sum(space.weight_array * space.indicator(A) * g))
            assert recon == pytest.approx(k(A, B), abs=1e-10)


def test_density_refuses_charged_null_atom(null_space):
    with pytest.raises(AbsoluteContinuityError):
        radon_nikodym_density(counting_kernel(null_space), null_space.subset("c"))


# ---------------------------------------------------------------------------
# operator assembly and square root


def test_build_T_wiener_is_identity_on_positive_atoms(null_space):
    T = build_T(wiener_kernel(null_space))
    np.testing.assert_allclose(T, np.diag([1.0, 1.0, 0.0]), atol=1e-14)


def test_build_T_rank_one_rows_are_the_weights():
    sp = MeasureSpace(("a", "b", "c"), (0.5, 0.3, 0.2))
    T = build_T(rank_one_kernel(sp))
    np.testing.assert_allclose(T, np.tile([0.5, 0.3, 0.2], (3, 1)), atol=1e-14)


def test_build_T_reproduces_kernel_on_sets(space):
    rng = np.random.default_rng(2)
    k = random_operator_kernel(rng, space)
    T = build_T(k)
    w = space.weight_array
    for A, B in zip(random_sets(rng, space, 20), random_sets(rng, space, 20)):
        lhs = float(space.indicator(A) @ (w[:, None] * T) @ space.indicator(B))
        assert lhs == pytest.approx(k(A, B), abs=1e-10)


def test_build_T_rejects_charged_null_atom(null_space):
    with pytest.raises(AbsoluteContinuityError):
        build_T(counting_kernel(null_space))


def test_build_T_rejects_indefinite_kernel(space):
    neg = SetKernel.from_callable(space, lambda A, B: -space.measure(A & B), kind="negative")
    with pytest.raises(NotPositiveError):
        build_T(neg)


def test_sqrt_of_identity(space):
    np.testing.assert_allclose(sqrt_T(np.eye(3), space), np.eye(3), atol=1e-14)


def test_sqrt_of_diagonal():
    sp = MeasureSpace(("a", "b"), (1.0, 1.0))
    np.testing.assert_allclose(sqrt_T(np.diag([4.0, 9.0]), sp), np.diag([2.0, 3.0]), atol=1e-12)


def test_sqrt_reconstructs_random_matrix():
    rng = np.random.default_rng(3)
    sp = random_space(rng, 6)
    T = random_nu_psd_matrix(rng, sp)
    R = sqrt_T(T, sp)
    assert np.abs(R @ R - T).max() <= 1e-9
    # nu-selfadjoint: w(x) R[x,y] == w(y) R[y,x]
    WR = sp.weight_array[:, None] * R
    assert np.abs(WR - WR.T).max() <= 1e-10


def test_sqrt_rejects_indefinite(space):
    with pytest.raises(NotPositiveError):
        sqrt_T(np.diag([1.0, -1.0, 1.0]), space)


# ---------------------------------------------------------------------------
# realize: the forward direction


def test_realize_wiener_gives_indicators(space):
    fact = realize(wiener_kernel(space))
    for A in [space.subset("a"), space.subset("a", "c"), space.full_set()]:
        np.testing.assert_allclose(fact.k(A), space.indicator(A), atol=1e-12)


def test_realize_rank_one_gives_constant_vectors():
    sp = MeasureSpace(("a", "b", "c"), (0.5, 0.3, 0.2))
    fact = realize(rank_one_kernel(sp))
    A = sp.subset("a", "c")
    np.testing.assert_allclose(fact.k(A), sp.measure(A) * np.ones(3), atol=1e-12)


def test_realize_reproduces_kernel_exhaustively():
    # Every subset pair of an 8-atom space, vectorized over indicators.
    rng = np.random.default_rng(4)
    sp = random_space(rng, 8)
    k = random_operator_kernel(rng, sp)
    fact = realize(k)
    n = sp.size
    C = np.array(
        [[(mask >> i) & 1 for i in range(n)] for mask in range(2**n)], dtype=float
    )
    kvecs = C @ fact.S.T
    inner = kvecs @ (sp.weight_array[:, None] * kvecs.T)
    target = C @ (sp.weight_array[:, None] * k.matrix) @ C.T
    assert np.abs(inner - target).max() <= 1e-8


def test_realize_rejects_counting_kernel_on_null_space(null_space):
    with pytest.raises(AbsoluteContinuityError):
        realize(counting_kernel(null_space))


# ---------------------------------------------------------------------------
# reverse direction


def test_reverse_direction_wiener(space):
    fact = realize(wiener_kernel(space))
    report = reverse_direction(fact)
    assert report.max_residual <= 1e-12
    assert report.absolute_continuity_ok


def test_reverse_direction_rank_one():
    sp = MeasureSpace(("a", "b", "c"), (0.5, 0.3, 0.2))
    fact = realize(rank_one_kernel(sp))
    B = sp.subset("a", "b")
    recovered = fact.T @ sp.indicator(B)
    np.testing.assert_allclose(recovered, sp.measure(B) * np.ones(3), atol=1e-12)
    assert reverse_direction(fact).max_residual <= 1e-12


def test_reverse_direction_random_operator(space):
    rng = np.random.default_rng(5)
    fact = realize(random_operator_kernel(rng, space))
    assert reverse_direction(fact, random_sets(rng, space, 20)).max_residual <= 1e-9


def test_reverse_direction_detects_tampering(space):
    fact = realize(wiener_kernel(space))
    bad = Factorization(
        space=space, kernel=fact.kernel, T=2.0 * fact.T, S=fact.S, residual=0.0
    )
    with pytest.raises(InconsistencyError):
        reverse_direction(bad)


# ---------------------------------------------------------------------------
# isometry and co-isometry


def test_isometry_sends_kernel_sections_to_factors(space):
    fact = realize(wiener_kernel(space))
    A = space.subset("a", "b")
    np.testing.assert_allclose(
        isometry_b(fact, RkhsElement(((1.0, A),))), space.indicator(A), atol=1e-12
    )


def test_isometry_of_zero_element(space):
    fact = realize(wiener_kernel(space))
    image = isometry_b(fact, RkhsElement(()))
    assert space.norm_squared(image) == 0.0


def test_isometry_linearity_cancels_duplicates(space):
    fact = realize(wiener_kernel(space))
    A = space.subset("a")
    el = RkhsElement(((1.0, A), (-1.0, A)))
    np.testing.assert_allclose(isometry_b(fact, el), np.zeros(3), atol=1e-15)


def test_isometry_preserves_norms(space):
    rng = np.random.default_rng(6)
    k = random_operator_kernel(rng, space)
    fact = realize(k)
    for _ in range(100):
        el = RkhsElement(random_simple_function(rng, space).terms)
        n2 = el.norm_squared(k)
        image = space.norm_squared(isometry_b(fact, el))
        assert abs(image - n2) <= 1e-9 * max(1.0, n2)


def test_coisometry_on_wiener(space):
    fact = realize(wiener_kernel(space))
    A, B = space.subset("a", "b"), space.subset("b", "c")
    assert coisometry_b_star(fact, space.indicator(B), A) == pytest.approx(2.0)


def test_coisometry_annihilates_orthogonal_complement():
    sp = MeasureSpace(("a", "b"), (1.0, 1.0))
    fact = realize(wiener_kernel(sp))
    phi = np.array([0.0, 1.0])
    assert coisometry_b_star(fact, phi, sp.subset("a")) == 0.0


def test_adjoint_identity(space):
    rng = np.random.default_rng(7)
    k = random_operator_kernel(rng, space)
    fact = realize(k)
    for _ in range(100):
        phi = rng.standard_normal(space.size)
        el = RkhsElement(random_simple_function(rng, space).terms)
        lhs = sum(c * coisometry_b_star(fact, phi, A) for c, A in el.terms)
        rhs = space.inner(phi, isometry_b(fact, el))
        assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))


def test_reproducing_property_through_b(space):
    # b*(b K(.,A))(B) recovers K(A, B).
    rng = np.random.default_rng(8)
    k = random_operator_kernel(rng, space)
    fact = realize(k)
    for A, B in zip(random_sets(rng, space, 20), random_sets(rng, space, 20)):
        image = isometry_b(fact, RkhsElement(((1.0, A),)))
        assert coisometry_b_star(fact, image, B) == pytest.approx(k(A, B), abs=1e-9)


# ---------------------------------------------------------------------------
# Parseval expansions


def test_onb_recovers_wiener_kernel(space):
    rng = np.random.default_rng(9)
    fact = realize(wiener_kernel(space))
    basis, _ = nu_orthonormal_bases(rng, space)
    A, B = space.subset("a", "b"), space.subset("b", "c")
    assert onb_factorization(fact, basis, A, B) == pytest.approx(2.0, abs=1e-12)


def test_onb_on_empty_set(space):
    rng = np.random.default_rng(10)
    fact = realize(wiener_kernel(space))
    basis, _ = nu_orthonormal_bases(rng, space)
    assert onb_factorization(fact, basis, MeasurableSet(frozenset()), space.subset("a")) == 0.0


def test_onb_sum_is_basis_independent(space):
    rng = np.random.default_rng(11)
    k = random_operator_kernel(rng, space)
    fact = realize(k)
    basis1, basis2 = nu_orthonormal_bases(rng, space)
    for A, B in zip(random_sets(rng, space, 10), random_sets(rng, space, 10)):
        s1 = onb_factorization(fact, basis1, A, B)
        s2 = onb_factorization(fact, basis2, A, B)
        assert abs(s1 - s2) <= 1e-10 * max(1.0, abs(s1))
        assert s1 == pytest.approx(k(A, B), abs=1e-9)


def test_onb_rejects_non_orthonormal(space):
    fact = realize(wiener_kernel(space))
    with pytest.raises(InvalidBasisError):
        onb_factorization(fact, list(np.eye(3) * 2.0), space.subset("a"), space.subset("b"))


def test_onb_rejects_incomplete_basis(space):
    fact = realize(wiener_kernel(space))
    v = np.array([1.0, 0.0, 0.0])
    with pytest.raises(InvalidBasisError):
        onb_factorization(fact, [v], space.subset("a"), space.subset("b"))


# ---------------------------------------------------------------------------
# range dimension


def test_wiener_range_is_everything(null_space):
    fact = realize(wiener_kernel(null_space))
    assert b_range_dimension(fact) == 2  # two positive atoms


def test_rank_one_range_is_one_dimensional(space):
    fact = realize(rank_one_kernel(space))
    assert b_range_dimension(fact, [space.subset("a", "b")]) == 1


def test_degenerate_operator_range():
    sp = MeasureSpace(("a", "b", "c"), (1.0, 1.0, 1.0))
    fact = realize(operator_kernel(sp, np.diag([1.0, 1.0, 0.0])))
    assert b_range_dimension(fact) == 2


# ---------------------------------------------------------------------------
# pushforward verifier


def test_identity_pushforward(space):
    assert verify_pushforward(space, space, {0: 0, 1: 1, 2: 2})


def test_mass_aggregation_pushforward():
    src = MeasureSpace(("u", "v"), (0.5, 0.5))
    dst = MeasureSpace(("w",), (1.0,))
    assert verify_pushforward(src, dst, [0, 0])


def test_mass_mismatch_pushforward():
    src = MeasureSpace(("u", "v"), (1.0, 1.0))
    dst = MeasureSpace(("w", "z"), (1.0, 2.0))
    assert not verify_pushforward(src, dst, [0, 1])


def test_unmapped_atom_is_an_error(space):
    with pytest.raises(InvalidMapError):
        verify_pushforward(space, space, {0: 0, 1: 1})


def test_bad_target_is_an_error(space):
    with pytest.raises(InvalidMapError):
        verify_pushforward(space, space, [0, 1, 9])


# ---------------------------------------------------------------------------
# export


def test_export_contents(space):
    fact = realize(wiener_kernel(space))
    data = export_factorization(fact, [space.subset("a", "b")])
    assert data["atoms"] == ["a", "b", "c"]
    np.testing.assert_allclose(data["T"], np.eye(3))
    by_set = {tuple(entry["set"]): entry["vector"] for entry in data["k"]}
    np.testing.assert_allclose(by_set[("a", "b")], [1.0, 1.0, 0.0], atol=1e-12)
