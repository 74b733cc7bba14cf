import itertools
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coarsekit import sl2
from coarsekit.linalg import operator_norm, power_iteration_norm
from coarsekit.rep_spectra import (GroupAlgebraElement, ModulusTooLarge, PermutationRep, averaging_operator,
                                   congruence_norm, first_injective_modulus, kazhdan_projection_decay,
                                   pushforward_isometry_check, random_element, representation_defect,
                                   right_regular_apply, sl2_quotient, trivial_isolation_gap)


def brute_order(n):
    return sum(1 for a, b, c, d in itertools.product(range(n), repeat=4) if (a * d - b * c) % n == 1 % n)


@pytest.mark.parametrize("n", range(2, 10))
def test_quotient_orders(n):
    q = sl2_quotient(n)
    assert q.order == brute_order(n) == sl2.sl2_order(n)
    assert q.check_group_axioms(samples=50) and q.check_homomorphism(pairs=20)


def test_small_orders_and_crt():
    assert [sl2_quotient(n).order for n in (2, 3, 4, 5)] == [6, 24, 48, 120]
    assert sl2_quotient(6).order == sl2_quotient(2).order * sl2_quotient(3).order
    assert sl2_quotient(13).order == 13 * (13**2 - 1)


def test_modulus_cap():
    with pytest.raises(ModulusTooLarge, match="cap 13"):
        sl2_quotient(14)


def test_permutation_rep_is_permutation():
    rep = PermutationRep(sl2_quotient(5))
    m = rep.generator_matrix(sl2.T).toarray()
    assert np.array_equal(m.sum(0), np.ones(rep.dim)) and np.array_equal(m.sum(1), np.ones(rep.dim))
    assert np.allclose(m @ m.T, np.eye(rep.dim))


# -- norms -----------------------------------------------------------------------------------

def test_norm_examples():
    norms = congruence_norm(GroupAlgebraElement.delta("e"), range(2, 6))
    assert all(abs(v - 1) < 1e-12 for v in norms.norms.values())
    avg = congruence_norm(GroupAlgebraElement.averaging(), range(2, 8))
    assert all(abs(v - 1) < 1e-12 for v in avg.norms.values())


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 7, 8, 12])
def test_t_minus_t_inverse_closed_form(n):
    x = GroupAlgebraElement.from_words([("T", 1), ("T^-1", -1)])
    expected = 2 * max(abs(math.sin(2 * math.pi * k / n)) for k in range(n))
    assert abs(congruence_norm(x, [n]).norms[n] - expected) < 1e-9


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([3, 5, 7, 11]))
def test_norm_against_dense_svd_and_power_iteration(seed, n):
    x = random_element(random.Random(seed), radius=3, terms=4)
    m = PermutationRep(sl2_quotient(n)).matrix(x)
    dense = np.linalg.norm(m.toarray(), 2)
    assert abs(congruence_norm(x, [n]).norms[n] - dense) < 1e-9 * max(1, dense)
    assert abs(operator_norm(m, dense_limit=0) - dense) < 1e-9 * max(1, dense)
    pi = power_iteration_norm(m.dot, m.T.dot, m.shape[0], iters=5000, tol=1e-15)
    assert pi <= dense + 1e-9 and dense - pi < 1e-3 * max(1, dense)


# -- exactness ------------------------------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([2, 3, 4, 6, 7]))
def test_representation_is_exact(seed, n):
    rng = random.Random(seed)
    x, y = random_element(rng), random_element(rng)
    assert representation_defect(x, y, n) == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([3, 5, 8]))
def test_star_is_transpose(seed, n):
    x = random_element(random.Random(seed))
    rep = PermutationRep(sl2_quotient(n))
    assert np.allclose(rep.matrix(x.star()).toarray(), rep.matrix(x).toarray().T)


def test_convolution_and_star_identities():
    x = GroupAlgebraElement.from_words([("T", 2), ("S", Fraction(-1, 3))])
    y = GroupAlgebraElement.from_words([("T^-1 S", 1), ("e", 5)])
    assert (x * y).star().terms == (y.star() * x.star()).terms
    assert (x * GroupAlgebraElement.delta()).terms == x.terms
    assert GroupAlgebraElement.from_json(x.to_json()).terms == x.terms


# -- pushforward -------------------------------------------------------------------------------

def test_pushforward_examples():
    xi = {sl2.IDENTITY: Fraction(1)}
    res = pushforward_isometry_check(GroupAlgebraElement.delta("T"), xi, 5)
    assert res.holds and res.reduced_norm_sq == 1
    x = GroupAlgebraElement.from_words([("T", 1), ("T^-1", -1)])
    res = pushforward_isometry_check(x, xi, 7)
    assert res.holds and res.reduced_norm_sq == res.quotient_norm_sq == 2


def test_pushforward_collision_reported():
    x = GroupAlgebraElement.from_words([("T^2", 1), ("e", 1)])
    res = pushforward_isometry_check(x, {sl2.IDENTITY: Fraction(1)}, 2)
    assert not res.injective and res.collision is not None and not res.holds


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_pushforward_isometry_random(seed):
    rng = random.Random(seed)
    x = random_element(rng, radius=3, terms=3)
    xi_el = random_element(rng, radius=3, terms=3)
    res = first_injective_modulus(x, dict(xi_el.terms))
    assert res is not None and res.n <= 13
    assert res.quotient_norm_sq == res.reduced_norm_sq
    eta = right_regular_apply(x, dict(xi_el.terms))
    assert res.reduced_norm_sq == sum(v * v for v in eta.values())


# -- gap and decay ----------------------------------------------------------------------------

def test_gap_mod_two():
    rep = trivial_isolation_gap([2])
    assert abs(rep.lambda2[2] - 0.5) < 1e-12


@pytest.mark.parametrize("n", range(2, 9))
def test_averaging_fixes_constants_and_is_symmetric(n):
    m = averaging_operator(n)
    assert np.allclose(m @ np.ones(len(m)), 1) and np.allclose(m, m.T)
    assert trivial_isolation_gap([n]).constants_defect[n] < 1e-12


def test_asymmetric_generators_rejected():
    with pytest.raises(ValueError, match="not symmetric"):
        averaging_operator(5, [sl2.T, sl2.S])


def test_decay_first_rows():
    table = kazhdan_projection_decay(5, k_max=3)
    assert abs(table.norms[0] - 1) < 1e-12
    assert abs(table.norms[1] - table.lambda_star) < 1e-12
    assert table.max_excess() < 1e-8


def test_decay_even_modulus_has_minus_one():
    gap = trivial_isolation_gap([4])
    assert abs(gap.lambda_min[4] + 1) < 1e-12
    assert kazhdan_projection_decay(4, k_max=5).max_deviation() < 1e-10
