from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hwtrees import measure
from hwtrees.errors import DomainError, ShapeError
from hwtrees.measure import (BallSpec, ball_classes, bgw_two_type_mass, decomposition_mass,
                             decomposition_weights, dirichlet_moment, kstar_series, lambda_ball,
                             nuN_ball_exact, poisson_level_pmf, refinement_sum, rho_ball_mass,
                             rho_mass, spine_ball_mass, sumrule_check, uipt_ball, xi_ball, xi_value)
from hwtrees.partition import WeightParams
from hwtrees.series import build_tables, catalan, g_crit, x_crit
from hwtrees.trees import PlanarTree, ball, decode, enumerate_all

TABLES = build_tables(200)
EDGE = PlanarTree.single_edge()
PATH2 = PlanarTree.path(2)
CHERRY = decode("()()")


def spec(word: str) -> BallSpec:
    return BallSpec(decode(word))


def balls_of_height(r: int, max_size: int) -> list[PlanarTree]:
    return [t for n in range(r, max_size + 1) for t in enumerate_all(n) if t.height == r]


def extend_tops(base: PlanarTree, branches: list[PlanarTree]) -> PlanarTree:
    """Hang the forest below each branch's first vertex on a top vertex of base."""
    it = iter(branches)
    r = base.height

    def walk(node, depth):
        if depth == r:
            return next(it).nested
        return tuple(walk(c, depth + 1) for c in node)

    return PlanarTree.from_nested(walk(base.nested, 1))


# heights rewarded -----------------------------------------------------------------

def test_lambda_examples():
    assert lambda_ball(BallSpec(EDGE), Fraction(2)).value == 1
    assert lambda_ball(BallSpec(PATH2), Fraction(2)).value == Fraction(4, 9)
    assert lambda_ball(BallSpec(PATH2), 2.0).value == pytest.approx(4 / 9, rel=1e-15)
    with pytest.raises(DomainError):
        lambda_ball(BallSpec(PATH2), Fraction(1))


@pytest.mark.parametrize("k", [Fraction(2), Fraction(3), Fraction(5, 4)])
def test_kstar_geometric_identity(k):
    g, x = g_crit(k), x_crit(k)
    # sum over K of K k g X^(K-1) = k g / (1 - X)^2 = k c(g_c) = 1
    assert k * g / (1 - x) ** 2 == 1
    assert kstar_series(WeightParams.from_t(k)) == pytest.approx(1.0, abs=1e-12)


def test_lambda_truncated_converges():
    full = lambda_ball(spec("()()()"), Fraction(2)).value
    approx = [lambda_ball(spec("()()()"), Fraction(2), m_trunc=m).value for m in (5, 10, 40)]
    gaps = [abs(full - a) for a in approx]
    assert gaps[0] > gaps[1] > gaps[2]


def test_uipt_ball():
    assert uipt_ball(BallSpec(EDGE)).value == 1
    assert uipt_ball(BallSpec(PATH2)).value == Fraction(1, 4)
    assert sumrule_check(2, WeightParams.from_t(1), 60)[0] < 1


# heights penalised -----------------------------------------------------------------

@pytest.mark.parametrize("mu", [0.3, 1.0, 2.5])
def test_xi_examples(mu):
    assert xi_ball(BallSpec(EDGE), mu).value == pytest.approx(1.0)
    assert xi_ball(BallSpec(PATH2), mu).value == pytest.approx(math.exp(-mu) / 4, rel=1e-15)
    assert xi_ball(BallSpec(CHERRY), mu).value == pytest.approx(math.exp(-mu) * (2 + mu) / 8, rel=1e-15)
    with pytest.raises(DomainError):
        xi_ball(BallSpec(PATH2), -mu)


def test_xi_exact_mode():
    v = xi_ball(BallSpec(CHERRY), Fraction(1), Fraction(1, 3)).value
    assert v == Fraction(1, 3) * 3 / 8


@pytest.mark.parametrize("mu", [0.5, 1.0])
def test_spine_ball_examples(mu):
    assert spine_ball_mass(EDGE, mu).value == 1
    for r in (2, 3, 6):
        assert spine_ball_mass(PlanarTree.path(r), mu).value == pytest.approx(math.exp(-(r - 1) * mu))
    assert spine_ball_mass(CHERRY, mu).value == pytest.approx(math.exp(-mu) * mu)
    with pytest.raises(ShapeError):
        spine_ball_mass(decode("(())()"), mu)


def test_spine_masses_match_level_law():
    # summing spine-ball masses over shapes with R top vertices gives the Poisson law
    mu, r = 0.7, 3
    by_top = Counter()
    for t in balls_of_height(r, 9):
        if all(c > 0 for level in t.counts for c in level):
            by_top[t.levels[-1]] += spine_ball_mass(t, mu).value
    for R in (1, 2, 3):
        assert by_top[R] == pytest.approx(poisson_level_pmf(r, R, mu), rel=1e-12)


def test_poisson_level_pmf():
    assert poisson_level_pmf(1, 1, 0.8) == 1.0
    assert poisson_level_pmf(3, 1, 1.0) == pytest.approx(math.exp(-2))
    # tail beyond R = 80 is far below 1e-15; the slack covers rounding of the terms
    total = math.fsum(poisson_level_pmf(10, R, 1.0) for R in range(1, 80))
    assert total == pytest.approx(1.0, abs=1e-14)


def test_rho_masses():
    assert rho_ball_mass(BallSpec(EDGE)).value == 1
    assert rho_mass(PATH2).value == Fraction(1, 8)
    # 2 sum_N C_{N-1} 4^-N = 2 X(1/4) = 1; partial sums approach 1 from below
    partial = [sum(2 * Fraction(catalan(n - 1), 4 ** n) for n in range(1, cut)) for cut in (50, 200, 800)]
    assert partial[0] < partial[1] < partial[2] < 1
    assert float(1 - partial[2]) < 0.03
    assert sum(rho_mass(t).value for n in range(1, 8) for t in enumerate_all(n)) == partial[0] - sum(
        2 * Fraction(catalan(n - 1), 4 ** n) for n in range(8, 50))


# finite size --------------------------------------------------------------------------

def test_nuN_examples():
    for n in (1, 5, 30):
        assert nuN_ball_exact(BallSpec(EDGE), n, TABLES, t=Fraction(3)).value == 1
    for mu in (0.5, 1.0, -0.3):
        v = nuN_ball_exact(BallSpec(PATH2), 3, TABLES, mu=mu).value
        assert v == pytest.approx(1 / (1 + math.exp(mu)), rel=1e-14)
    assert nuN_ball_exact(BallSpec(PATH2), 3, TABLES, t=Fraction(1, 2)).value == Fraction(1, 3)


def test_nuN_k2_approaches_limit():
    vals = [nuN_ball_exact(BallSpec(PATH2), n, TABLES, mu=-math.log(2)).value for n in (50, 100, 200)]
    gaps = [abs(v - 4 / 9) for v in vals]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.01


def test_nuN_mu1_approaches_limit():
    vals = [nuN_ball_exact(BallSpec(PATH2), n, TABLES, mu=1.0).value for n in (50, 100, 200)]
    gaps = [abs(v - math.exp(-1) / 4) for v in vals]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.05


@pytest.mark.parametrize("n", [4, 6, 9])
@pytest.mark.parametrize("t", [Fraction(2), Fraction(1, 3), Fraction(1)])
def test_nuN_matches_enumeration(n, t):
    trees = enumerate_all(n)
    z = sum(t ** tr.height for tr in trees)
    for r in (2, 3):
        mass = Counter()
        for tr in trees:
            if tr.height >= r:
                mass[ball(tr, r)] += t ** tr.height
        for b, w in mass.items():
            assert nuN_ball_exact(BallSpec(b), n, TABLES, t=t).value == w / z


# sum rules ------------------------------------------------------------------------------

def test_sumrule_examples():
    total, terms = sumrule_check(1, WeightParams.from_t(Fraction(2)), 10)
    assert total == 1 and terms == 1
    for params in (WeightParams.from_t(Fraction(2)), WeightParams.from_mu(1.0)):
        sums = [float(sumrule_check(2, params, c)[0]) for c in range(2, 41)]
        assert all(b >= a for a, b in zip(sums, sums[1:]))
        assert sums[-1] >= 0.999
        assert sums[-1] <= 1 + 1e-12


def test_sumrule_exact_is_below_one():
    total, _ = sumrule_check(3, WeightParams.from_t(Fraction(2)), 30)
    assert isinstance(total, Fraction)
    assert Fraction(99, 100) < total < 1


def test_ball_classes_counts_trees():
    for r in (2, 3, 4):
        classes = ball_classes(r, 9)
        by_class = Counter((t.size, t.levels[-1]) for t in balls_of_height(r, 9))
        assert classes == dict(by_class)


@pytest.mark.parametrize("word", ["", "()", "()()", "(())()"])
def test_refinement_consistency(word):
    base = decode(word)
    k = Fraction(2)
    parent = lambda_ball(BallSpec(base), k).value
    child_sum = refinement_sum(base, base.height + 1, WeightParams.from_t(k), 40)
    assert float(child_sum) <= float(parent)
    assert float(child_sum) == pytest.approx(float(parent), rel=2e-3)


# decomposition ------------------------------------------------------------------------------

def test_decomposition_weights():
    assert decomposition_weights(BallSpec(EDGE), 1.0) == {frozenset({0}): pytest.approx(1.0)}
    mu = Fraction(1, 2)
    t = Fraction(3, 5)
    w = decomposition_weights(BallSpec(CHERRY), mu, t)
    assert len(w) == 3
    assert sum(w.values()) == xi_value(3, 2, 2, mu, t)
    assert w[frozenset({0})] == w[frozenset({1})]


def test_dirichlet_moment():
    assert dirichlet_moment([0, 0]) == 1
    assert dirichlet_moment([1, 1]) == Fraction(1, 6)
    assert dirichlet_moment([5]) == 1


@pytest.mark.parametrize("base, branches", [
    ("()()", ["()()", "()"]),
    ("()", ["()"]),
    ("()()", ["", ""]),
    ("(())()", ["()()"]),
    ("(()())", ["()", "()()"]),
    ("()()()", ["()", "()()", "()"]),
])
def test_decomposition_reproduces_xi(base, branches):
    mu, t = Fraction(1), Fraction(1, 3)
    b = decode(base)
    trees = [decode(w) for w in branches]
    whole = extend_tops(b, trees)
    assert decomposition_mass(BallSpec(b), trees, mu, t) == xi_value(whole.size, whole.height,
                                                                     whole.levels[-1], mu, t)


def test_decomposition_frozen_value():
    # whole tree "(()())(())": |T0| = 6, r = 3, K = 3, so
    # t^2 2^4 4^-6 (3 + 3 mu + mu^2 / 2) = (1/9)(1/256)(13/2) at mu = 1, t = 1/3
    got = decomposition_mass(BallSpec(CHERRY), [decode("()()"), decode("()")], Fraction(1), Fraction(1, 3))
    assert got == Fraction(13, 4608)


# two-type branching -------------------------------------------------------------------

@pytest.mark.parametrize("k", [Fraction(2), Fraction(5, 2)])
def test_two_type_branching_matches_lambda(k):
    g, x = g_crit(k), x_crit(k)
    for n in range(1, 8):
        for tree in enumerate_all(n):
            got = bgw_two_type_mass(tree, lambda j: x ** j * (1 - x), lambda j: k * g * x ** j)
            assert got == lambda_ball(BallSpec(tree), k).value


# properties ----------------------------------------------------------------------------

small_trees = st.integers(1, 8).flatmap(lambda n: st.sampled_from(enumerate_all(n)))


@given(small_trees, st.fractions(Fraction(11, 10), Fraction(6)))
def test_lambda_is_a_probability(tree, k):
    v = lambda_ball(BallSpec(tree), k).value
    assert 0 < v <= 1


@settings(max_examples=30)
@given(small_trees, st.floats(0.05, 4.0))
def test_xi_is_below_rho_times_weight(tree, mu):
    spec_ = BallSpec(tree)
    v = xi_ball(spec_, mu).value
    assert 0 < v <= 1 + 1e-12
    # K = 1: the only admissible spine is the single line, so the rate is 1
    if spec_.k_top == 1:
        assert v == pytest.approx(math.exp(-(spec_.r - 1) * mu) * float(rho_ball_mass(spec_).value))


@settings(max_examples=25, deadline=None)
@given(small_trees, st.integers(6, 9), st.fractions(Fraction(1, 4), Fraction(4)))
def test_nuN_is_consistent_under_refinement(tree, n, t):
    spec_ = BallSpec(tree)
    parent = nuN_ball_exact(spec_, n, TABLES, t=t).value
    children = set()
    stopped = 0  # trees of height r whose ball is the tree itself
    z = 0
    for tr in enumerate_all(n):
        z += t ** tr.height
        if tr.height < spec_.r or ball(tr, spec_.r) != tree:
            continue
        if tr.height == spec_.r:
            stopped += t ** tr.height
        else:
            children.add(ball(tr, spec_.r + 1))
    child_sum = sum(nuN_ball_exact(BallSpec(c), n, TABLES, t=t).value for c in children)
    assert parent == child_sum + stopped / z
