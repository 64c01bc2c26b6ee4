from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from hwtrees import samplers
from hwtrees.errors import DomainError, SizeGuardError
from hwtrees.measure import BallSpec, poisson_level_pmf, uipt_ball, xi_ball
from hwtrees.samplers import (ExactHeightSampler, OffspringLaw, RngStream, map_chunks,
                              poisson_inverse, sample_bgw_to_depth, sample_finite_exact,
                              sample_level_profiles, sample_local_ball, sample_single_spine_ball,
                              sample_spine_ball_pos, sample_uniform_exact_height,
                              uniform_composition)
from hwtrees.series import build_tables, catalan
from hwtrees.trees import PlanarTree, ball, decode, enumerate_all

TABLES = build_tables(16)
EDGE = PlanarTree.single_edge()
PATH2 = PlanarTree.path(2)


def rng(stream: int) -> np.random.Generator:
    return RngStream(20240611, stream).generator()


def within(count: int, n: int, p: float, k: float = 3.0) -> bool:
    sd = math.sqrt(p * (1 - p) / n)
    return abs(count / n - p) < k * sd


# streams -----------------------------------------------------------------------------

def test_rng_stream_determinism():
    a = RngStream(5, 1).generator().random(8)
    b = RngStream(5, 1).generator().random(8)
    c = RngStream(5, 2).generator().random(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def _draw(count, g):
    return [sample_local_ball(5, 1.0, g).counts for _ in range(count)]


def test_map_chunks_is_worker_independent():
    one = map_chunks(_draw, 250, seed=9, workers=1, chunk_size=60)
    two = map_chunks(_draw, 250, seed=9, workers=2, chunk_size=60)
    assert one == two
    assert sum(len(c) for c in one) == 250


# offspring laws ------------------------------------------------------------------------

def test_offspring_law_values():
    law = OffspringLaw.geometric(Fraction(1, 3))
    assert law.pmf(0) == Fraction(2, 3)
    assert law.pmf(1) == Fraction(2, 9)
    assert law.mean == Fraction(1, 2)
    star = law.special_of()
    assert star.pmf(0) == law.pmf(1) / law.mean == Fraction(4, 9)
    for n in range(6):
        assert star.pmf(n) == (n + 1) * law.pmf(n + 1) / law.mean
    assert sum(star.pmf(n) for n in range(200)) == pytest.approx(1.0, abs=1e-30)
    with pytest.raises(DomainError):
        OffspringLaw(Fraction(2, 3))


def test_critical_special_law_gives_uipt_radius_two():
    # radius-2 ball with K top vertices: the spine vertex has K children
    star = OffspringLaw.critical().special_of()
    for kk in range(1, 7):
        assert star.pmf(kk - 1) == uipt_ball(BallSpec(PlanarTree.star(kk))).value


def test_poisson_inverse():
    assert list(poisson_inverse(np.array([0.1, 0.5, 0.99]), 1.0)) == [0, 1, 4]
    draws = poisson_inverse(rng(1).random(20000), 2.5)
    assert abs(draws.mean() - 2.5) < 3 * math.sqrt(2.5 / 20000)
    with pytest.raises(DomainError):
        poisson_inverse(0.5, 31.0)


def test_uniform_composition_patterns():
    g = rng(2)
    n = 20000
    counts = Counter(tuple(uniform_composition(3, 2, g)) for _ in range(n))
    assert set(counts) == {(1, 2), (2, 1)}
    assert within(counts[(2, 1)], n, 0.5)


@given(st.integers(1, 30), st.integers(0, 30), st.integers(0, 2 ** 32 - 1))
def test_uniform_composition_is_a_composition(parts, extra, seed):
    comp = uniform_composition(parts + extra, parts, np.random.default_rng(seed))
    assert comp.size == parts
    assert comp.sum() == parts + extra
    assert comp.min() >= 1


# Galton-Watson balls -------------------------------------------------------------------

def test_bgw_depth_one_is_single_edge():
    g = rng(3)
    assert all(sample_bgw_to_depth(OffspringLaw.critical(), 1, g) == EDGE for _ in range(50))


def test_bgw_leaf_probability():
    g = rng(4)
    n = 20000
    law = OffspringLaw.geometric(Fraction(1, 3))
    balls = Counter(sample_bgw_to_depth(law, 2, g) for _ in range(n))
    assert within(balls[EDGE], n, 2 / 3)
    assert within(balls[PATH2], n, 2 / 9)


def test_bgw_critical_mean_level_size():
    g = rng(5)
    n = 100_000
    sizes = np.zeros((n, 6))
    for i in range(n):
        lv = sample_bgw_to_depth(OffspringLaw.critical(), 6, g).levels
        sizes[i, :len(lv)] = lv
    mean = sizes.mean(axis=0)
    se = sizes.std(axis=0, ddof=1) / math.sqrt(n)
    assert mean[0] == 1
    assert np.all(np.abs(mean[1:] - 1) < 3 * se[1:])


def test_bgw_size_guard():
    with pytest.raises(SizeGuardError):
        # guard of 50 vertices on a critical tree of depth 200 trips quickly
        g = rng(6)
        for _ in range(1000):
            sample_bgw_to_depth(OffspringLaw.critical(), 200, g, max_vertices=50)


# single spine (heights rewarded or neutral) ------------------------------------------------

def test_single_spine_radius_one():
    spine, tree = sample_single_spine_ball(1, -math.log(2), rng(7))
    assert tree == EDGE and spine.tree == EDGE


def test_single_spine_degree_law():
    g = rng(8)
    n = 20000
    hits = sum(sample_single_spine_ball(2, -math.log(2), g)[1] == PATH2 for _ in range(n))
    assert within(hits, n, 4 / 9)


def test_single_spine_mean_level_size():
    g = rng(9)
    n = 4000
    prof = np.zeros((n, 12))
    for i in range(n):
        lv = sample_single_spine_ball(12, -math.log(2), g)[1].levels
        prof[i, :len(lv)] = lv
    for r in (2, 5, 12):
        col = prof[:, r - 1]
        assert abs(col.mean() - (3 - 2.0 ** (2 - r))) < 3 * col.std(ddof=1) / math.sqrt(n)


def test_single_spine_branch_size_law():
    # a non-spine child of i1 roots a geometric(1/3) tree: P(n vertices) = C_{n-1} x^(n-1) (1-x)^n
    g = rng(10)
    x = 1 / 3
    sizes = []
    while len(sizes) < 20000:
        sp, tree = sample_single_spine_ball(8, -math.log(2), g)
        kids = tree.nested
        spine_at = sp.positions[1][0]
        others = [c for j, c in enumerate(kids) if j != spine_at]
        if others:
            sizes.append(PlanarTree.from_nested(others[0]).size)  # edges below + its own edge
    counts = Counter(sizes)
    n = len(sizes)
    for v in range(1, 7):
        p = catalan(v - 1) * x ** (v - 1) * (1 - x) ** v
        assert within(counts[v], n, p)


# spine for penalised heights -------------------------------------------------------------

def test_spine_ball_pos_shape():
    g = rng(11)
    assert sample_spine_ball_pos(1, 1.0, g).tree == EDGE
    for _ in range(200):
        sb = sample_spine_ball_pos(6, 1.0, g)
        assert sb.level_sizes[0] == 1
        assert all(c > 0 for level in sb.tree.counts for c in level)
        assert sb.tree.height == 6
        assert list(np.diff(sb.level_sizes)) == list(sb.increments)
    with pytest.raises(DomainError):
        sample_spine_ball_pos(3, -1.0, g)


def test_spine_level_law():
    g = rng(12)
    n = 20000
    r = 5
    tops = np.array([sample_spine_ball_pos(r, 1.0, g).level_sizes[-1] for _ in range(n)])
    assert samplers_gof(tops, r, 1.0) > 0.01
    shifted = np.array([sample_spine_ball_pos(r, 1.2, g).level_sizes[-1] for _ in range(n)])
    assert samplers_gof(shifted, r, 1.0) < 1e-6


def samplers_gof(tops, r, mu):
    from hwtrees.analysis import poisson_gof
    return poisson_gof(tops, r, mu).p


# full local ball -----------------------------------------------------------------------

def test_local_ball_radius_one():
    for mu in (-0.5, 0.0, 1.0):
        assert sample_local_ball(1, mu, rng(13)) == EDGE


def test_local_ball_two_path_frequency():
    g = rng(14)
    n = 20000
    hits = sum(sample_local_ball(2, 1.0, g) == PATH2 for _ in range(n))
    assert within(hits, n, xi_ball(BallSpec(PATH2), 1.0).value)


def test_local_ball_radius_two_law_mu1():
    g = rng(15)
    n = 20000
    counts = Counter(sample_local_ball(2, 1.0, g).levels[-1] for _ in range(n))
    for kk in range(1, 6):
        p = xi_ball(BallSpec(PlanarTree.star(kk)), 1.0).value
        assert within(counts[kk], n, p)


def test_local_ball_spine_positions_are_alive():
    g = rng(16)
    for _ in range(100):
        sp, tree = samplers.sample_local_ball_detailed(5, 1.0, g)
        from hwtrees.trees import spine_of_ball
        assert spine_of_ball(tree, sp.positions[-1]) == sp.tree


def test_truncation_idempotence():
    # B_3 of a radius-5 sample has the law of a radius-3 sample
    g = rng(17)
    n = 6000
    a = Counter(ball(sample_local_ball(5, 1.0, g), 3) for _ in range(n))
    b = Counter(sample_local_ball(3, 1.0, g) for _ in range(n))
    common = [k for k in set(a) | set(b) if a[k] + b[k] >= 20]
    table = np.array([[a[k] for k in common] + [n - sum(a[k] for k in common)],
                      [b[k] for k in common] + [n - sum(b[k] for k in common)]])
    assert stats.chi2_contingency(table)[1] > 0.001


@pytest.mark.parametrize("mu", [-math.log(2), 0.0, 1.0])
def test_level_profiles_match_tree_sampler(mu):
    n, r = 3000, 10
    g = rng(18)
    fast = sample_level_profiles(mu, r, n, g)
    slow = np.array([sample_local_ball(r, mu, g).levels for _ in range(n)])
    for j in (1, 4, 9):
        res = stats.mannwhitneyu(fast[:, j], slow[:, j])
        assert res.pvalue > 0.001


# exact finite size -------------------------------------------------------------------------

def test_exact_height_examples():
    g = rng(19)
    for n in (1, 4, 9):
        assert sample_uniform_exact_height(n, n, TABLES, g) == PlanarTree.path(n)
    assert sample_uniform_exact_height(3, 2, TABLES, g) == decode("()()")
    with pytest.raises(ValueError):
        sample_uniform_exact_height(4, 1, TABLES, g)


def test_exact_height_uniform():
    g = rng(20)
    n = 15000
    sampler = ExactHeightSampler(TABLES)
    counts = Counter(sampler.tree(4, 3, g) for _ in range(n))
    assert len(counts) == 3
    assert all(within(c, n, 1 / 3) for c in counts.values())


def test_exact_height_support_matches_census():
    g = rng(21)
    sampler = ExactHeightSampler(TABLES)
    for m in (3, 4):
        seen = {sampler.tree(7, m, g) for _ in range(3000)}
        expected = {t for t in enumerate_all(7) if t.height == m}
        assert seen == expected


def test_finite_exact_law():
    g = rng(22)
    assert sample_finite_exact(1, TABLES, g, mu=0.3) == EDGE
    t = Fraction(2)
    trees = enumerate_all(6)
    z = sum(t ** tr.height for tr in trees)
    n = 30000
    sampler = ExactHeightSampler(TABLES)
    counts = Counter(sample_finite_exact(6, TABLES, g, t=t, sampler=sampler) for _ in range(n))
    obs = np.array([counts[tr] for tr in trees])
    exp = np.array([float(t ** tr.height / z) for tr in trees]) * n
    assert stats.chisquare(obs, exp).pvalue > 0.001


def test_finite_exact_float_and_rational_weights_agree():
    a = samplers.height_weights(10, TABLES, t=Fraction(1, 2))
    b = samplers.height_weights(10, TABLES, mu=math.log(2))
    assert [x / a[-1] for x in a] == pytest.approx(b, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 16), st.integers(0, 2 ** 32 - 1))
def test_exact_height_sampler_hits_requested_class(n, seed):
    g = np.random.default_rng(seed)
    heights = [m for m in range(1, n + 1) if TABLES.b(m, n)]
    m = heights[seed % len(heights)]
    tree = sample_uniform_exact_height(n, m, TABLES, g)
    assert tree.size == n and tree.height == m
