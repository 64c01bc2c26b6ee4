from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hwtrees import partition
from hwtrees.errors import CapError, DomainError
from hwtrees.partition import (WeightParams, asymptote_neg, log_asymptote_pos, log_prefactor,
                               log_z_scaled_eval, prefactor_regression, residue_fit,
                               residue_numeric, saddle_params, z_eval, z_poly, z_scaled_eval)
from hwtrees.series import build_tables, catalan
from hwtrees.trees import enumerate_all

TABLES = build_tables(201)


def brute_z(n: int, t):
    heights = Counter(tree.height for tree in enumerate_all(n))
    return sum(c * t ** h for h, c in heights.items())


@pytest.mark.parametrize("n, poly", [(1, [1]), (3, [0, 1, 1]), (4, [0, 1, 3, 1])])
def test_z_poly(n, poly):
    assert z_poly(n, TABLES) == poly


def test_z_eval_examples():
    assert z_eval(3, TABLES, t=Fraction(1, 2)) == Fraction(3, 8)
    for n in (1, 5, 40):
        assert z_eval(n, TABLES, t=1) == catalan(n - 1)
        assert float(z_eval(n, TABLES, mu=0.0)) == pytest.approx(catalan(n - 1), rel=1e-15)
    assert float(z_eval(1, TABLES, mu=0.7)) == pytest.approx(math.exp(-0.7), rel=1e-15)
    with pytest.raises(CapError):
        z_eval(202, TABLES, t=1)


@pytest.mark.parametrize("n", range(1, 11))
@pytest.mark.parametrize("t", [Fraction(2), Fraction(1, 2), Fraction(11, 10), Fraction(1)])
def test_z_eval_matches_enumeration(n, t):
    assert z_eval(n, TABLES, t=t) == brute_z(n, t)


def test_z_scaled_examples():
    exact = float(z_eval(50, TABLES, mu=1.0)) / 4.0 ** 50
    assert z_scaled_eval(50, 1.0) == pytest.approx(exact, rel=1e-6)
    assert z_scaled_eval(3, 1.0) == pytest.approx((math.exp(-2) + math.exp(-3)) / 64, rel=1e-13)
    # a large mu leaves the lowest height, the star of height 2
    assert z_scaled_eval(10, 30.0) == pytest.approx(math.exp(-60) / 4 ** 10, rel=1e-9)
    with pytest.raises(DomainError):
        log_z_scaled_eval(10, -1.0)


@pytest.mark.parametrize("n", [2, 7, 30, 120, 200])
@pytest.mark.parametrize("mu", [0.05, 0.5, 1.0, 3.0])
def test_closed_form_path_matches_tables(n, mu):
    exact = float(z_eval(n, TABLES, mu=mu) / 4 ** n)
    assert z_scaled_eval(n, mu) == pytest.approx(exact, rel=1e-11)


def test_weight_params():
    p = WeightParams.from_t(Fraction(2))
    assert p.regime == "negative" and p.exact
    assert p.g_c == Fraction(2, 9) and p.x_c == Fraction(1, 3) and p.m_sub == Fraction(1, 2)
    assert WeightParams.from_mu(0.0).regime == "zero"
    q = WeightParams.from_mu(1.0)
    assert q.regime == "positive" and q.g_c is None and not q.exact
    with pytest.raises(DomainError):
        WeightParams.from_t(0)


# heights rewarded ---------------------------------------------------------------

def test_residue_k2_frozen():
    # independent derivation: f(g_c) = 3/4, g_c = 2/9, X = 1/3 and c'(g_c) = 81/8 give 1/81
    neg = residue_numeric(2.0)
    assert neg.product == pytest.approx(0.75, rel=1e-14)
    assert neg.residue == pytest.approx(1 / 81, rel=1e-13)
    assert neg.tail_bound < 1e-50


def test_residue_product_trivial_limit():
    assert residue_numeric(1e9).product == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("k", [Fraction(2), Fraction(3), Fraction(3, 2)])
def test_residue_analytic_matches_fit(k):
    analytic = residue_numeric(float(k)).residue
    fit, last = residue_fit(k, TABLES, 100, 200)
    assert fit == pytest.approx(analytic, rel=1e-4)


def test_ratio_tends_to_inverse_critical_coupling():
    k = Fraction(2)
    gaps = []
    for n in (50, 100, 200):
        ratio = z_eval(n + 1, TABLES, t=k) / z_eval(n, TABLES, t=k)
        gaps.append(abs(float(ratio) - 4.5))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-6
    assert 1 / WeightParams.from_t(k).g_c == Fraction(9, 2)


def test_asymptote_neg_trend():
    neg = residue_numeric(2.0)
    errs = [abs(float(asymptote_neg(n, neg) / z_eval(n, TABLES, mu=-math.log(2))) - 1)
            for n in (50, 100, 200)]
    assert errs[0] > errs[1] > errs[2]


# heights penalised -------------------------------------------------------------

def test_saddle_constants_mu1():
    sp = saddle_params(1000, 1.0)
    assert sp.A == pytest.approx(4.0538515, abs=1e-7)
    assert sp.B == pytest.approx(0.5550277, abs=1e-7)
    assert math.pi ** 2 / sp.x0 ** 3 == pytest.approx(0.5, rel=1e-14)
    assert sp.t0 == pytest.approx((2 * math.pi ** 2 * 1000) ** (1 / 3), rel=0.05)
    assert 1.0 == pytest.approx(2 * math.pi * 1000 * math.tan(math.pi / sp.t0) / sp.t0 ** 2, rel=1e-10)
    assert math.exp(log_prefactor(1.0)) == pytest.approx(2.044, abs=1e-3)


def test_positive_asymptotics_trend():
    errs = [abs(math.exp(log_z_scaled_eval(n, 1.0) - log_asymptote_pos(n, 1.0)) - 1)
            for n in (10 ** 3, 10 ** 4, 10 ** 5)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 0.10


def test_prefactor_regression():
    c, _ = prefactor_regression([10 ** 3, 3 * 10 ** 3, 10 ** 4, 3 * 10 ** 4, 10 ** 5], 1.0)
    assert c == pytest.approx(log_prefactor(1.0), abs=0.05)
    with pytest.raises(ValueError):
        prefactor_regression([1000], 1.0)


def test_truncated_inner_sums():
    full = partition.log_w_scaled(400, 1.0)
    few = partition.log_w_scaled(400, 1.0, k_terms=3)
    assert few <= full
    assert few == pytest.approx(full, abs=1e-6)


# properties -----------------------------------------------------------------------

@settings(max_examples=40)
@given(st.integers(1, 60), st.fractions(Fraction(1, 20), Fraction(5)))
def test_exact_and_float_paths_agree(n, t):
    exact = z_eval(n, TABLES, t=t)
    approx = z_eval(n, TABLES, mu=-math.log(t))
    assert float(approx) == pytest.approx(float(exact), rel=1e-12)


@settings(max_examples=40)
@given(st.integers(2, 80), st.fractions(Fraction(1, 10), Fraction(4)), st.fractions(Fraction(1, 10), Fraction(4)))
def test_z_is_increasing_in_t(n, a, b):
    lo, hi = min(a, b), max(a, b)
    assert z_eval(n, TABLES, t=lo) <= z_eval(n, TABLES, t=hi)
