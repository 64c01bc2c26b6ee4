"""Ball masses of the local limits and of the finite-size measures.

A ball is given by its base tree T0 of height r; it contains every tree
whose radius-r ball equals T0.  Its mass depends on |T0|, r and the number
K of vertices at height r.  Rational arguments give exact results.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from typing import Callable

import mpmath

from .errors import CapError, DomainError, ShapeError
from .partition import poly_eval
from .series import CoeffTables, catalan, g_crit, x_crit
from .trees import PlanarTree

SUMRULE_CUTOFF_CAP = 400
DECOMP_K_CAP = 20


@dataclass(frozen=True)
class BallSpec:
    base: PlanarTree

    @property
    def r(self) -> int:
        return self.base.height

    @property
    def k_top(self) -> int:
        return self.base.levels[-1]

    @property
    def size(self) -> int:
        return self.base.size


@dataclass(frozen=True)
class MeasureValue:
    value: object
    kind: str


def _exact(*xs) -> bool:
    return all(isinstance(x, (int, Fraction)) for x in xs)


def _exp_neg(mu, t=None):
    if t is not None:
        return t
    if isinstance(mu, Fraction):
        return math.exp(-float(mu))
    return math.exp(-mu)


# mu < 0 ---------------------------------------------------------------------

def lambda_value(size: int, r: int, k_top: int, k, m_trunc: int | None = None):
    if k <= 1:
        raise DomainError(f"k={k} must exceed 1")
    g = g_crit(k)
    if m_trunc is None:
        x = x_crit(k)
    else:
        x = sum(catalan(s - 1) * g ** s for s in range(1, m_trunc + 1))
    if not _exact(k):
        g, x = float(g), float(x)
    return k_top * k ** (r - 1) * g ** (size - k_top) * x ** (k_top - 1)


def lambda_ball(spec: BallSpec, k, m_trunc: int | None = None) -> MeasureValue:
    """Limit mass of a ball when heights are rewarded (k = e^-mu > 1)."""
    value = lambda_value(spec.size, spec.r, spec.k_top, k, m_trunc)
    return MeasureValue(value, "lambda" if m_trunc is None else "lambda_truncated")


def uipt_ball(spec: BallSpec) -> MeasureValue:
    """Ball mass of the uniform infinite planar tree (k = 1)."""
    g, x = Fraction(1, 4), Fraction(1, 2)
    value = spec.k_top * g ** (spec.size - spec.k_top) * x ** (spec.k_top - 1)
    return MeasureValue(value, "uipt")


# mu > 0 ---------------------------------------------------------------------

def _rate_poly(k_top: int, mu):
    """sum_R binom(K,R) mu^(R-1)/(R-1)!."""
    if _exact(mu):
        return sum(Fraction(math.comb(k_top, R)) * Fraction(mu) ** (R - 1) / math.factorial(R - 1)
                   for R in range(1, k_top + 1))
    return math.fsum(math.comb(k_top, R) * mu ** (R - 1) / math.factorial(R - 1)
                     for R in range(1, k_top + 1))


def xi_value(size: int, r: int, k_top: int, mu, t=None):
    if mu <= 0:
        raise DomainError(f"mu={mu} must be positive")
    e = _exp_neg(mu, t)
    scale = Fraction(2 ** (k_top + 1), 4 ** size)
    if not _exact(e, mu):
        scale = float(scale)
    return e ** (r - 1) * scale * _rate_poly(k_top, mu)


def xi_ball(spec: BallSpec, mu, t=None) -> MeasureValue:
    """Limit mass of a ball when heights are penalised (mu > 0).

    Pass a rational ``t`` together with a rational ``mu`` for exact values,
    ``t`` standing in for e^-mu.
    """
    return MeasureValue(xi_value(spec.size, spec.r, spec.k_top, mu, t), "xi")


def _check_spine_shape(tree: PlanarTree) -> None:
    for j, level in enumerate(tree.counts):
        if 0 in level:
            raise ShapeError(f"leaf at height {j + 1} below the top level {tree.height}")


def spine_ball_mass(tree: PlanarTree, mu, t=None) -> MeasureValue:
    """Mass of a spine ball: all leaves at the top level."""
    if mu <= 0:
        raise DomainError(f"mu={mu} must be positive")
    _check_spine_shape(tree)
    r, R = tree.height, tree.levels[-1]
    e = _exp_neg(mu, t)
    if _exact(e, mu):
        value = e ** (r - 1) * Fraction(mu) ** (R - 1) / math.factorial(R - 1)
    else:
        value = e ** (r - 1) * mu ** (R - 1) / math.factorial(R - 1)
    return MeasureValue(value, "spine")


def poisson_level_pmf(r: int, R: int, mu: float) -> float:
    """P(|D_r| = R) for the spine: R - 1 is Poisson((r-1) mu)."""
    if r < 1 or R < 1:
        raise ValueError("r, R must be >= 1")
    lam = (r - 1) * mu
    if lam == 0:
        return 1.0 if R == 1 else 0.0
    return math.exp(-lam + (R - 1) * math.log(lam) - math.lgamma(R))


def rho_ball_mass(spec: BallSpec) -> MeasureValue:
    """Ball mass under the critical geometric Galton-Watson tree."""
    return MeasureValue(Fraction(2 ** (spec.k_top + 1), 4 ** spec.size), "rho_ball")


def rho_mass(tree: PlanarTree) -> MeasureValue:
    return MeasureValue(Fraction(2, 4 ** tree.size), "rho_mass")


# finite N ---------------------------------------------------------------------

def _poly_mul(a: list[int], b: list[int], deg: int) -> list[int]:
    out = [0] * (deg + 1)
    for i, x in enumerate(a):
        if x:
            for j in range(min(len(b), deg + 1 - i)):
                out[i + j] += x * b[j]
    return out


def _poly_pow(p: list[int], e: int, deg: int) -> list[int]:
    result = None
    while e:
        if e & 1:
            result = p if result is None else _poly_mul(result, p, deg)
        e >>= 1
        if e:
            p = _poly_mul(p, p, deg)
    return result


def _tuple_counts(k_top: int, total: int, tables: CoeffTables) -> list[int]:
    """Coefficients by max height m of K-tuples of trees with total size S."""
    prev = 0
    out = []
    for m in range(1, total + 1):
        if k_top == 1:
            h = tables.a(m, total)
        else:
            xm = [tables.a(m, s) for s in range(total + 1)]
            h = _poly_pow(xm, k_top, total)[total]
        out.append(h - prev)
        prev = h
    return out


def nuN_ball_exact(spec: BallSpec, n: int, tables: CoeffTables, mu=None, t=None,
                   dps: int = 50) -> MeasureValue:
    """Mass of a ball under the height-weighted uniform measure on size N."""
    if n < spec.size:
        return MeasureValue(Fraction(0) if t is not None and _exact(t) else 0.0, "nuN_exact")
    if n > tables.n_max:
        raise CapError(f"N={n} exceeds table cap {tables.n_max}")
    if t is None:
        if mu is None:
            raise ValueError("give mu or t")
        with mpmath.workdps(dps):
            t = mpmath.exp(-mpmath.mpf(mu))
    total = n - spec.size + spec.k_top
    coeffs = _tuple_counts(spec.k_top, total, tables)
    num = poly_eval(coeffs, t, dps)
    den = poly_eval(tables.column(n), t, dps)
    if isinstance(num, Fraction):
        value = t ** (spec.r - 1) * num / den
    else:
        with mpmath.workdps(dps):
            value = float(t ** (spec.r - 1) * num / den)
    return MeasureValue(value, "nuN_exact")


# sum rules -------------------------------------------------------------------

def ball_classes(r: int, size_cutoff: int, start: PlanarTree | None = None) -> dict:
    """Count trees of height exactly r extending ``start`` by (size, K).

    Only the size and the top-level count matter for the limit masses, so
    extensions are counted by class: adding K children under K' top
    vertices can be done in binom(K + K' - 1, K' - 1) ways.
    """
    if size_cutoff > SUMRULE_CUTOFF_CAP:
        raise CapError(f"cutoff {size_cutoff} exceeds {SUMRULE_CUTOFF_CAP}")
    start = start or PlanarTree.single_edge()
    if start.height > r:
        raise ValueError("start tree is higher than r")
    classes = {(start.size, start.levels[-1]): 1}
    for _ in range(r - start.height):
        nxt: dict = {}
        for (size, kk), cnt in classes.items():
            for k_new in range(1, size_cutoff - size + 1):
                key = (size + k_new, k_new)
                nxt[key] = nxt.get(key, 0) + cnt * math.comb(k_new + kk - 1, kk - 1)
        classes = nxt
    return {key: v for key, v in classes.items() if key[0] <= size_cutoff}


def _mass_fn(params) -> Callable[[int, int, int], object]:
    if params.regime == "negative":
        return lambda size, r, kk: lambda_value(size, r, kk, params.t)
    if params.regime == "positive":
        mu = params.mu
        t = params.t if params.exact else None
        if t is not None:
            mu = Fraction(mu).limit_denominator(10 ** 12)
        return lambda size, r, kk: xi_value(size, r, kk, mu, t)
    return lambda size, r, kk: kk * Fraction(1, 4) ** (size - kk) * Fraction(1, 2) ** (kk - 1)


def sumrule_check(r: int, params, size_cutoff: int) -> tuple[object, int]:
    """Total limit mass of the balls of height r with at most size_cutoff edges."""
    if r < 1:
        raise ValueError("r must be >= 1")
    mass = _mass_fn(params)
    classes = ball_classes(r, size_cutoff)
    total = 0
    n_terms = 0
    for (size, kk), cnt in sorted(classes.items()):
        total += cnt * mass(size, r, kk)
        n_terms += cnt
    return total, n_terms


def refinement_sum(base: PlanarTree, r: int, params, size_cutoff: int):
    """Mass of all height-r balls inside the ball of ``base``."""
    mass = _mass_fn(params)
    classes = ball_classes(r, size_cutoff, start=base)
    return sum(cnt * mass(size, r, kk) for (size, kk), cnt in sorted(classes.items()))


def kstar_series(params, tol: float = 1e-17, max_terms: int = 10_000) -> float:
    """Sum of the radius-2 masses over all K-stars, to convergence."""
    mass = _mass_fn(params)
    total = 0.0
    for kk in range(1, max_terms):
        term = float(mass(kk + 1, 2, kk))
        total += term
        if kk > 2 and term < tol * total:
            return total
    raise RuntimeError("K-star series did not converge")


# decomposition of the positive-mu ball -----------------------------------------

def decomposition_weights(spec: BallSpec, mu, t=None) -> dict[frozenset, object]:
    """Weights of the events 'exactly the top vertices in D are infinite'."""
    if mu <= 0:
        raise DomainError(f"mu={mu} must be positive")
    kk = spec.k_top
    if kk > DECOMP_K_CAP:
        raise CapError(f"K={kk} exceeds {DECOMP_K_CAP}")
    e = _exp_neg(mu, t)
    exact = _exact(e, mu)
    base = e ** (spec.r - 1) * (Fraction(2 ** (kk + 1), 4 ** spec.size) if exact
                                 else 2 ** (kk + 1) / 4 ** spec.size)
    out = {}
    for d in range(1, kk + 1):
        w = base * (Fraction(mu) if exact else mu) ** (d - 1) / math.factorial(d - 1)
        for subset in combinations(range(kk), d):
            out[frozenset(subset)] = w
    return out


def dirichlet_moment(ms) -> Fraction:
    """Integral of prod x_i^m_i over the simplex, normalised to total mass 1."""
    ms = list(ms)
    n = len(ms)
    if n < 1:
        raise ValueError("need at least one exponent")
    num = math.factorial(n - 1) * math.prod(math.factorial(m) for m in ms)
    return Fraction(num, math.factorial(sum(ms) + n - 1))


def decomposition_mass(spec: BallSpec, branches: list[PlanarTree], mu, t) -> Fraction:
    """Mass of T0 with ``branches`` grafted at its top vertices, assembled
    from the decomposition into infinite and finite branches.

    All branches must share one height h.  The simplex integral then
    reduces to Dirichlet moments, and the result is exact for rational
    ``mu`` and ``t`` (``t`` standing in for e^-mu).
    """
    kk = spec.k_top
    if len(branches) != kk:
        raise ValueError(f"need {kk} branches")
    h = branches[0].height
    if any(b.height != h for b in branches):
        raise ValueError("branches must share one height")
    mu, t = Fraction(mu), Fraction(t)
    tops = [b.levels[-1] for b in branches]
    rho = [rho_ball_mass(BallSpec(b)).value for b in branches]
    total = Fraction(0)
    for subset, w in decomposition_weights(spec, mu, t).items():
        inside = sorted(subset)
        finite = math.prod((rho[i] for i in range(kk) if i not in subset), start=Fraction(1))
        integral = Fraction(0)
        for rs in product(*(range(1, tops[i] + 1) for i in inside)):
            exps = [R - 1 for R in rs]
            coef = math.prod((Fraction(math.comb(tops[i], R), math.factorial(R - 1))
                              for i, R in zip(inside, rs)), start=Fraction(1))
            integral += coef * mu ** sum(exps) * dirichlet_moment(exps)
        infinite = t ** (h - 1) * math.prod((rho[i] for i in inside), start=Fraction(1)) * integral
        total += w * finite * infinite
    return total


# two-type branching identification -----------------------------------------------

def bgw_two_type_mass(tree: PlanarTree, p: Callable[[int], object],
                      ps: Callable[[int], object]):
    """Ball mass under a two-type Galton-Watson tree with one special line.

    Summed over the top vertices i: normal vertices below the top level with
    n children weigh p(n), the ancestors of i with n children weigh ps(n - 1).
    """
    r = tree.height
    cache: dict[tuple[int, int], object] = {}

    def normal(node: tuple, depth: int):
        if depth == r:
            return 1
        key = (id(node), depth)
        if key not in cache:
            w = p(len(node))
            for c in node:
                w *= normal(c, depth + 1)
            cache[key] = w
        return cache[key]

    def special(node: tuple, depth: int):
        if depth == r:
            return 1
        ws = [normal(c, depth + 1) for c in node]
        total = 0
        for j, c in enumerate(node):
            others = math.prod((w for i, w in enumerate(ws) if i != j), start=1)
            total += others * special(c, depth + 1)
        return ps(len(node) - 1) * total

    return special(tree.nested, 1)
