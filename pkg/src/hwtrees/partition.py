"""Height-weighted partition functions Z_N = sum over trees of t^height, t = e^-mu.

Exact values come from the coefficient tables.  For mu > 0 and large N the
4^-N scaled value is assembled from the closed-form coefficients in log
space; for mu < 0 the growth rate is governed by a simple pole at the
critical coupling, whose residue is computed two ways.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np
from scipy.optimize import bisect

from .errors import CapError, DomainError
from .series import (CoeffTables, c_eval, c_prime, g_crit, log_a_closed,
                     x_eval, xm_eval, x_crit, _log_a_terms)

Number = float | Fraction


@dataclass(frozen=True)
class WeightParams:
    mu: float
    t: Number  # e^-mu, possibly a rational surrogate

    @classmethod
    def from_mu(cls, mu: float) -> "WeightParams":
        return cls(float(mu), math.exp(-mu))

    @classmethod
    def from_t(cls, t) -> "WeightParams":
        if t <= 0:
            raise DomainError("t must be positive")
        if isinstance(t, (int, Fraction)):
            t = Fraction(t)
        return cls(-math.log(t), t)

    @property
    def k(self) -> Number:
        return self.t

    @property
    def exact(self) -> bool:
        return isinstance(self.t, Fraction)

    @property
    def regime(self) -> str:
        if self.t > 1:
            return "negative"
        if self.t == 1:
            return "zero"
        return "positive"

    @property
    def g_c(self) -> Number | None:
        return g_crit(self.t) if self.t >= 1 else None

    @property
    def x_c(self) -> Number | None:
        return x_crit(self.t) if self.t >= 1 else None

    @property
    def m_sub(self) -> Number | None:
        """Mean offspring of the subcritical branching law, equal to 1/k."""
        return 1 / self.t if self.t >= 1 else None


def z_poly(n: int, tables: CoeffTables) -> list[int]:
    if n > tables.n_max:
        raise CapError(f"N={n} exceeds table cap {tables.n_max}")
    return tables.column(n)


def poly_eval(coeffs, t, dps: int = 50):
    """sum coeffs[j] t^(j+1); exact for rational t, mpmath otherwise."""
    if isinstance(t, (int, Fraction)):
        t = Fraction(t)
        total = Fraction(0)
    else:
        with mpmath.workdps(dps):
            t = mpmath.mpf(t)
            total = mpmath.mpf(0)
            for c in reversed(coeffs):
                total = (total + c) * t
            return +total
    for c in reversed(coeffs):
        total = (total + c) * t
    return total


def z_eval(n: int, tables: CoeffTables, mu: float | None = None, t=None, dps: int = 50):
    """Z_N at t = e^-mu, or at a supplied t (exact when rational)."""
    if t is None:
        if mu is None:
            raise ValueError("give mu or t")
        with mpmath.workdps(dps):
            t = mpmath.exp(-mpmath.mpf(mu))
    return poly_eval(z_poly(n, tables), t, dps)


def _log_catalan(n: int) -> float:
    return math.lgamma(2 * n + 1) - math.lgamma(n + 1) - math.lgamma(n + 2)


def log_w_scaled(n: int, mu: float, k_terms: int | None = None) -> float:
    """log of W_N 4^-N = log sum_m e^-mu m A_{m,N} 4^-N, closed form.

    The summand is log-concave in m, so the sum starts at the saddle and
    walks outwards until terms drop below 1e-18 of the running total.
    ``k_terms`` keeps only the first terms of each inner sum.
    """
    def term(m: int) -> float:
        if m < 2:
            return -math.inf
        if k_terms is None:
            return log_a_closed(m, n) - mu * m
        logs = _log_a_terms(m, n)[:k_terms]
        return float(np.logaddexp.reduce(logs)) - mu * m

    cut = math.log(1e-18)
    start = min(n, max(2, round(saddle_params(n, mu).t0)))
    logs = [term(start)]
    total = logs[0]
    for step in (-1, 1):
        m = start + step
        while 2 <= m <= n:
            v = term(m)
            total = np.logaddexp(total, v)
            logs.append(v)
            if v < total + cut:
                break
            m += step
    # re-sum in sorted order so the result does not depend on walk order
    return float(np.logaddexp.reduce(np.sort(np.array(logs))))


def log_z_scaled_eval(n: int, mu: float) -> float:
    if mu <= 0:
        raise DomainError("closed-form path needs mu > 0")
    if n < 2:
        raise DomainError("closed-form path needs N >= 2")
    t = math.exp(-mu)
    main = math.log1p(-t) + log_w_scaled(n, mu)
    tail = _log_catalan(n - 1) - n * math.log(4) - mu * (n + 1)
    return float(np.logaddexp(main, tail))


def z_scaled_eval(n: int, mu: float, tables: CoeffTables | None = None) -> float:
    """Z_N 4^-N."""
    if mu <= 0:
        if tables is None:
            raise DomainError("mu <= 0 needs exact tables")
        with mpmath.workdps(50):
            return float(z_eval(n, tables, mu=mu) / mpmath.mpf(4) ** n)
    return math.exp(log_z_scaled_eval(n, mu))


# mu < 0: pole at the critical coupling ------------------------------------

@dataclass(frozen=True)
class NegativeAsymptotics:
    k: float
    g_c: float
    x_c: float
    product: float      # f(g_c), truncated
    residue: float
    tail_bound: float   # relative bound on the residue truncation error
    m_cut: int


def residue_numeric(k: float, m_cut: int = 200) -> NegativeAsymptotics:
    """Residue r with Z_N ~ r g_c^-(N+1).

    r = k (g_c f)^2 / ((1 - X) c'(g_c)), f the product of (1-X)/(1-X_l).
    """
    if k <= 1:
        raise DomainError(f"k={k} must exceed 1")
    if m_cut < 1:
        raise ValueError("m_cut must be >= 1")
    k = float(k)
    g = float(g_crit(k))
    x = x_eval(g)
    log_f = math.fsum(math.log((1 - x) / (1 - xm_eval(g, l))) for l in range(1, m_cut + 1))
    f = math.exp(log_f)
    residue = k * (g * f) ** 2 / ((1 - x) * c_prime(g))
    # |X_l - X| <= g c^l with c = c(g_c) = 1/k
    c = c_eval(g)
    delta = g * c ** (m_cut + 1) / (1 - x)
    log_tail = delta / ((1 - c) * (1 - delta))
    tail = math.expm1(2 * log_tail)
    return NegativeAsymptotics(k, g, x, f, residue, tail, m_cut)


def residue_fit(k, tables: CoeffTables, n_lo: int = 100, n_hi: int = 200,
                dps: int = 60) -> tuple[float, float]:
    """Estimate the residue from exact Z_N g_c^(N+1) over [n_lo, n_hi].

    Returns (Aitken extrapolation of the last three values, last value).
    """
    if k <= 1:
        raise DomainError(f"k={k} must exceed 1")
    with mpmath.workdps(dps):
        if isinstance(k, (int, Fraction)):
            kk = Fraction(k)
            g = mpmath.mpf(g_crit(kk).numerator) / g_crit(kk).denominator
            t = kk
        else:
            kk = mpmath.mpf(k)
            g = kk / (1 + kk) ** 2
            t = float(k)
        vals = []
        for n in range(n_lo, n_hi + 1):
            z = z_eval(n, tables, t=t, dps=dps)
            if isinstance(z, Fraction):
                z = mpmath.mpf(z.numerator) / z.denominator
            vals.append(z * g ** (n + 1))
        a, b, c = vals[-3:]
        den = c - 2 * b + a
        est = c - (c - b) ** 2 / den if den != 0 else c
        return float(est), float(vals[-1])


def asymptote_neg(n: int, params: NegativeAsymptotics):
    with mpmath.workdps(30):
        return params.residue * mpmath.mpf(params.g_c) ** (-(n + 1))


# mu > 0: saddle point -------------------------------------------------------

@dataclass(frozen=True)
class PositiveAsymptotics:
    mu: float
    A: float
    B: float
    x0: float
    t0: float


def saddle_params(n: int, mu: float) -> PositiveAsymptotics:
    """Saddle constants and t0 solving mu = 2 pi N tan(pi/t) / t^2."""
    if mu <= 0:
        raise DomainError("saddle point needs mu > 0")
    A = 3 * (math.pi * mu / 2) ** (2 / 3)
    B = 3 * (mu ** 2 / (4 * math.pi)) ** (2 / 3)
    x0 = (2 * math.pi ** 2 / mu) ** (1 / 3)

    def slope(t: float) -> float:
        return mu - 2 * math.pi * n * math.tan(math.pi / t) / t ** 2

    guess = (2 * math.pi ** 2 * n / mu) ** (1 / 3)
    lo, hi = max(2.0, guess / 2), max(4.0, 2 * guess)
    while lo > 2.0 and slope(lo) >= 0:
        lo = max(2.0, lo / 2)
    if lo == 2.0:
        lo = 2.0 + 1e-12
    while slope(hi) <= 0:
        hi *= 2
    t0 = bisect(slope, lo, hi, xtol=1e-12 * hi, rtol=1e-15, maxiter=500)
    return PositiveAsymptotics(mu, A, B, x0, t0)


def log_prefactor(mu: float) -> float:
    B = 3 * (mu ** 2 / (4 * math.pi)) ** (2 / 3)
    return math.log(math.expm1(mu) * math.sqrt(math.pi / B) * mu / 2)


def log_asymptote_pos(n: int, mu: float) -> float:
    """log of the saddle-point approximation to Z_N 4^-N."""
    if mu <= 0:
        raise DomainError("needs mu > 0")
    A = 3 * (math.pi * mu / 2) ** (2 / 3)
    return log_prefactor(mu) - A * n ** (1 / 3) - 5 / 6 * math.log(n)


def asymptote_pos(n: int, mu: float) -> float:
    return math.exp(log_asymptote_pos(n, mu))


def prefactor_regression(ns, mu: float) -> tuple[float, float]:
    """Fit log Z_N 4^-N + A N^(1/3) + (5/6) log N = c + b N^(-1/3).

    Returns (c, b); c estimates the log prefactor.
    """
    ns = np.asarray(list(ns), dtype=float)
    if ns.size < 2:
        raise ValueError("need at least two sizes")
    A = 3 * (math.pi * mu / 2) ** (2 / 3)
    y = np.array([log_z_scaled_eval(int(n), mu) for n in ns]) + A * ns ** (1 / 3) + 5 / 6 * np.log(ns)
    b, c = np.polyfit(ns ** (-1 / 3), y, 1)
    return float(c), float(b)
