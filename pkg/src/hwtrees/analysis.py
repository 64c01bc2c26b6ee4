"""Monte Carlo checks of the samplers against closed-form values."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .measure import BallSpec, poisson_level_pmf
from .trees import PlanarTree, ball, encode


@dataclass
class BallFreq:
    ball: str
    r: int
    k_top: int
    count: int
    freq: float
    se: float
    oracle: float | None = None
    z: float | None = None


@dataclass
class MomentRow:
    r: int
    mean_D: float
    var_D: float
    se_D: float
    mean_B: float
    var_B: float
    se_B: float


@dataclass
class SampleReport:
    n_samples: int
    seed: int | None = None
    balls: list[BallFreq] = field(default_factory=list)
    moments: list[MomentRow] = field(default_factory=list)
    exponent: tuple[float, float] | None = None
    tests: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)


def validate_atlas(atlas: Sequence[BallSpec]) -> None:
    """Balls in an ultrametric space are nested or disjoint; repeated balls
    would double count."""
    seen = set()
    for spec in atlas:
        if not isinstance(spec, BallSpec):
            raise ValueError(f"atlas entry {spec!r} is not a BallSpec")
        if spec.base in seen:
            raise ValueError(f"ball {encode(spec.base)!r} listed twice")
        seen.add(spec.base)


def empirical_ball_freqs(sampler: Callable[[np.random.Generator], PlanarTree],
                         atlas: Sequence[BallSpec], n: int, rng: np.random.Generator,
                         oracle: Callable[[BallSpec], float] | None = None,
                         seed: int | None = None) -> SampleReport:
    """Frequencies of the atlas balls among n sampled trees.

    z-scores use the oracle variance p(1-p)/n, so empty cells stay finite.
    """
    validate_atlas(atlas)
    report = SampleReport(n_samples=n, seed=seed)
    if not atlas:
        return report
    radii = sorted({spec.r for spec in atlas})
    index = {(spec.r, spec.base): i for i, spec in enumerate(atlas)}
    counts = np.zeros(len(atlas), dtype=np.int64)
    for _ in range(n):
        tree = sampler(rng)
        for r in radii:
            i = index.get((r, ball(tree, r)))
            if i is not None:
                counts[i] += 1
    for spec, cnt in zip(atlas, counts):
        f = cnt / n
        row = BallFreq(encode(spec.base), spec.r, spec.k_top, int(cnt), f, math.sqrt(f * (1 - f) / n))
        if oracle is not None:
            p = float(oracle(spec))
            row.oracle = p
            sd = math.sqrt(p * (1 - p) / n)
            row.z = (f - p) / sd if sd > 0 else (0.0 if f == p else math.inf)
        report.balls.append(row)
    return report


def moment_rows(profiles: np.ndarray) -> list[MomentRow]:
    """Per-radius moments from an (n, r_max) array of level sizes."""
    profiles = np.asarray(profiles, dtype=float)
    n = profiles.shape[0]
    balls = np.cumsum(profiles, axis=1)
    rows = []
    for j in range(profiles.shape[1]):
        d, b = profiles[:, j], balls[:, j]
        vd = d.var(ddof=1) if n > 1 else 0.0
        vb = b.var(ddof=1) if n > 1 else 0.0
        rows.append(MomentRow(j + 1, d.mean(), vd, math.sqrt(vd / n), b.mean(), vb, math.sqrt(vb / n)))
    return rows


def profile_matrix(trees: Sequence[PlanarTree], r_max: int) -> np.ndarray:
    out = np.zeros((len(trees), r_max), dtype=np.int64)
    for i, tree in enumerate(trees):
        lv = tree.levels[:r_max]
        out[i, :len(lv)] = lv
    return out


def moment_curves(sampler: Callable[[np.random.Generator, int], PlanarTree], r_max: int,
                  n: int, rng: np.random.Generator, seed: int | None = None) -> SampleReport:
    """Means and standard errors of |D_r| and |B_r| for r <= r_max.

    ``sampler(rng, r)`` returns a radius-r ball; balls of smaller radius are
    read off the same sample.
    """
    if r_max < 1:
        raise ValueError("r_max must be >= 1")
    trees = [sampler(rng, r_max) for _ in range(n)]
    return SampleReport(n_samples=n, seed=seed, moments=moment_rows(profile_matrix(trees, r_max)))


def dh_estimate(report: SampleReport, r_lo: int, r_hi: int) -> tuple[float, float]:
    """Slope of log mean|B_r| against log r over [r_lo, r_hi], with a 95%
    half-width that treats radii as independent."""
    rows = [row for row in report.moments if r_lo <= row.r <= r_hi]
    if r_lo >= r_hi or len(rows) < 2:
        raise ValueError(f"degenerate radius range [{r_lo}, {r_hi}]")
    x = np.log([row.r for row in rows])
    y = np.log([row.mean_B for row in rows])
    var_y = np.array([(row.se_B / row.mean_B) ** 2 for row in rows])
    w = (x - x.mean()) / ((x - x.mean()) ** 2).sum()
    slope = float((w * y).sum())
    half = 1.96 * math.sqrt(float((w ** 2 * var_y).sum()))
    report.exponent = (slope, half)
    return slope, half


@dataclass
class GofResult:
    chi2: float
    p: float
    dof: int
    skipped: bool = False


def poisson_gof(samples: Sequence[int], r: int, mu: float, min_expected: float = 5.0) -> GofResult:
    """Chi-square test of |D_r| against 1 + Poisson((r-1) mu).

    Cells with small expectation are merged into their neighbours from both
    tails until every cell expects at least ``min_expected`` counts.
    """
    values = np.asarray(samples, dtype=np.int64)
    n = values.size
    if r == 1:
        warnings.warn("|D_1| = 1 surely; goodness of fit skipped")
        return GofResult(math.nan, math.nan, 0, skipped=True)
    if n < 10 * min_expected:
        raise ValueError(f"insufficient samples ({n}) for a chi-square test")
    top = max(int(values.max()), 1 + int((r - 1) * mu + 10 * math.sqrt((r - 1) * mu) + 10))
    support = np.arange(1, top + 1)
    pmf = np.array([poisson_level_pmf(r, int(R), mu) for R in support])
    pmf[-1] += max(0.0, 1 - pmf.sum())
    obs = np.bincount(values - 1, minlength=top)[:top].astype(float)
    exp = pmf * n
    # merge from the left tail
    cells_o, cells_e = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(obs, exp):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            cells_o.append(acc_o)
            cells_e.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if cells_e:
            cells_o[-1] += acc_o
            cells_e[-1] += acc_e
        else:
            cells_o.append(acc_o)
            cells_e.append(acc_e)
    if len(cells_e) < 2:
        raise ValueError("too few cells after merging")
    chi2, p = stats.chisquare(cells_o, np.array(cells_e) * (sum(cells_o) / sum(cells_e)))
    return GofResult(float(chi2), float(p), len(cells_e) - 1)


def lag1_correlation(increments: np.ndarray) -> tuple[float, int]:
    """Pooled correlation of consecutive spine increments and the pair count."""
    inc = np.asarray(increments, dtype=float)
    if inc.ndim != 2 or inc.shape[1] < 2:
        raise ValueError("need at least two increments per sample")
    x, y = inc[:, :-1].ravel(), inc[:, 1:].ravel()
    return float(np.corrcoef(x, y)[0, 1]), x.size


@dataclass
class GfReport:
    m: float
    b: float
    c: float
    r_max: int
    n_points: int
    violations: int
    max_ratio: float       # largest (f_r(x) - 1)/(c^(r-1)(x - 1))
    max_deriv_error: float  # relative error of f_r'(1) against m^(r-1)


def gf_iterate_check(mu: float, x_grid: Sequence[float] | None = None, r_max: int = 60,
                     window_fraction: float = 0.5, n_points: int = 100) -> GfReport:
    """Check f_r(x) <= 1 + c^(r-1)(x-1) for the level-size generating function.

    f(x) = 1/(1 - m(x-1)) is the offspring generating function of the
    subcritical geometric branches, so its (r-1)-fold iterate f_r generates
    |D_r| of one branch.  The window end b sits at ``window_fraction`` of
    the way to the largest admissible value 1 + (1-m)/m.
    """
    if mu >= 0:
        raise ValueError("needs mu < 0")
    if not 0 < window_fraction < 1:
        raise ValueError("window_fraction must lie in (0, 1)")
    m = math.exp(mu)
    b = 1 + window_fraction * (1 - m) / m
    c = m + m ** 2 * (b - 1) / (1 - m * (b - 1))
    if x_grid is None:
        x_grid = np.linspace(1, b, n_points + 1)[1:]
    xs = np.asarray(x_grid, dtype=float)
    if xs.min() < 1 or xs.max() > b:
        raise ValueError(f"grid outside the window [1, {b}]")

    def f(x):
        return 1 / (1 - m * (x - 1))

    violations = 0
    max_ratio = 0.0
    fr = f(xs)
    for r in range(2, r_max + 1):
        bound = 1 + c ** (r - 1) * (xs - 1)
        violations += int(np.sum(fr > bound * (1 + 1e-15)))
        max_ratio = max(max_ratio, float(np.max((fr - 1) / (c ** (r - 1) * (xs - 1)))))
        fr = f(fr)
    # f_r'(1) by the chain rule; differences lose all digits once m^(r-1) is tiny
    worst = 0.0
    y, deriv = 1.0, 1.0
    for r in range(2, r_max + 1):
        deriv *= m / (1 - m * (y - 1)) ** 2
        y = f(y)
        worst = max(worst, abs(deriv / m ** (r - 1) - 1))
    return GfReport(m, b, c, r_max, xs.size, violations, max_ratio, worst)


def growth_envelope(profiles: np.ndarray, mu: float) -> dict:
    """Fitted envelope constants of individual growth curves (reported only)."""
    profiles = np.asarray(profiles, dtype=float)
    r = np.arange(1, profiles.shape[1] + 1)
    if mu < 0:
        mask = r >= 3
        ratio = profiles[:, mask] / np.log(r[mask])
        return {"max_D_over_log_r": float(ratio.max())}
    balls = np.cumsum(profiles, axis=1)
    mask = r >= 4
    ratio = balls[:, mask] / r[mask] ** 3
    return {"min_B_over_r3": float(ratio.min()),
            "max_B_over_r3_log_r": float((ratio / np.log(r[mask])).max())}
