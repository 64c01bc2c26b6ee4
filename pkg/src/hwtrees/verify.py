"""Acceptance checks, shared by ``hwtrees verify`` and the test suite.

Each check returns a :class:`CheckResult`; ``quick`` shrinks sizes for a
fast oracle-only pass.
"""
from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from . import analysis, measure, partition, samplers, series, trees
from .measure import BallSpec
from .trees import PlanarTree

DEFAULT_SEED = 20240611


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(name: str, fn) -> CheckResult:
    start = time.perf_counter()
    passed, detail = fn()
    return CheckResult(name, bool(passed), detail, time.perf_counter() - start)


def check_enumeration(n_max: int = 12) -> CheckResult:
    def run():
        start = time.perf_counter()
        tables = series.build_tables(n_max)
        bad = []
        for n in range(1, n_max + 1):
            census = trees.census_by_height(n)
            cum = 0
            for m in range(1, n + 2):
                cum += census.get(m, 0)
                if tables.a(m, n) != cum:
                    bad.append(("table", m, n))
                if n >= 2 and m >= 2 and round(series.a_closed(m, n) * 4 ** n) != cum:
                    bad.append(("closed", m, n))
        elapsed = time.perf_counter() - start
        ok = not bad and elapsed < 60
        return ok, f"N<={n_max}, mismatches={bad[:3]}, runtime {elapsed:.1f}s (limit 60s)"
    return _timed("1 enumeration triple equality", run)


MU_GRID = (-1.0, -0.1, 0.0, 0.1, 1.0)
T_SURROGATES = (Fraction(2718281828, 10 ** 9), Fraction(11, 10), Fraction(1), Fraction(9, 10),
                Fraction(2), Fraction(1, 2))


def check_partition_exact(n_max: int = 12) -> CheckResult:
    def run():
        tables = series.build_tables(n_max)
        worst, exact_bad = 0.0, []
        for n in range(1, n_max + 1):
            heights = Counter(t.height for t in trees.enumerate_all(n))
            for mu in MU_GRID:
                brute = math.fsum(c * math.exp(-mu * h) for h, c in heights.items())
                z = float(partition.z_eval(n, tables, mu=mu))
                worst = max(worst, abs(z / brute - 1))
            for t in T_SURROGATES:
                brute = sum(c * t ** h for h, c in heights.items())
                if partition.z_eval(n, tables, t=t) != brute:
                    exact_bad.append((n, t))
        ok = worst < 1e-12 and not exact_bad
        return ok, f"N<={n_max}, float max rel err {worst:.2e} (limit 1e-12), exact mismatches {exact_bad}"
    return _timed("2 partition exactness", run)


def check_negative_asymptotics() -> CheckResult:
    def run():
        tables = series.build_tables(201)
        k = Fraction(2)
        z200 = partition.z_eval(200, tables, t=k)
        z201 = partition.z_eval(201, tables, t=k)
        ratio_gap = abs(float(z201 / z200) - 4.5)
        analytic = partition.residue_numeric(2.0).residue
        fit, _ = partition.residue_fit(k, tables, 100, 200)
        rel = abs(analytic - fit) / abs(analytic)
        ok = ratio_gap < 1e-6 and rel < 1e-4
        return ok, (f"|Z201/Z200 - 9/2| = {ratio_gap:.2e} (limit 1e-6); residue analytic "
                    f"{analytic:.10f} vs fit {fit:.10f}, rel diff {rel:.1e} (limit 1e-4)")
    return _timed("3 negative-mu asymptotics", run)


def check_positive_asymptotics(mu: float = 1.0) -> CheckResult:
    def run():
        start = time.perf_counter()
        ns = (10 ** 3, 10 ** 4, 10 ** 5)
        errs = [abs(math.exp(partition.log_z_scaled_eval(n, mu) - partition.log_asymptote_pos(n, mu)) - 1)
                for n in ns]
        grid = (10 ** 3, 3 * 10 ** 3, 10 ** 4, 3 * 10 ** 4, 10 ** 5)
        c, _ = partition.prefactor_regression(grid, mu)
        target = partition.log_prefactor(mu)
        elapsed = time.perf_counter() - start
        ok = (errs[0] > errs[1] > errs[2] and errs[2] < 0.10
              and abs(c - target) < 0.05 and elapsed < 600)
        return ok, (f"|ratio-1| = {', '.join(f'{e:.4f}' for e in errs)} at N=1e3,1e4,1e5; "
                    f"log prefactor fit {c:.4f} vs {target:.4f}; runtime {elapsed:.1f}s")
    return _timed("4 positive-mu asymptotics", run)


def check_sum_rules(cutoff: int = 40) -> CheckResult:
    def run():
        out = []
        ok = True
        for label, params in (("k=2", partition.WeightParams.from_t(Fraction(2))),
                              ("mu=1", partition.WeightParams.from_mu(1.0))):
            sums = [float(measure.sumrule_check(2, params, c)[0]) for c in range(2, cutoff + 1)]
            mono = all(b >= a for a, b in zip(sums, sums[1:]))
            closed = measure.kstar_series(params)
            ok &= sums[-1] >= 0.999 and mono and abs(closed - 1) < 1e-12
            out.append(f"{label}: partial {sums[-1]:.9f}, monotone={mono}, K-star series {closed!r}")
        return ok, "; ".join(out)
    return _timed("5 sum rules", run)


def check_exact_sampler(n_samples: int = 100_000, seed: int = DEFAULT_SEED) -> CheckResult:
    def run():
        tables = series.build_tables(8)
        sampler = samplers.ExactHeightSampler(tables)
        rng = samplers.RngStream(seed, 6).generator()
        counts = Counter(sampler_tree for sampler_tree in
                         (samplers.sample_finite_exact(4, tables, rng, t=1, sampler=sampler)
                          for _ in range(n_samples)))
        sd = math.sqrt(0.2 * 0.8 / n_samples)
        zs = [(counts[t] / n_samples - 0.2) / sd for t in trees.enumerate_all(4)]
        p = 1 / (1 + math.e)
        path = PlanarTree.path(3)
        hits = sum(samplers.sample_finite_exact(3, tables, rng, mu=1.0, sampler=sampler) == path
                   for _ in range(n_samples))
        z_path = (hits / n_samples - p) / math.sqrt(p * (1 - p) / n_samples)
        ok = len(counts) == 5 and all(abs(z) < 3 for z in zs) and abs(z_path) < 3
        return ok, (f"N=4 uniform z-scores {[round(float(z), 2) for z in zs]}; "
                    f"N=3 mu=1 path frequency z={z_path:.2f}")
    return _timed("6 exact sampler law", run)


def check_nu_convergence() -> CheckResult:
    def run():
        tables = series.build_tables(200)
        spec = BallSpec(PlanarTree.path(2))
        ok = True
        out = []
        for label, kw, limit, tol in (("k=2", {"mu": -math.log(2)}, 4 / 9, 0.01),
                                      ("mu=1", {"mu": 1.0}, math.exp(-1) / 4, 0.05)):
            gaps = [abs(measure.nuN_ball_exact(spec, n, tables, **kw).value - limit)
                    for n in (50, 100, 200)]
            ok &= gaps[0] > gaps[1] > gaps[2] and gaps[2] < tol
            out.append(f"{label} gaps {', '.join(f'{g:.2e}' for g in gaps)} (N=200 limit {tol})")
        return ok, "; ".join(out)
    return _timed("7 finite-N ball convergence", run)


def check_spine_poisson(n_samples: int = 100_000, r: int = 10, mu: float = 1.0,
                        seed: int = DEFAULT_SEED) -> CheckResult:
    def run():
        rng = samplers.RngStream(seed, 8).generator()
        tops = np.empty(n_samples, dtype=np.int64)
        incs = np.empty((n_samples, r - 1), dtype=np.int64)
        for i in range(n_samples):
            sb = samplers.sample_spine_ball_pos(r, mu, rng)
            tops[i] = sb.level_sizes[-1]
            incs[i] = sb.increments
        gof = analysis.poisson_gof(tops, r, mu)
        rho, pairs = analysis.lag1_correlation(incs)
        ok = gof.p > 0.01 and abs(rho) < 4 / math.sqrt(pairs)
        return ok, (f"chi2={gof.chi2:.1f} dof={gof.dof} p={gof.p:.3f} (limit 0.01); "
                    f"lag-1 corr {rho:+.4f} (limit {4 / math.sqrt(pairs):.4f})")
    return _timed("8 spine Poisson law", run)


def check_growth_moments(n_samples: int = 2000, seed: int = DEFAULT_SEED) -> CheckResult:
    def run():
        radii = (4, 8, 16, 32)
        rng = samplers.RngStream(seed, 9).generator()
        rep = analysis.moment_curves(lambda g, r: samplers.sample_local_ball(r, 1.0, g),
                                     32, n_samples, rng)
        zs = []
        for r in radii:
            row = rep.moments[r - 1]
            zs.append((row.mean_D - (r * (r - 1) + 2 * r - 1)) / row.se_D)
            zs.append((row.mean_B - (r * r + (r ** 3 - r) / 3)) / row.se_B)
        rep2 = analysis.moment_curves(lambda g, r: samplers.sample_local_ball(r, -math.log(2), g),
                                      32, n_samples, rng)
        zk = [(rep2.moments[r - 1].mean_D - (3 - 2.0 ** (2 - r))) / rep2.moments[r - 1].se_D
              for r in radii]
        ok = all(abs(z) < 3 for z in zs + zk)
        return ok, (f"mu=1 z(D,B) at r=4,8,16,32: {[round(float(z), 2) for z in zs]}; "
                    f"k=2 z(D): {[round(float(z), 2) for z in zk]}; n={n_samples}")
    return _timed("9 growth moments", run)


def check_growth_exponents(n_samples: int = 10_000, seed: int = DEFAULT_SEED) -> CheckResult:
    def run():
        out, ok = [], True
        for stream, (label, mu, target) in enumerate((("k=2", -math.log(2), 1.0),
                                                      ("mu=0", 0.0, 2.0),
                                                      ("mu=1", 1.0, 3.0))):
            rng = samplers.RngStream(seed, 100 + stream).generator()
            prof = samplers.sample_level_profiles(mu, 64, n_samples, rng)
            rep = analysis.SampleReport(n_samples, seed, moments=analysis.moment_rows(prof))
            slope, half = analysis.dh_estimate(rep, 8, 64)
            ok &= abs(slope - target) <= 0.2
            out.append(f"{label}: {slope:.3f} +/- {half:.3f} (target {target:g} +/- 0.2)")
        return ok, "; ".join(out)
    return _timed("10 growth exponents", run)


def check_bounds() -> CheckResult:
    def run():
        violations = 0
        # m = 1 is an equality case (X - g = X^2 = g c), so allow rounding slack
        with mpmath.workdps(400):
            slack = 1 + mpmath.mpf(10) ** -380
            for g in mpmath.linspace(mpmath.mpf("0.24") / 50, mpmath.mpf("0.24"), 50):
                s = mpmath.sqrt(1 - 4 * g)
                x = (1 - s) / 2
                c = g / (1 - x) ** 2
                xm = g
                for m in range(1, 61):
                    if abs(xm - x) > g * c ** m * slack:
                        violations += 1
                    xm = g / (1 - xm)
        gf = analysis.gf_iterate_check(-math.log(2), r_max=60, n_points=100)
        ok = violations == 0 and gf.violations == 0
        return ok, (f"height-truncation bound violations {violations} on 50 x 60 grid; "
                    f"iterate bound violations {gf.violations} (b={gf.b:.3f}, c={gf.c:.4f})")
    return _timed("11 generating-function bounds", run)


def check_bgw_identification(max_size: int = 8) -> CheckResult:
    def run():
        bad = 0
        total = 0
        for k in (Fraction(2), Fraction(3), Fraction(3, 2)):
            g, x = series.g_crit(k), series.x_crit(k)

            def p(n, x=x):
                return x ** n * (1 - x)

            def ps(n, x=x, g=g, k=k):
                return k * g * x ** n

            for n in range(1, max_size + 1):
                for tree in trees.enumerate_all(n):
                    total += 1
                    if measure.bgw_two_type_mass(tree, p, ps) != measure.lambda_ball(BallSpec(tree), k).value:
                        bad += 1
        return bad == 0, f"{total} (tree, k) pairs with |T0|<={max_size}, {bad} mismatches"
    return _timed("12 two-type branching identification", run)


ALL_CHECKS = (check_enumeration, check_partition_exact, check_negative_asymptotics,
              check_positive_asymptotics, check_sum_rules, check_exact_sampler,
              check_nu_convergence, check_spine_poisson, check_growth_moments,
              check_growth_exponents, check_bounds, check_bgw_identification)


def run_all(quick: bool = False) -> list[CheckResult]:
    if quick:
        checks = [lambda: check_enumeration(10), lambda: check_partition_exact(10),
                  lambda: check_sum_rules(), check_bounds, lambda: check_bgw_identification(6)]
    else:
        checks = ALL_CHECKS
    return [check() for check in checks]
