"""Command-line front end: ``hwtrees <command> [options]``.

Every sampling command needs an explicit ``--seed``.  Reports go to
``--out`` (stdout by default) as CSV or JSON; progress and timing lines go
to stderr through :mod:`logging`.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from decimal import Decimal, InvalidOperation
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analysis, measure, partition, samplers, series, verify
from .errors import CapError, DomainError, ParseError, ShapeError, SizeGuardError
from .measure import BallSpec
from .trees import decode, encode

log = logging.getLogger("hwtrees")

GROWTH_COLUMNS = ("r", "mean_D", "se_D", "mean_B", "se_B")
PARTITION_COLUMNS = ("N", "exact", "rational", "scaled", "asymptote", "ratio")


@dataclass
class RunConfig:
    command: str
    mu: float | None = None
    t: str | None = None
    exact: bool = False
    sizes: list[int] = field(default_factory=list)
    r: int | None = None
    m: int | None = None
    n_samples: int = 0
    seed: int | None = None
    workers: int = 1
    cache_dir: str | None = None
    out: str | None = None
    fmt: str = "csv"
    extra: dict = field(default_factory=dict)

    def echo(self) -> dict:
        """Configuration fields that determine the output; workers, cache
        and output location do not."""
        d = asdict(self)
        for key in ("workers", "cache_dir", "out"):
            d.pop(key)
        return d

    def params(self) -> partition.WeightParams:
        if (self.mu is None) == (self.t is None):
            raise DomainError("give exactly one of --mu and --t")
        if self.t is not None:
            return partition.WeightParams.from_t(parse_t(self.t))
        if self.exact:
            text = self.extra.get("mu_text", repr(self.mu))
            return partition.WeightParams.from_t(rational_weight(text))
        return partition.WeightParams.from_mu(self.mu)


def parse_t(text: str) -> Fraction:
    try:
        t = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"--t expects a positive rational p/q, got {text!r}") from exc
    if t <= 0:
        raise DomainError(f"--t must be positive, got {text!r}")
    return t


def rational_weight(mu_text: str) -> Fraction:
    """Simplest rational t with -log t agreeing with mu to the digits given,
    and to at least four decimals.

    "0.6931" pins mu to within 5e-5, which admits t = 1/2.
    """
    try:
        dec = Decimal(mu_text)
    except InvalidOperation as exc:
        raise DomainError(f"cannot read mu {mu_text!r}") from exc
    if not dec.is_finite():
        raise DomainError(f"mu must be finite, got {mu_text!r}")
    mu = float(dec)
    half_ulp = 0.5 * 10.0 ** min(dec.as_tuple().exponent, -4)
    lo, hi = math.exp(-mu - half_ulp), math.exp(-mu + half_ulp)
    t = Fraction(math.exp(-mu))
    denom = 1
    while True:
        cand = t.limit_denominator(denom)
        if lo <= cand <= hi:
            return cand
        denom *= 2


def parse_sizes(text: str) -> list[int]:
    if not text.strip():
        return []
    try:
        sizes = [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise DomainError(f"--N expects a comma-separated list of integers, got {text!r}") from exc
    if any(n < 1 for n in sizes):
        raise DomainError("--N values must be >= 1")
    return sizes


# coefficient table cache ------------------------------------------------------

def cache_path(cache_dir: str | Path, m_max: int, n_max: int) -> Path:
    return Path(cache_dir) / f"coeff_v{series.TABLE_VERSION}_{m_max}_{n_max}.tbl"


def table_cache_io(cache_dir: str | Path | None, m_max: int, n_max: int | None = None
                   ) -> series.CoeffTables:
    """Load tables from the cache directory, or build (and store) them.

    A corrupt or unreadable cache file is rebuilt with a warning.
    """
    n_max = m_max if n_max is None else n_max
    start = time.perf_counter()
    path = cache_path(cache_dir, m_max, n_max) if cache_dir is not None else None
    if path is not None and path.exists():
        try:
            tables = series.load_tables(path)
        except (series.CacheError, OSError, ValueError) as exc:
            log.warning("corrupt table cache, rebuilding: %s", exc)
        else:
            log.info("tables: cache hit %s (%.3fs)", path, time.perf_counter() - start)
            return tables
    tables = series.build_tables(m_max, n_max)
    log.info("tables: built m=%d N=%d in %.3fs", m_max, n_max, time.perf_counter() - start)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        series.save_tables(path, tables)
        log.info("tables: saved %s", path)
    return tables


# report writers ------------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render_report(rows: Sequence[dict], columns: Sequence[str], fmt: str,
                  meta: dict | None = None) -> str:
    """CSV (header plus rows) or JSON ({"rows": [...], **meta})."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])
        return buf.getvalue()
    if fmt == "json":
        doc = dict(meta or {})
        doc["rows"] = [{c: row.get(c) for c in columns} for row in rows]
        return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def write_output(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    path = Path(out)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc}") from exc


def _meta(cfg: RunConfig, **more) -> dict:
    return {"seed": cfg.seed, "config": cfg.echo(), **more}


# commands --------------------------------------------------------------------------

def cmd_tables(cfg: RunConfig) -> int:
    n_max = max(cfg.sizes) if cfg.sizes else 256
    m_max = cfg.m or n_max
    tables = table_cache_io(cfg.cache_dir, m_max, n_max)
    row = {"m_max": tables.m_max, "n_max": tables.n_max,
           "a_max": str(tables.a(tables.m_max, tables.n_max))}
    write_output(render_report([row], ("m_max", "n_max", "a_max"), cfg.fmt, _meta(cfg)), cfg.out)
    return 0


def _scaled_asymptote(n: int, params: partition.WeightParams) -> float | None:
    if params.regime == "zero":
        return 1 / (4 * math.sqrt(math.pi) * n ** 1.5)
    if params.regime == "positive":
        return partition.asymptote_pos(n, params.mu)
    neg = partition.residue_numeric(float(params.t))
    return math.exp(math.log(neg.residue) - (n + 1) * math.log(neg.g_c) - n * math.log(4))


def cmd_partition(cfg: RunConfig) -> int:
    params = cfg.params()
    limit = cfg.extra.get("table_max", 256)
    exact_sizes = [n for n in cfg.sizes if n <= limit]
    tables = table_cache_io(cfg.cache_dir, max(exact_sizes)) if exact_sizes else None
    rows = []
    for n in cfg.sizes:
        row: dict = {"N": n}
        scaled = None
        if tables is not None and n <= limit:
            z = partition.z_eval(n, tables, mu=params.mu, t=params.t if params.exact else None)
            if isinstance(z, Fraction):
                row["rational"] = z
                scaled = float(z / 4 ** n)
                row["exact"] = float(z)
            else:
                row["exact"] = float(z)
                scaled = partition.z_scaled_eval(n, params.mu, tables)
        elif params.regime == "positive" and n >= 2:
            scaled = partition.z_scaled_eval(n, params.mu)
        row["scaled"] = scaled
        asym = _scaled_asymptote(n, params) if n >= 2 else None
        row["asymptote"] = asym
        row["ratio"] = scaled / asym if scaled is not None and asym else None
        rows.append(row)
    meta = _meta(cfg, t=params.t, mu=params.mu, regime=params.regime)
    write_output(render_report(rows, PARTITION_COLUMNS, cfg.fmt, meta), cfg.out)
    return 0


def ball_value(spec: BallSpec, params: partition.WeightParams, kind: str = "auto",
               n: int | None = None, tables: series.CoeffTables | None = None) -> measure.MeasureValue:
    t = params.t if params.exact else None
    mu = params.mu
    if params.exact and params.regime == "positive":
        mu = Fraction(mu).limit_denominator(10 ** 12)
    if kind == "auto":
        kind = {"negative": "lambda", "zero": "uipt", "positive": "xi"}[params.regime]
        if n is not None:
            kind = "nuN"
    if kind == "lambda":
        return measure.lambda_ball(spec, params.t)
    if kind == "uipt":
        return measure.uipt_ball(spec)
    if kind == "xi":
        return measure.xi_ball(spec, mu, t)
    if kind == "spine":
        return measure.spine_ball_mass(spec.base, mu, t)
    if kind == "rho":
        return measure.rho_ball_mass(spec)
    if kind == "nuN":
        if n is None or tables is None:
            raise DomainError("kind nuN needs --N")
        return measure.nuN_ball_exact(spec, n, tables, mu=params.mu, t=t)
    raise DomainError(f"unknown measure kind {kind!r}")


def cmd_measure(cfg: RunConfig) -> int:
    params = cfg.params()
    spec = BallSpec(decode(cfg.extra["ball"]))
    n = cfg.sizes[0] if cfg.sizes else None
    tables = table_cache_io(cfg.cache_dir, n) if n is not None else None
    value = ball_value(spec, params, cfg.extra.get("kind", "auto"), n, tables)
    row = {"ball": encode(spec.base), "r": spec.r, "K": spec.k_top,
           "value": value.value if isinstance(value.value, Fraction) else float(value.value),
           "kind": value.kind, "params": {"mu": params.mu, "t": params.t, "N": n}}
    if cfg.fmt == "json":
        write_output(json.dumps(_jsonable(row), indent=2, sort_keys=True) + "\n", cfg.out)
    else:
        row["float"] = float(row["value"])
        row["params"] = f"mu={params.mu!r};t={params.t}" + (f";N={n}" if n else "")
        cols = ("ball", "r", "K", "value", "float", "kind", "params")
        write_output(render_report([row], cols, "csv"), cfg.out)
    return 0


def cmd_sumrule(cfg: RunConfig) -> int:
    params = cfg.params()
    r = cfg.r or 2
    cutoff = cfg.extra.get("cutoff", 40)
    total, n_terms = measure.sumrule_check(r, params, cutoff)
    row = {"r": r, "cutoff": cutoff, "total": float(total), "n_balls": n_terms,
           "exact_total": total if isinstance(total, Fraction) else None,
           "kstar_total": measure.kstar_series(params) if r == 2 else None}
    cols = ("r", "cutoff", "total", "n_balls", "kstar_total")
    write_output(render_report([row], cols, cfg.fmt, _meta(cfg)), cfg.out)
    return 0


@dataclass
class _FiniteTask:
    n: int
    tables: series.CoeffTables
    mu: float | None
    t: object

    def __call__(self, count: int, rng: np.random.Generator) -> list:
        sampler = samplers.ExactHeightSampler(self.tables)
        return [samplers.sample_finite_exact(self.n, self.tables, rng, mu=self.mu,
                                             t=self.t, sampler=sampler) for _ in range(count)]


@dataclass
class _BallTask:
    r: int
    mu: float

    def __call__(self, count: int, rng: np.random.Generator) -> list:
        return [samplers.sample_local_ball(self.r, self.mu, rng) for _ in range(count)]


@dataclass
class _ProfileTask:
    r_max: int
    mu: float
    method: str

    def __call__(self, count: int, rng: np.random.Generator) -> np.ndarray:
        if self.method == "levels":
            return samplers.sample_level_profiles(self.mu, self.r_max, count, rng)
        trees = [samplers.sample_local_ball(self.r_max, self.mu, rng) for _ in range(count)]
        return analysis.profile_matrix(trees, self.r_max)


def _need_seed(cfg: RunConfig) -> None:
    if cfg.seed is None:
        raise DomainError(f"'{cfg.command}' needs an explicit --seed")
    if cfg.n_samples < 1:
        raise DomainError("--samples must be >= 1")


def cmd_sample(cfg: RunConfig) -> int:
    _need_seed(cfg)
    params = cfg.params()
    if (not cfg.sizes) == (cfg.r is None):
        raise DomainError("sample needs exactly one of --N (finite size) or --r (local limit ball)")
    if cfg.sizes:
        n = cfg.sizes[0]
        tables = table_cache_io(cfg.cache_dir, n)
        task = _FiniteTask(n, tables, params.mu, params.t if params.exact else None)
    else:
        if params.regime != "positive" and params.exact and params.t != 1:
            log.info("local-limit samplers run in floating point; using mu=%r", params.mu)
        task = _BallTask(cfg.r, params.mu)
    chunks = samplers.map_chunks(task, cfg.n_samples, cfg.seed, cfg.workers)
    lines = []
    for tree in (t for chunk in chunks for t in chunk):
        word = encode(tree)
        if cfg.extra.get("annotate"):
            word += f"\t{tree.height}\t{','.join(map(str, tree.levels))}"
        lines.append(word)
    write_output("".join(line + "\n" for line in lines), cfg.out)
    return 0


def growth_report(cfg: RunConfig) -> analysis.SampleReport:
    _need_seed(cfg)
    params = cfg.params()
    r_max = cfg.r or 64
    method = cfg.extra.get("method", "levels")
    chunks = samplers.map_chunks(_ProfileTask(r_max, params.mu, method), cfg.n_samples,
                                 cfg.seed, cfg.workers)
    profiles = np.concatenate(chunks, axis=0)
    report = analysis.SampleReport(cfg.n_samples, cfg.seed, moments=analysis.moment_rows(profiles),
                                   config=cfg.echo())
    lo, hi = cfg.extra.get("fit_lo", 8), min(cfg.extra.get("fit_hi", 64), r_max)
    if hi > lo:
        analysis.dh_estimate(report, lo, hi)
    return report


def cmd_growth(cfg: RunConfig) -> int:
    report = growth_report(cfg)
    rows = [asdict(row) for row in report.moments]
    meta = _meta(cfg, n_samples=report.n_samples)
    if report.exponent is not None:
        meta["d_h"] = {"estimate": report.exponent[0], "half_width_95": report.exponent[1]}
        log.info("d_h = %.4f +/- %.4f", *report.exponent)
    write_output(render_report(rows, GROWTH_COLUMNS, cfg.fmt, meta), cfg.out)
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    results = verify.run_all(quick=cfg.extra.get("quick", False))
    for res in results:
        print(res.line())
    if cfg.fmt == "json" and cfg.out:
        doc = {"results": [asdict(r) for r in results], "quick": cfg.extra.get("quick", False)}
        write_output(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n", cfg.out)
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {"tables": cmd_tables, "partition": cmd_partition, "measure": cmd_measure,
            "sumrule": cmd_sumrule, "sample": cmd_sample, "verify": cmd_verify,
            "growth": cmd_growth}


# argument parsing ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hwtrees",
                                     description="Height-weighted random planar trees.")
    parser.add_argument("-v", "--verbose", action="store_true", help="timing and cache log lines")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, regime=True, samples=False):
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                       help="timing and cache log lines")
        if regime:
            g = p.add_mutually_exclusive_group()
            g.add_argument("--mu", help="height weight, t = e^-mu")
            g.add_argument("--t", help="rational weight p/q, activates exact arithmetic")
            p.add_argument("--exact", action="store_true",
                           help="replace e^-mu by the simplest rational matching the digits of --mu")
        p.add_argument("--cache-dir", help="coefficient table cache directory")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
        if samples:
            p.add_argument("--samples", type=int, default=1000)
            p.add_argument("--seed", type=int)
            p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("tables", help="build or load coefficient tables")
    common(p, regime=False)
    p.add_argument("--N", default="256", help="largest tree size")
    p.add_argument("--m", type=int, help="largest height (default N)")

    p = sub.add_parser("partition", help="exact and asymptotic partition functions")
    common(p)
    p.add_argument("--N", default="", help="comma-separated sizes")
    p.add_argument("--table-max", type=int, default=256, help="largest N evaluated exactly")

    p = sub.add_parser("measure", help="limit or finite-size mass of a ball")
    common(p)
    p.add_argument("--ball", required=True, help="Dyck word of the ball, '' for a single edge")
    p.add_argument("--kind", default="auto",
                   choices=("auto", "lambda", "uipt", "xi", "spine", "rho", "nuN"))
    p.add_argument("--N", default="", help="size for the finite-size measure")

    p = sub.add_parser("sumrule", help="total mass of all balls of radius r")
    common(p)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--cutoff", type=int, default=40, help="largest ball size")

    p = sub.add_parser("sample", help="dump sampled trees as Dyck words")
    common(p, samples=True)
    p.add_argument("--N", default="", help="finite size")
    p.add_argument("--r", type=int, help="radius of a local-limit ball")
    p.add_argument("--annotate", action="store_true", help="append height and level sizes")

    p = sub.add_parser("growth", help="moment curves of |D_r| and |B_r| and the d_h fit")
    common(p, samples=True)
    p.add_argument("--r", type=int, default=64, help="largest radius")
    p.add_argument("--method", choices=("levels", "tree"), default="levels")
    p.add_argument("--fit-lo", type=int, default=8)
    p.add_argument("--fit-hi", type=int, default=64)

    p = sub.add_parser("verify", help="run the acceptance checks")
    common(p, regime=False)
    p.add_argument("--quick", action="store_true", help="fast oracle subset (N <= 10)")
    return parser


def _parse_mu(text: str | None) -> float | None:
    if text is None:
        return None
    try:
        mu = float(text)
    except ValueError as exc:
        raise DomainError(f"--mu expects a number, got {text!r}") from exc
    if not math.isfinite(mu):
        raise DomainError("--mu must be finite")
    return mu


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    extra = {}
    mu_text = getattr(ns, "mu", None)
    if mu_text is not None:
        extra["mu_text"] = mu_text
    for key in ("ball", "kind", "cutoff", "annotate", "method", "fit_lo", "fit_hi",
                "quick", "table_max"):
        if hasattr(ns, key) and getattr(ns, key) is not None:
            extra[key] = getattr(ns, key)
    return RunConfig(
        command=ns.command,
        mu=_parse_mu(mu_text),
        t=getattr(ns, "t", None),
        exact=getattr(ns, "exact", False),
        sizes=parse_sizes(getattr(ns, "N", "") or ""),
        r=getattr(ns, "r", None),
        m=getattr(ns, "m", None),
        n_samples=getattr(ns, "samples", 0),
        seed=getattr(ns, "seed", None),
        workers=getattr(ns, "workers", 1),
        cache_dir=ns.cache_dir,
        out=ns.out,
        fmt=ns.fmt,
        extra=extra,
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = config_from_args(ns)
        return COMMANDS[cfg.command](cfg)
    except (DomainError, CapError, ParseError, ShapeError, SizeGuardError) as exc:
        print(f"hwtrees {ns.command}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"hwtrees {ns.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
