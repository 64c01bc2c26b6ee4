"""Generating-function layer: X, X_m, c(g), critical points, coefficient tables.

``X(g)`` counts planar trees by size, ``X_m(g)`` those of height at most m.
Exact counts live in :class:`CoeffTables`; the closed-form coefficient
formula is evaluated in double precision with the factor ``4**-N`` folded in.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from fractions import Fraction
from operator import mul
from pathlib import Path

import mpmath
import numpy as np

from .errors import CapError, DomainError

TABLE_FORMAT = "hwtrees-coeff"
TABLE_VERSION = 1
DEFAULT_TABLE_BUDGET = 512 * 2**20  # bytes
CLOSED_FORM_RTOL = 1e-18


def catalan(n: int) -> int:
    if n < 0:
        raise DomainError("catalan index must be >= 0")
    return math.comb(2 * n, n) // (n + 1)


def _check_g(g) -> None:
    if not 0 <= g <= 0.25:
        raise DomainError(f"g={g} outside [0, 1/4]")


def x_eval(g: float) -> float:
    _check_g(g)
    return 2 * g / (1 + math.sqrt(1 - 4 * g))


def c_eval(g: float) -> float:
    _check_g(g)
    return g / (1 - x_eval(g)) ** 2


def c_prime(g: float) -> float:
    """Derivative of c(g); diverges at g = 1/4."""
    _check_g(g)
    x = x_eval(g)
    return 1 / (1 - x) ** 2 + 2 * g / (math.sqrt(1 - 4 * g) * (1 - x) ** 3)


def g_crit(k):
    """Critical coupling k/(1+k)^2; exact when k is a Fraction or int."""
    if k < 1:
        raise DomainError(f"k={k} < 1")
    if isinstance(k, (int, Fraction)):
        k = Fraction(k)
    return k / (1 + k) ** 2


def x_crit(k):
    """X(g_crit(k)) = 1/(1+k), exact for rational k."""
    if k < 1:
        raise DomainError(f"k={k} < 1")
    if isinstance(k, (int, Fraction)):
        return 1 / (1 + Fraction(k))
    return 1 / (1 + k)


def xm_eval(g: float, m: int) -> float:
    """Generating function of trees of height <= m, real branch g in [0, 1/4].

    Written as sqrt(g) sinh(m a)/sinh((m+1) a) with tanh(a) = sqrt(1-4g),
    which is the closed form free of cancellation near g = 1/4.
    """
    if m < 1:
        raise DomainError("m must be >= 1")
    _check_g(g)
    if g == 0:
        return 0.0
    s = math.sqrt(1 - 4 * g)
    if s == 0:
        return m / (2 * (m + 1))
    # atanh(s) without the cancellation in 1 - s = 4g / (1 + s)
    a = math.log1p(s) - 0.5 * math.log(4 * g)
    ratio = math.exp(-a) * math.expm1(-2 * m * a) / math.expm1(-2 * (m + 1) * a)
    return math.sqrt(g) * ratio


# coefficient tables ---------------------------------------------------------

@dataclass(frozen=True)
class CoeffTables:
    """Exact counts A[m][N] of trees with N edges and height <= m."""
    m_max: int
    n_max: int
    rows: tuple

    def a(self, m: int, n: int) -> int:
        if n < 0 or m < 0:
            raise ValueError("negative index")
        if n > self.n_max:
            raise CapError(f"N={n} exceeds table cap {self.n_max}")
        if n == 0 or m == 0:
            return 0
        if m > self.m_max:
            if m >= n:
                return catalan(n - 1)
            raise CapError(f"m={m} exceeds table cap {self.m_max}")
        return self.rows[m][n]

    def b(self, m: int, n: int) -> int:
        """Trees with N edges and height exactly m."""
        if m < 1:
            return 0
        return self.a(m, n) - self.a(m - 1, n)

    def f(self, h: int, s: int) -> int:
        """Ordered forests of total size s whose trees have height <= h."""
        if s == 0:
            return 1
        if h >= s:
            return catalan(s)
        return self.a(h + 1, s + 1)

    def column(self, n: int) -> list[int]:
        """[B_{1,N}, ..., B_{N,N}]."""
        return [self.b(m, n) for m in range(1, n + 1)]


def estimate_table_bytes(m_max: int, n_max: int) -> int:
    # ~2 bits per unit of N in C_N, plus object overhead, for A and a working F row
    return (m_max + 2) * (n_max + 1) * (32 + n_max // 4)


def build_tables(m_max: int, n_max: int | None = None,
                 budget: int = DEFAULT_TABLE_BUDGET) -> CoeffTables:
    if n_max is None:
        n_max = m_max
    if m_max < 1 or n_max < 1:
        raise ValueError("table caps must be >= 1")
    need = estimate_table_bytes(m_max, n_max)
    if need > budget:
        raise CapError(f"tables ({m_max}, {n_max}) need ~{need} bytes, budget {budget}")
    cat = [catalan(s) for s in range(n_max + 1)]
    rows = [tuple([0] * (n_max + 1))]
    forest = [1] + [0] * n_max  # F[0]
    for m in range(1, m_max + 1):
        if m > n_max + 1:
            rows.append(rows[-1])
            continue
        a_m = [0] + forest[:n_max]
        rows.append(tuple(a_m))
        nxt = [1] + [0] * n_max
        for s in range(1, n_max + 1):
            if s <= m:
                nxt[s] = cat[s]
            else:
                nxt[s] = sum(map(mul, a_m[1:s + 1], reversed(nxt[:s])))
        forest = nxt
    return CoeffTables(m_max, n_max, tuple(rows))


def _table_body(tables: CoeffTables) -> str:
    lines = []
    for m in range(tables.m_max + 1):
        lines.append(" ".join(str(v) for v in tables.rows[m]))
    return "\n".join(lines) + "\n"


def save_tables(path: str | Path, tables: CoeffTables) -> None:
    body = _table_body(tables)
    digest = hashlib.sha256(body.encode()).hexdigest()
    header = f"{TABLE_FORMAT} v{TABLE_VERSION} {tables.m_max} {tables.n_max} sha256={digest}\n"
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        tmp.write_text(header + body)
        tmp.replace(path)
    except OSError as exc:
        raise OSError(f"cannot write table cache {path}: {exc}") from exc


class CacheError(ValueError):
    pass


def load_tables(path: str | Path) -> CoeffTables:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read table cache {path}: {exc}") from exc
    header, _, body = text.partition("\n")
    parts = header.split()
    if len(parts) != 5 or parts[0] != TABLE_FORMAT or parts[1] != f"v{TABLE_VERSION}":
        raise CacheError(f"{path}: unrecognised header")
    m_max, n_max = int(parts[2]), int(parts[3])
    digest = parts[4].removeprefix("sha256=")
    if hashlib.sha256(body.encode()).hexdigest() != digest:
        raise CacheError(f"{path}: checksum mismatch")
    rows = []
    for line in body.splitlines():
        rows.append(tuple(int(v) for v in line.split()))
    if len(rows) != m_max + 1 or any(len(r) != n_max + 1 for r in rows):
        raise CacheError(f"{path}: table shape mismatch")
    return CoeffTables(m_max, n_max, tuple(rows))


# closed forms ---------------------------------------------------------------

def _log_a_terms(m: int, n: int) -> np.ndarray:
    k = np.arange(1, m // 2 + 1)
    theta = np.pi * k / (m + 1)
    s2 = np.sin(theta) ** 2
    return np.log(s2) + (n - 1) * np.log1p(-s2) - math.log(m + 1)


def log_a_closed(m: int, n: int) -> float:
    """log of A_{m,N} 4^{-N} from the trigonometric sum.

    Terms sin^2 cos^{2N-2} at angles pi k/(m+1) rise until tan^2 = 1/(N-1)
    and decrease afterwards; past that peak the sum stops once a term falls
    below ``CLOSED_FORM_RTOL`` of the running sum.
    """
    if n < 2:
        raise DomainError("closed form needs N >= 2")
    if m < 1:
        raise DomainError("m must be >= 1")
    if m < 2:
        return -math.inf
    logs = _log_a_terms(m, n)
    running = np.logaddexp.accumulate(logs)
    theta = np.pi * np.arange(1, m // 2 + 1) / (m + 1)
    past_peak = np.tan(theta) ** 2 * (n - 1) >= 1
    small = logs < math.log(CLOSED_FORM_RTOL) + np.concatenate(([-np.inf], running[:-1]))
    stop = np.flatnonzero(past_peak & small)
    end = stop[0] if stop.size else logs.size
    return float(running[end - 1])


def a_closed(m: int, n: int) -> float:
    """A_{m,N} 4^{-N} from the closed form."""
    return math.exp(log_a_closed(m, n))


def a_closed_full(m: int, n: int) -> float:
    """Untruncated closed form, used to validate the truncation rule."""
    if n < 2 or m < 1:
        raise DomainError("closed form needs N >= 2, m >= 1")
    if m < 2:
        return 0.0
    return float(np.exp(_log_a_terms(m, n)).sum())


# poles ---------------------------------------------------------------------

@dataclass(frozen=True)
class PoleData:
    m: int
    poles: tuple
    residues: tuple
    c: object
    c_prime: object

    def evaluate(self, g):
        total = self.c + self.c_prime * g
        for p, r in zip(self.poles, self.residues):
            total += r / (g - p)
        return total


def pole_data(m: int, dps: int | None = None) -> PoleData:
    """Poles, residues and affine part of X_m as a rational function.

    With ``dps`` set, values are mpmath numbers at that precision.
    """
    if m < 2:
        raise DomainError("pole data needs m >= 2")
    if dps is not None:
        with mpmath.workdps(dps):
            return _pole_data_mp(m)
    poles, res = [], []
    for k in range(1, m // 2 + 1):
        t2 = math.tan(math.pi * k / (m + 1)) ** 2
        poles.append((1 + t2) / 4)
        res.append(-t2 * (1 + t2) / (4 * (m + 1)))
    c = sum(r / p for r, p in zip(res, poles))
    cp = 2 / (m + 1) if m % 2 else 0.0
    return PoleData(m, tuple(poles), tuple(res), c, cp)


def _pole_data_mp(m: int) -> PoleData:
    mp = mpmath.mp
    poles, res = [], []
    for k in range(1, m // 2 + 1):
        t2 = mpmath.tan(mp.pi * k / (m + 1)) ** 2
        poles.append((1 + t2) / 4)
        res.append(-t2 * (1 + t2) / (4 * (m + 1)))
    c = mpmath.fsum(r / p for r, p in zip(res, poles))
    cp = mpmath.mpf(2) / (m + 1) if m % 2 else mpmath.mpf(0)
    return PoleData(m, tuple(poles), tuple(res), c, cp)
