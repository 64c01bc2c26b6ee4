"""Random trees: exact finite-size sampling and balls of the local limits.

All samplers take a numpy ``Generator``; :class:`RngStream` derives
independent counter-based generators from a (seed, stream) pair, so a run
is reproducible whatever the number of worker processes.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import CapError, DomainError, SizeGuardError
from .series import CoeffTables
from .trees import PlanarTree

SIZE_GUARD = 10 ** 7
POISSON_MAX_MU = 30.0


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(seq))


def map_chunks(task: Callable, n: int, seed: int, workers: int = 1,
               chunk_size: int = 1000) -> list:
    """Run ``task(count, rng)`` over fixed-size chunks, one stream per chunk.

    Chunking does not depend on ``workers``, so results are identical for
    any worker count.
    """
    sizes = [min(chunk_size, n - i) for i in range(0, n, chunk_size)]
    jobs = [(task, size, seed, i) for i, size in enumerate(sizes)]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_chunk(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_chunk, jobs))


def _run_chunk(job):
    task, size, seed, stream = job
    return task(size, RngStream(seed, stream).generator())


# offspring laws -----------------------------------------------------------------

@dataclass(frozen=True)
class OffspringLaw:
    """Geometric law p(n) = (1-x) x^n, or its size-biased 'special' version.

    The special version has p*(n) = (n+1) p(n+1) / m with m the mean of p;
    for a geometric law this is a negative binomial with two successes.
    """
    x: float | Fraction
    special: bool = False

    def __post_init__(self):
        if not 0 < self.x <= Fraction(1, 2):
            raise DomainError(f"geometric parameter {self.x} outside (0, 1/2]")

    @classmethod
    def geometric(cls, x) -> "OffspringLaw":
        return cls(x)

    @classmethod
    def critical(cls) -> "OffspringLaw":
        return cls(Fraction(1, 2))

    def special_of(self) -> "OffspringLaw":
        return OffspringLaw(self.x, True)

    @property
    def mean(self):
        m = self.x / (1 - self.x)
        return 2 * m if self.special else m

    def pmf(self, n: int):
        x = self.x
        if n < 0:
            return 0 * x
        if self.special:
            return (n + 1) * (1 - x) ** 2 * x ** n
        return (1 - x) * x ** n

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        q = 1 - float(self.x)
        if self.special:
            return rng.negative_binomial(2, q, size=size)
        return rng.geometric(q, size=size) - 1


def _geometric_sum(rng: np.random.Generator, shape: np.ndarray, q: float) -> np.ndarray:
    """Sum of ``shape`` independent geometric(q) counts, elementwise."""
    shape = np.asarray(shape)
    out = np.zeros(shape.shape, dtype=np.int64)
    pos = shape > 0
    if pos.any():
        out[pos] = rng.negative_binomial(shape[pos], q)
    return out


def poisson_inverse(u, mu: float) -> np.ndarray:
    """Poisson(mu) quantiles by inversion of the cumulative table."""
    return np.searchsorted(_poisson_cdf(float(mu)), u, side="left")


@lru_cache(maxsize=64)
def _poisson_cdf(mu: float) -> np.ndarray:
    if not 0 < mu <= POISSON_MAX_MU:
        raise DomainError(f"Poisson inversion supports 0 < mu <= {POISSON_MAX_MU}")
    p = math.exp(-mu)
    cdf = [p]
    n = 0
    # stop on negligible terms: the rounded sum may never get within 1e-16 of 1
    while n < mu or p > 1e-18:
        n += 1
        p *= mu / n
        cdf.append(cdf[-1] + p)
    cdf[-1] = 1.0
    return np.minimum(np.array(cdf), 1.0)


def uniform_composition(total: int, parts: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform composition of ``total`` into ``parts`` positive integers."""
    if parts < 1 or total < parts:
        raise ValueError("need total >= parts >= 1")
    if parts == 1:
        return np.array([total], dtype=np.int64)
    bars = np.sort(rng.choice(total - 1, parts - 1, replace=False)) + 1
    return np.diff(np.concatenate(([0], bars, [total])))


# Galton-Watson balls ----------------------------------------------------------------

def sample_bgw_to_depth(law: OffspringLaw, depth: int, rng: np.random.Generator,
                        max_vertices: int = SIZE_GUARD) -> PlanarTree:
    """Radius-``depth`` ball of a Galton-Watson tree, grown level by level."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    counts = []
    width, total = 1, 1
    for _ in range(depth - 1):
        c = law.sample(rng, width)
        width = int(c.sum())
        if width == 0:
            break
        counts.append(c)
        total += width
        if total > max_vertices:
            raise SizeGuardError(f"Galton-Watson ball exceeded {max_vertices} vertices")
    return PlanarTree.from_arrays(counts)


@dataclass(frozen=True)
class SpineBall:
    """Spine of a ball: the vertices with infinite lines of descent."""
    tree: PlanarTree
    level_sizes: tuple
    increments: tuple
    positions: tuple = field(default=())  # spine positions inside a full ball, per level

    @property
    def frontier(self) -> range:
        return range(self.level_sizes[-1])


def _subcritical_x(mu: float):
    if mu > 0:
        raise DomainError("single-spine sampler needs mu <= 0")
    if mu == 0:
        return Fraction(1, 2)
    k = math.exp(-mu)
    return 1 / (1 + k)


def sample_single_spine_ball(r: int, mu: float, rng: np.random.Generator,
                             x=None, max_vertices: int = SIZE_GUARD
                             ) -> tuple[SpineBall, PlanarTree]:
    """Radius-r ball of the limit tree for mu <= 0: one spine with
    subcritical (critical at mu = 0) geometric branches.

    ``x`` overrides the geometric parameter 1/(1+e^-mu).
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    x = _subcritical_x(mu) if x is None else x
    law = OffspringLaw(x)
    special = law.special_of()
    counts = []
    pos, width, total = 0, 1, 1
    positions = [0]
    for _ in range(r - 1):
        c = law.sample(rng, width)
        extra = int(special.sample(rng, 1)[0])
        j = int(rng.integers(0, extra + 1))
        c[pos] = extra + 1
        pos = int(c[:pos].sum()) + j
        counts.append(c)
        width = int(c.sum())
        total += width
        if total > max_vertices:
            raise SizeGuardError(f"spine ball exceeded {max_vertices} vertices")
        positions.append(pos)
    spine = SpineBall(PlanarTree.path(r), (1,) * r, (0,) * (r - 1),
                      tuple((p,) for p in positions))
    return spine, PlanarTree.from_arrays(counts)


def sample_spine_ball_pos(r: int, mu: float, rng: np.random.Generator) -> SpineBall:
    """Spine ball for mu > 0: Poisson(mu) new lines per level, spread over
    the current lines by a uniform composition."""
    if r < 1:
        raise ValueError("r must be >= 1")
    if mu <= 0:
        raise DomainError("needs mu > 0")
    counts, incs, sizes = [], [], [1]
    width = 1
    for _ in range(r - 1):
        n = int(poisson_inverse(rng.random(), mu))
        counts.append(uniform_composition(width + n, width, rng))
        incs.append(n)
        width += n
        sizes.append(width)
    return SpineBall(PlanarTree.from_arrays(counts), tuple(sizes), tuple(incs))


def sample_local_ball_detailed(r: int, mu: float, rng: np.random.Generator,
                               max_vertices: int = SIZE_GUARD) -> tuple[SpineBall, PlanarTree]:
    """Radius-r ball of the local limit together with its spine."""
    if mu <= 0:
        return sample_single_spine_ball(r, mu, rng, max_vertices=max_vertices)
    spine = sample_spine_ball_pos(r, mu, rng)
    counts = []
    is_spine = np.ones(1, dtype=bool)
    total = 1
    positions = [(0,)]
    for h in range(r - 1):
        spine_children = np.asarray(spine.tree.counts[h])
        c = rng.geometric(0.5, size=is_spine.size) - 1
        sectors = rng.geometric(0.5, size=int(spine_children.sum()) + spine_children.size) - 1
        spine_idx = np.flatnonzero(is_spine)
        offsets_start = 0
        blocks = []
        for v, sc in zip(spine_idx, spine_children):
            g = sectors[offsets_start:offsets_start + sc + 1]
            offsets_start += sc + 1
            c[v] = sc + int(g.sum())
            blocks.append((v, np.cumsum(g[:-1]) + np.arange(sc)))
        offsets = np.concatenate(([0], np.cumsum(c)[:-1]))
        nxt = np.zeros(int(c.sum()), dtype=bool)
        for v, rel in blocks:
            nxt[offsets[v] + rel] = True
        counts.append(c)
        total += nxt.size
        if total > max_vertices:
            raise SizeGuardError(f"local ball exceeded {max_vertices} vertices")
        is_spine = nxt
        positions.append(tuple(np.flatnonzero(nxt).tolist()))
    spine = SpineBall(spine.tree, spine.level_sizes, spine.increments, tuple(positions))
    return spine, PlanarTree.from_arrays(counts)


def sample_local_ball(r: int, mu: float, rng: np.random.Generator,
                      max_vertices: int = SIZE_GUARD) -> PlanarTree:
    return sample_local_ball_detailed(r, mu, rng, max_vertices)[1]


def sample_level_profiles(mu: float, r_max: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Level sizes |D_1|..|D_rmax| of n independent limit-tree balls.

    Same law as the profiles of :func:`sample_local_ball`, but only level
    sizes are tracked, vectorised over samples: a level of w finite
    vertices and s open sectors has NegBin(w + s) finite children.
    """
    if r_max < 1:
        raise ValueError("r_max must be >= 1")
    out = np.empty((n, r_max), dtype=np.int64)
    finite = np.zeros(n, dtype=np.int64)
    if mu <= 0:
        q = 1 - float(_subcritical_x(mu))
        out[:, 0] = 1
        for h in range(1, r_max):
            finite = _geometric_sum(rng, finite + 2, q)
            out[:, h] = finite + 1
        return out
    spine = np.ones(n, dtype=np.int64)
    out[:, 0] = 1
    for h in range(1, r_max):
        grown = spine + poisson_inverse(rng.random(n), mu)
        finite = _geometric_sum(rng, finite + spine + grown, 0.5)
        spine = grown
        out[:, h] = spine + finite
    return out


# exact finite-size sampling ----------------------------------------------------------

def _randbelow(rng: np.random.Generator, n: int) -> int:
    """Uniform integer in [0, n) for arbitrarily large n."""
    if n < 1:
        raise ValueError("empty range")
    bits = n.bit_length()
    nbytes = (bits + 7) // 8
    mask = (1 << bits) - 1
    while True:
        v = int.from_bytes(rng.bytes(nbytes), "little") & mask
        if v < n:
            return v


def _pick(rng: np.random.Generator, cumulative: list[int]) -> int:
    u = _randbelow(rng, cumulative[-1])
    lo, hi = 0, len(cumulative) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cumulative[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


class ExactHeightSampler:
    """Uniform trees of given size and exact height, by decomposition.

    A tree of height m splits at its leftmost highest subtree of i1 into a
    prefix forest of height <= m-2, that subtree (height m-1) and a suffix
    forest of height <= m-1; each piece is drawn proportionally to counts.
    """

    def __init__(self, tables: CoeffTables):
        self.tables = tables
        self._splits: dict = {}
        self._firsts: dict = {}
        self._heights: dict = {}

    def tree(self, n: int, m: int, rng: np.random.Generator) -> PlanarTree:
        if n > self.tables.n_max:
            raise CapError(f"N={n} exceeds table cap {self.tables.n_max}")
        if m < 1 or self.tables.b(m, n) == 0:
            raise ValueError(f"no tree of size {n} and height {m}")
        return PlanarTree.from_nested(self._exact(n, m, rng))

    def _exact(self, n: int, m: int, rng) -> tuple:
        if m == 1:
            return ()
        key = (n, m)
        if key not in self._splits:
            tb = self.tables
            choices, cum, acc = [], [], 0
            for j in range(m - 1, n):
                bj = tb.b(m - 1, j)
                if not bj:
                    continue
                for a in range(0, n - j):
                    b = n - 1 - j - a
                    w = tb.f(m - 2, a) * bj * tb.f(m - 1, b)
                    if w:
                        acc += w
                        choices.append((a, j, b))
                        cum.append(acc)
            self._splits[key] = (choices, cum)
        choices, cum = self._splits[key]
        a, j, b = choices[_pick(rng, cum)]
        return self._forest(m - 2, a, rng) + (self._exact(j, m - 1, rng),) + self._forest(m - 1, b, rng)

    def _forest(self, h: int, s: int, rng) -> tuple:
        out = []
        while s > 0:
            key = (h, s)
            if key not in self._firsts:
                tb = self.tables
                cum, acc = [], 0
                for j in range(1, s + 1):
                    acc += tb.a(h, j) * tb.f(h, s - j)
                    cum.append(acc)
                self._firsts[key] = cum
            j = _pick(rng, self._firsts[key]) + 1
            out.append(self._upto(h, j, rng))
            s -= j
        return tuple(out)

    def _upto(self, h: int, n: int, rng) -> tuple:
        key = (h, n)
        if key not in self._heights:
            cum, acc = [], 0
            for m in range(1, min(h, n) + 1):
                acc += self.tables.b(m, n)
                cum.append(acc)
            self._heights[key] = cum
        m = _pick(rng, self._heights[key]) + 1
        return self._exact(n, m, rng)


def sample_uniform_exact_height(n: int, m: int, tables: CoeffTables,
                                rng: np.random.Generator,
                                sampler: ExactHeightSampler | None = None) -> PlanarTree:
    return (sampler or ExactHeightSampler(tables)).tree(n, m, rng)


def height_weights(n: int, tables: CoeffTables, mu: float | None = None, t=None) -> list:
    """Cumulative height-class weights t^m B[m][N], exact for rational t."""
    column = tables.column(n)
    if t is not None and isinstance(t, (int, Fraction)):
        t = Fraction(t)
        p, q = t.numerator, t.denominator
        cum, acc = [], 0
        for m, b in enumerate(column, start=1):
            acc += b * p ** m * q ** (n - m)
            cum.append(acc)
        return cum
    if mu is None:
        mu = -math.log(t)
    logs = np.array([math.log(b) - mu * m if b else -np.inf
                     for m, b in enumerate(column, start=1)])
    w = np.exp(logs - logs.max())
    return list(np.cumsum(w / w.sum()))


def sample_finite_exact(n: int, tables: CoeffTables, rng: np.random.Generator,
                        mu: float | None = None, t=None,
                        sampler: ExactHeightSampler | None = None) -> PlanarTree:
    """Tree of size N with probability proportional to t^height."""
    if n > tables.n_max:
        raise CapError(f"N={n} exceeds table cap {tables.n_max}")
    if mu is None and t is None:
        raise ValueError("give mu or t")
    cum = height_weights(n, tables, mu, t)
    if isinstance(cum[-1], int):
        m = _pick(rng, cum) + 1
    else:
        m = int(np.searchsorted(np.array(cum), rng.random() * cum[-1], side="right")) + 1
        m = min(m, n)
    return sample_uniform_exact_height(n, m, tables, rng, sampler)
