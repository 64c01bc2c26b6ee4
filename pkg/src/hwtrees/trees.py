"""Planar rooted trees with a root of degree one.

A tree is stored level by level: ``counts[j]`` lists, left to right, the
number of children of every vertex at distance ``j + 1`` from the root.
The root edge (root, i1) is implicit, so the single edge has ``counts == ()``.
The last stored level always has a nonzero sum, which makes the
representation canonical.  A nested view (each vertex a tuple of its
children) is available through ``PlanarTree.nested``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import AmbiguousComparison, CapError, ParseError, ShapeError

ORACLE_CAP = 14

VertexRef = tuple  # 1-based child indices from i1; () is i1


@dataclass(frozen=True)
class SectorRef:
    vertex: VertexRef
    index: int


@dataclass(frozen=True)
class PlanarTree:
    counts: tuple = ()

    def __post_init__(self):
        counts = tuple(tuple(int(c) for c in level) for level in self.counts)
        object.__setattr__(self, "counts", counts)
        expected = 1
        for j, level in enumerate(counts):
            if len(level) != expected:
                raise ShapeError(f"level {j + 1} has {len(level)} vertices, expected {expected}")
            if any(c < 0 for c in level):
                raise ShapeError("negative child count")
            expected = sum(level)
            if expected == 0:
                raise ShapeError("trailing level without children")

    @classmethod
    def _raw(cls, counts: tuple) -> "PlanarTree":
        obj = object.__new__(cls)
        object.__setattr__(obj, "counts", counts)
        return obj

    @classmethod
    def single_edge(cls) -> "PlanarTree":
        return cls._raw(())

    @classmethod
    def path(cls, n: int) -> "PlanarTree":
        """Path with ``n`` edges."""
        if n < 1:
            raise ValueError("a path needs at least one edge")
        return cls._raw(((1,),) * (n - 1))

    @classmethod
    def star(cls, k: int) -> "PlanarTree":
        """Height-two tree whose vertex i1 has ``k`` leaf children."""
        if k < 1:
            raise ValueError("a star needs at least one leaf")
        return cls._raw(((k,),))

    @classmethod
    def from_nested(cls, children: tuple) -> "PlanarTree":
        counts = []
        level = [children]
        while True:
            c = tuple(len(v) for v in level)
            if not any(c):
                break
            counts.append(c)
            level = [w for v in level for w in v]
        return cls._raw(tuple(counts))

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray]) -> "PlanarTree":
        """Build from per-level numpy count arrays produced by a sampler."""
        counts = tuple(tuple(a.tolist()) for a in arrays)
        while counts and not any(counts[-1]):
            counts = counts[:-1]
        return cls._raw(counts)

    @property
    def height(self) -> int:
        return len(self.counts) + 1

    @property
    def levels(self) -> list[int]:
        return [1] + [sum(level) for level in self.counts]

    @property
    def size(self) -> int:
        return 1 + sum(sum(level) for level in self.counts)

    @property
    def nested(self) -> tuple:
        if not self.counts:
            return ()
        nodes: list = [()] * sum(self.counts[-1])
        for level in reversed(self.counts):
            new = []
            pos = 0
            for c in level:
                new.append(tuple(nodes[pos:pos + c]))
                pos += c
            nodes = new
        return nodes[0]

    def __repr__(self) -> str:
        return f"PlanarTree({encode(self)!r})"


def profile(tree: PlanarTree) -> tuple[int, int, list[int]]:
    return tree.size, tree.height, tree.levels


def encode(tree: PlanarTree) -> str:
    out = []
    stack = [iter(tree.nested)]
    while stack:
        child = next(stack[-1], None)
        if child is None:
            stack.pop()
            out.append(")")
        else:
            out.append("(")
            stack.append(iter(child))
    return "".join(out[:-1])


def decode(word: str) -> PlanarTree:
    stack: list[list] = [[]]
    for pos, ch in enumerate(word):
        if ch == "(":
            stack.append([])
        elif ch == ")":
            if len(stack) == 1:
                raise ParseError("unmatched ')'", pos)
            node = tuple(stack.pop())
            stack[-1].append(node)
        else:
            raise ParseError(f"unexpected character {ch!r}", pos)
    if len(stack) != 1:
        raise ParseError("unclosed '('", len(word))
    return PlanarTree.from_nested(tuple(stack[0]))


def ball(tree: PlanarTree, r: int) -> PlanarTree:
    if r < 1:
        raise ValueError(f"ball radius must be >= 1, got {r}")
    return PlanarTree._raw(tree.counts[:r - 1])


def tree_dist(a: PlanarTree, b: PlanarTree,
              trunc_a: int | None = None, trunc_b: int | None = None) -> Fraction:
    """Ultrametric distance 1/r, r the largest radius with equal balls.

    ``trunc_a``/``trunc_b`` declare that a tree is only known as a ball of
    that radius; a tree lower than its declared radius is complete.
    """
    def known_to(t: PlanarTree, trunc: int | None) -> float:
        if trunc is None or t.height < trunc:
            return float("inf")
        return trunc

    horizon = min(known_to(a, trunc_a), known_to(b, trunc_b))
    if a == b:
        if horizon != float("inf"):
            raise AmbiguousComparison("truncated balls agree up to their radius")
        return Fraction(0)
    r = 1
    while a.counts[:r] == b.counts[:r]:
        r += 1
    # B_r agree, B_{r+1} differ
    if r + 1 > horizon:
        raise AmbiguousComparison(
            f"first difference at radius {r + 1} lies past truncation radius {horizon}")
    return Fraction(1, r)


def _resolve_nested(children: tuple, path: VertexRef) -> tuple:
    node = children
    for depth, idx in enumerate(path):
        if not 1 <= idx <= len(node):
            raise ValueError(f"vertex path {path} invalid at step {depth + 1}")
        node = node[idx - 1]
    return node


def sigma(tree: PlanarTree, vertex: VertexRef) -> int:
    """Number of sectors around a vertex: children + 1."""
    return len(_resolve_nested(tree.nested, tuple(vertex))) + 1


def graft_multi(base: PlanarTree, targets: Iterable[tuple[SectorRef, PlanarTree]]) -> PlanarTree:
    """Graft trees into distinct sectors of ``base`` in a single pass.

    Sector j of a vertex with n children lies left of child j (j <= n) or
    right of the last child (j = n + 1).  The grafted tree's root is
    identified with the vertex, so its edges are all added.
    """
    root = base.nested
    plan: dict[tuple, dict[int, tuple]] = {}
    for sector, t1 in targets:
        path = tuple(sector.vertex)
        node = _resolve_nested(root, path)
        if not 1 <= sector.index <= len(node) + 1:
            raise ValueError(f"sector {sector.index} invalid at vertex {path} with {len(node) + 1} sectors")
        slots = plan.setdefault(path, {})
        if sector.index in slots:
            raise ValueError(f"duplicate sector ({path}, {sector.index})")
        slots[sector.index] = (t1.nested,)  # the grafted root edge becomes a new child
    if not plan:
        return base
    prefixes = {p[:j] for p in plan for j in range(len(p) + 1)}

    def rebuild(node: tuple, path: tuple) -> tuple:
        if path not in prefixes:
            return node
        slots = plan.get(path, {})
        out: list = []
        for n in range(1, len(node) + 2):
            out.extend(slots.get(n, ()))
            if n <= len(node):
                out.append(rebuild(node[n - 1], path + (n,)))
        return tuple(out)

    return PlanarTree.from_nested(rebuild(root, ()))


def graft(base: PlanarTree, sector: SectorRef, tree: PlanarTree) -> PlanarTree:
    return graft_multi(base, [(sector, tree)])


def spine_of_ball(tree: PlanarTree, alive: Iterable[int]) -> PlanarTree:
    """Ancestor closure of the marked vertices at maximal height.

    ``alive`` holds 0-based left-to-right positions in the top level.
    """
    keep = np.array(sorted(set(int(a) for a in alive)), dtype=np.int64)
    if keep.size == 0:
        raise ShapeError("alive frontier is empty")
    top = tree.levels[-1]
    if keep[0] < 0 or keep[-1] >= top:
        raise ValueError(f"alive positions must lie in [0, {top})")
    new_counts = []
    for level in reversed(tree.counts):
        parent_of = np.repeat(np.arange(len(level)), level)
        parents, cnt = np.unique(parent_of[keep], return_counts=True)
        new_counts.append(tuple(cnt.tolist()))
        keep = parents
    return PlanarTree._raw(tuple(reversed(new_counts)))


@lru_cache(maxsize=None)
def _forests(n: int) -> tuple:
    """All ordered forests with n edges, paired with their depth."""
    if n == 0:
        return (((), 0),)
    out = []
    for k in range(1, n + 1):
        for sub, ds in _forests(k - 1):
            for rest, dr in _forests(n - k):
                out.append(((sub,) + rest, max(1 + ds, dr)))
    return tuple(out)


def _check_cap(n: int, cap: int) -> None:
    if n < 1:
        raise ValueError("tree size must be >= 1")
    if n > cap:
        raise CapError(f"size {n} exceeds enumeration cap {cap}")


def enumerate_all(n: int, cap: int = ORACLE_CAP) -> list[PlanarTree]:
    """All planar trees with ``n`` edges."""
    _check_cap(n, cap)
    return [PlanarTree.from_nested(f) for f, _ in _forests(n - 1)]


def census_by_height(n: int, cap: int = ORACLE_CAP) -> dict[int, int]:
    _check_cap(n, cap)
    out: dict[int, int] = {}
    for _, d in _forests(n - 1):
        out[1 + d] = out.get(1 + d, 0) + 1
    return dict(sorted(out.items()))
