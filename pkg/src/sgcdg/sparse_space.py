"""Sparse multi-index sets {|l|_1 <= N} and their DoF numbering.

A :class:`SparseSpace` is described by one 1D *layout* per dimension (the
number of 1D basis functions on each level 0..N, with k + 1 modes per
translation) and an index-set rule: ``"sparse"`` keeps level vectors with
|l|_1 <= N, ``"full"`` keeps |l|_inf <= N. DoFs are ordered by
(|l|_1, l lexicographic, j lexicographic, p lexicographic), so every level
block is contiguous and appears after all blocks with a smaller level sum.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .hierarchy1d import Space1D


@dataclass(frozen=True)
class MultiIndex:
    l: tuple[int, ...]
    j: tuple[int, ...]
    p: tuple[int, ...]


def level_vectors(d: int, N: int, rule: str = "sparse") -> list[tuple[int, ...]]:
    """Admissible level vectors sorted by (|l|_1, lexicographic)."""
    if rule == "sparse":
        vecs = [l for l in itertools.product(range(N + 1), repeat=d) if sum(l) <= N]
    elif rule == "full":
        vecs = list(itertools.product(range(N + 1), repeat=d))
    else:
        raise ValueError(f"unknown index-set rule {rule!r}")
    return sorted(vecs, key=lambda l: (sum(l), l))


@dataclass(frozen=True, eq=False)
class SparseSpace:
    """Ordered DoF set over per-dimension 1D layouts.

    ``layouts[i][l]`` is the 1D block size of level l in dimension i; it must
    be a multiple of ``k + 1`` when ``(l, j, p)`` labels are requested.
    ``spaces`` keeps the 1D spaces the layouts came from (None for
    intermediate sweep spaces).
    """

    layouts: tuple[tuple[int, ...], ...]
    N: int
    k: int
    rule: str = "sparse"
    spaces: tuple[Space1D, ...] | None = field(default=None, compare=False)

    @property
    def d(self) -> int:
        return len(self.layouts)

    @cached_property
    def blocks(self) -> list[tuple[int, ...]]:
        return level_vectors(self.d, self.N, self.rule)

    @cached_property
    def _offsets1d(self):
        return [np.concatenate([[0], np.cumsum(lay)]).astype(np.int64) for lay in self.layouts]

    @cached_property
    def block_offsets(self) -> dict[tuple[int, ...], int]:
        out, pos = {}, 0
        for l in self.blocks:
            out[l] = pos
            pos += int(np.prod([self.layouts[i][li] for i, li in enumerate(l)]))
        return out

    @cached_property
    def size(self) -> int:
        return dof_count_layouts(self.layouts, self.N, self.rule)

    def __len__(self) -> int:
        return self.size

    @cached_property
    def index1d(self) -> np.ndarray:
        """(size, d) array: the 1D position of every DoF in each dimension.

        Inside a block the order is lexicographic in (j_1..j_d, p_1..p_d).
        """
        kp = self.k + 1
        out = np.empty((self.size, self.d), dtype=np.int64)
        for l in self.blocks:
            sizes = [self.layouts[i][li] for i, li in enumerate(l)]
            nj = [s // kp for s in sizes]
            grids = np.meshgrid(*[np.arange(n) for n in nj], *[np.arange(kp)] * self.d,
                                indexing="ij")
            start = self.block_offsets[l]
            count = int(np.prod(sizes))
            for i, li in enumerate(l):
                loc = grids[i].ravel() * kp + grids[self.d + i].ravel()
                out[start:start + count, i] = self._offsets1d[i][li] + loc
        out.setflags(write=False)
        return out

    @cached_property
    def levels(self) -> np.ndarray:
        """(size, d) level vector of every DoF."""
        out = np.empty((self.size, self.d), dtype=np.int64)
        for i, lay in enumerate(self.layouts):
            lev1d = np.repeat(np.arange(len(lay)), lay)
            out[:, i] = lev1d[self.index1d[:, i]]
        return out

    def budget(self, levels_other: np.ndarray) -> np.ndarray:
        """Largest admissible level in one dimension given the other levels."""
        if self.rule == "sparse":
            return self.N - levels_other.sum(axis=-1)
        return np.full(levels_other.shape[:-1], self.N)

    # -- MultiIndex <-> ordinal ---------------------------------------------

    def ordinal(self, s: MultiIndex) -> int:
        """Position of basis s; raises ValueError naming the violated bound."""
        if len(s.l) != self.d or len(s.j) != self.d or len(s.p) != self.d:
            raise ValueError("multi-index has wrong dimension")
        kp = self.k + 1
        for i, (li, ji, pi) in enumerate(zip(s.l, s.j, s.p)):
            if not 0 <= li <= self.N:
                raise ValueError(f"level l[{i}]={li} outside [0, {self.N}]")
            nj = self.layouts[i][li] // kp
            if not 0 <= ji < nj:
                raise ValueError(f"translation j[{i}]={ji} outside [0, {nj - 1}]")
            if not 0 <= pi <= self.k:
                raise ValueError(f"degree p[{i}]={pi} outside [0, {self.k}]")
        l = tuple(s.l)
        if l not in self.block_offsets:
            bound = "|l|_1" if self.rule == "sparse" else "|l|_inf"
            raise ValueError(f"level vector {l} violates {bound} <= {self.N}")
        nj = [self.layouts[i][li] // kp for i, li in enumerate(l)]
        shape = nj + [kp] * self.d
        return self.block_offsets[l] + int(np.ravel_multi_index(tuple(s.j) + tuple(s.p), shape))

    def multi_index(self, n: int) -> MultiIndex:
        if not 0 <= n < self.size:
            raise ValueError(f"ordinal {n} outside [0, {self.size - 1}]")
        kp = self.k + 1
        l = tuple(int(v) for v in self.levels[n])
        loc = [int(self.index1d[n, i] - self._offsets1d[i][li]) for i, li in enumerate(l)]
        return MultiIndex(l, tuple(v // kp for v in loc), tuple(v % kp for v in loc))

    def __contains__(self, s: MultiIndex) -> bool:
        try:
            self.ordinal(s)
        except ValueError:
            return False
        return True

    # -- line structure for directional sweeps --------------------------------

    @lru_cache(maxsize=None)
    def lines(self, axis: int):
        """Group DoFs into 1D lines along ``axis``.

        Returns a list of ``(budget, gather)`` pairs: ``gather[r, q]`` is the
        ordinal of the DoF on line r at 1D position q; each line with budget B
        covers exactly the 1D prefix of levels 0..B.
        """
        others = [i for i in range(self.d) if i != axis]
        idx = self.index1d
        if others:
            keys, line_of = np.unique(idx[:, others], axis=0, return_inverse=True)
            line_of = line_of.ravel()
            lev_other = self.levels[:, others]
            line_budget = np.empty(len(keys), dtype=np.int64)
            line_budget[line_of] = self.budget(lev_other)
        else:
            line_of = np.zeros(self.size, dtype=np.int64)
            line_budget = np.array([self.N])
        prefix = self._offsets1d[axis]
        order = np.lexsort((idx[:, axis], line_of))
        groups = []
        for B in np.unique(line_budget):
            lines_b = np.flatnonzero(line_budget == B)
            length = int(prefix[B + 1])
            # DoFs of these lines, sorted by (line, position): contiguous runs
            mask = np.isin(line_of[order], lines_b)
            gather = order[mask].reshape(len(lines_b), length)
            groups.append((int(B), gather))
        return groups


@lru_cache(maxsize=None)
def _layout_space(layouts, N, k, rule):
    return SparseSpace(layouts, N, k, rule)


def layout_space(layouts, N: int, k: int = 0, rule: str = "sparse") -> SparseSpace:
    """Cached space over raw layouts.

    With k = 0 blocks are ordered as a plain product of 1D positions, which
    works for any block sizes; intermediate sweep results use that form.
    """
    return _layout_space(tuple(tuple(int(v) for v in lay) for lay in layouts), N, k, rule)


def enumerate_space(d: int, N: int, k: int, mode: tuple[str, str] | Space1D = ("primal", "periodic"),
                    rule: str = "sparse") -> SparseSpace:
    """The d-dimensional sparse space built from one 1D mode in every direction."""
    if d < 1 or N < 0 or k < 0:
        raise ValueError("need d >= 1, N >= 0, k >= 0")
    s1 = mode if isinstance(mode, Space1D) else Space1D(mode[0], mode[1], N, k)
    layouts = (s1.layout,) * d
    return _with_spaces(layout_space(layouts, N, k, rule), (s1,) * d)


def _with_spaces(base: SparseSpace, spaces) -> SparseSpace:
    # share cached index arrays with the layout-only twin
    sp = SparseSpace(base.layouts, base.N, base.k, base.rule, spaces=tuple(spaces))
    for name in ("blocks", "block_offsets", "size", "index1d", "levels", "_offsets1d"):
        sp.__dict__[name] = getattr(base, name)
    sp.__dict__["lines"] = base.lines
    return sp


def dof_count_layouts(layouts, N: int, rule: str = "sparse") -> int:
    """DoF count without materialising indices (dynamic programming over level sums)."""
    if rule == "full":
        return int(np.prod([sum(lay[:N + 1]) for lay in layouts]))
    # poly[s] = number of DoF over the first dims with level sum s
    poly = np.zeros(N + 1, dtype=object)
    poly[0] = 1
    for lay in layouts:
        new = np.zeros(N + 1, dtype=object)
        for s in range(N + 1):
            if poly[s]:
                for l in range(N + 1 - s):
                    new[s + l] += poly[s] * lay[l]
        poly = new
    return int(sum(poly))


def dof_count(d: int, N: int, k: int, mode: tuple[str, str] = ("primal", "periodic"),
              rule: str = "sparse") -> int:
    s1 = Space1D(mode[0], mode[1], N, k)
    return dof_count_layouts((s1.layout,) * d, N, rule)
