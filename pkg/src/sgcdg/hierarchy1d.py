"""One-dimensional hierarchical spaces and their coupling matrices.

Four modes: primal/dual mesh x periodic/nonperiodic boundary. Every basis
function of a level-N space is a polynomial of degree k on each cell of the
"half-cell" grid (2^(N+1) cells of width h_N / 2), which is the common
refinement of the primal and dual finest meshes. Each space therefore keeps
its basis as coefficients on that grid in the half-cell orthonormal Legendre
basis, and all couplings are evaluated by Gauss quadrature per half-cell.

Coupling matrices are stored trial-major: ``entries[s, j]`` couples trial
basis s with test basis j, matching b_j = sum_s f_s t_{s,j}.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .basis1d import (
    MAX_DEGREE,
    eval_hier_basis,
    gauss_rule,
    legendre_deriv_table,
    legendre_table,
)

ROLES = ("primal", "dual")
BOUNDARIES = ("periodic", "nonperiodic")
# extra Gauss points per half-cell for weighted couplings (smooth, non-polynomial weights)
WEIGHT_EXTRA_POINTS = 8
KINDS = ("mass", "stiffness", "flux", "weighted-mass", "weighted-stiffness", "weighted-flux")


@dataclass(frozen=True)
class Space1D:
    role: str
    boundary: str
    N: int
    k: int

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if self.N < 0:
            raise ValueError(f"N must be >= 0, got {self.N}")
        if not 0 <= self.k <= MAX_DEGREE:
            raise ValueError(f"k must be in [0, {MAX_DEGREE}], got {self.k}")

    @property
    def h(self) -> float:
        return 2.0 ** (-self.N)

    @property
    def dual_nonperiodic(self) -> bool:
        return self.role == "dual" and self.boundary == "nonperiodic"

    def level_dim(self, l: int) -> int:
        return level_dim(self, l)

    @cached_property
    def layout(self) -> tuple[int, ...]:
        """Number of basis functions on each level 0..N."""
        return tuple(level_dim(self, l) for l in range(self.N + 1))

    @property
    def dim(self) -> int:
        return sum(self.layout)

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.layout)])

    @cached_property
    def indices(self) -> list[tuple[int, int, int]]:
        """(l, j, p) of every basis function in level-major, then j, then p order."""
        out = []
        for l in range(self.N + 1):
            nj = self.layout[l] // (self.k + 1)
            out.extend((l, j, p) for j in range(nj) for p in range(self.k + 1))
        return out

    @cached_property
    def levels(self) -> np.ndarray:
        return np.repeat(np.arange(self.N + 1), self.layout)

    def position(self, l: int, j: int, p: int) -> int:
        return int(self.offsets[l]) + j * (self.k + 1) + p

    def interfaces(self) -> np.ndarray:
        """Interior cell interfaces of the finest mesh; for periodic primal, x=0 too."""
        h = self.h
        n = 2 ** self.N
        if self.role == "primal":
            start = 0 if self.boundary == "periodic" else 1
            return np.arange(start, n) * h
        return (np.arange(n) + 0.5) * h

    # -- half-cell representation ------------------------------------------

    @cached_property
    def halfcell_coeffs(self) -> np.ndarray:
        """Basis coefficients on the half-cell grid, shape (dim, 2^(N+1), k+1)."""
        return _halfcell_coeffs(self.role, self.boundary, self.N, self.k)

    def values(self, x) -> np.ndarray:
        """All basis functions at points x (right-continuous), shape (dim, len(x))."""
        return self._eval(np.asarray(x, dtype=float), legendre_table, 0.5)

    def derivatives(self, x) -> np.ndarray:
        return self._eval(np.asarray(x, dtype=float), legendre_deriv_table, 1.5)

    def _eval(self, x, table, power, cell=None):
        H = 2 ** (self.N + 1)
        w = 1.0 / H
        if cell is None:
            cell = np.clip(np.floor(x * H).astype(int), 0, H - 1)
        s = x * H - cell
        tab = table(self.k, s) / w ** power
        return np.einsum("hnp,pn->hn", self.halfcell_coeffs[:, cell, :], tab)

    def one_sided(self, x, side: str) -> np.ndarray:
        """Left ('-') or right ('+') limits at half-cell grid points x."""
        H = 2 ** (self.N + 1)
        x = np.asarray(x, dtype=float)
        m = np.rint(x * H).astype(int)
        if side == "-":
            cell = np.mod(m - 1, H)  # x = 0 wraps to the last half-cell
            s = np.ones_like(x)
        else:
            cell = np.mod(m, H)
            s = np.zeros_like(x)
        tab = legendre_table(self.k, s) * np.sqrt(H)
        return np.einsum("hnp,pn->hn", self.halfcell_coeffs[:, cell, :], tab)


def level_dim(space: Space1D, l: int) -> int:
    if not 0 <= l <= space.N:
        raise ValueError(f"level {l} outside [0, {space.N}]")
    if l == 0:
        return (2 if space.dual_nonperiodic else 1) * (space.k + 1)
    return 2 ** (l - 1) * (space.k + 1)


def dual_cells(N: int, l: int) -> list[tuple[float, float]]:
    """Cells of the level-l dual grid for finest level N, tiling [0, 1]."""
    if not 0 <= l <= N:
        raise ValueError(f"level {l} outside [0, {N}]")
    hl, half = 2.0 ** (-l), 0.5 * 2.0 ** (-N)
    pts = [0.0] + [j * hl - half for j in range(1, 2 ** l + 1)] + [1.0]
    return list(zip(pts[:-1], pts[1:]))


def level_cells(space: Space1D, l: int) -> list[tuple[float, float]]:
    """Partition of [0, 1] on which every level-l basis function is polynomial."""
    if space.role == "dual":
        return dual_cells(space.N, l)
    n = 2 ** l
    return [(j / n, (j + 1) / n) for j in range(n)]


@lru_cache(maxsize=None)
def _halfcell_coeffs(role, boundary, N, k):
    space = Space1D(role, boundary, N, k)
    H = 2 ** (N + 1)
    q = gauss_rule(k + 1, (0.0, 1.0))
    s, wts = q.nodes, q.weights
    x = ((np.arange(H)[:, None] + s[None, :]) / H).ravel()
    tab = legendre_table(k, s)  # (k+1, nq)
    out = np.empty((space.dim, H, k + 1))
    for n, idx in enumerate(space.indices):
        vals = eval_hier_basis(space, idx, x).reshape(H, len(s))
        # <f, L_a / sqrt(w)> on each half-cell, w = 1/H
        out[n] = (vals * wts) @ tab.T / np.sqrt(H)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Coupling1D:
    kind: str
    test: Space1D
    trial: Space1D
    entries: np.ndarray  # (trial.dim, test.dim)


def _quad_points(N, k, n_points=None):
    H = 2 ** (N + 1)
    q = gauss_rule(n_points or k + 2, (0.0, 1.0))
    x = ((np.arange(H)[:, None] + q.nodes[None, :]) / H).ravel()
    w = np.tile(q.weights / H, H)
    return x, w


def coupling_matrix(kind: str, test: Space1D, trial: Space1D, weight=None,
                    n_points: int | None = None) -> Coupling1D:
    """Assemble a 1D coupling between ``trial`` and ``test`` spaces.

    mass: <trial, test>; stiffness: <trial, d test/dx>; flux: sum over test
    interfaces x_e of trial(x_e) * (test(x_e^-) - test(x_e^+)). Weighted kinds
    multiply the integrand (or the interface value) by ``weight(x)``.
    Domain-boundary faces of nonperiodic spaces are left out. Quadrature uses
    ``n_points`` Gauss points per half-cell: by default k + 2 (exact) for
    unweighted kinds and k + 2 + WEIGHT_EXTRA_POINTS for weighted ones.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown coupling kind {kind!r}; expected one of {KINDS}")
    if (test.N, test.k) != (trial.N, trial.k):
        raise ValueError("test and trial spaces must share N and k")
    weighted = kind.startswith("weighted-")
    if weight is not None and not weighted:
        raise ValueError(f"weight supplied for unweighted kind {kind!r}")
    base = kind.removeprefix("weighted-")
    wfun = weight if weight is not None else (lambda x: np.ones_like(x))

    if base == "flux":
        xe = test.interfaces()
        jump = test.one_sided(xe, "-") - test.one_sided(xe, "+")
        trace = 0.5 * (trial.one_sided(xe, "-") + trial.one_sided(xe, "+"))
        entries = (trace * _as_weight(wfun, xe)) @ jump.T
    else:
        if n_points is None and weighted:
            n_points = test.k + 2 + WEIGHT_EXTRA_POINTS
        x, w = _quad_points(test.N, test.k, n_points)
        tv = trial.values(x)
        sv = test.values(x) if base == "mass" else test.derivatives(x)
        entries = (tv * (w * _as_weight(wfun, x))) @ sv.T
    return Coupling1D(kind, test, trial, entries)


def _as_weight(f, x):
    out = np.asarray(f(x))
    if out.shape != x.shape:
        out = np.broadcast_to(out, x.shape)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("weight function returned non-finite values")
    return out


def boundary_values(space: Space1D, side: str) -> np.ndarray:
    """One-sided values of all basis functions at x=0 ('left') or x=1 ('right')."""
    if side == "left":
        return space.one_sided(np.array([0.0]), "+")[:, 0]
    if side == "right":
        return space.one_sided(np.array([1.0]), "-")[:, 0]
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")
