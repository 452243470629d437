"""One-dimensional orthonormal Legendre and Alpert multiwavelet bases.

Everything lives on the reference interval [0, 1]. A piecewise polynomial is
stored as breakpoints plus, on each interval, coefficients in the Legendre
basis that is orthonormal on that interval. With that choice the L2 inner
product of two piecewise polynomials on a common partition is a plain dot
product of their coefficient arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.linalg import null_space

MAX_DEGREE = 5


def legendre_table(k: int, s: np.ndarray) -> np.ndarray:
    """Legendre polynomials orthonormal on [0, 1], degrees 0..k, at points s.

    Returns an array of shape (k + 1, len(s)).
    """
    s = np.asarray(s, dtype=float)
    xi = 2.0 * s - 1.0
    out = np.empty((k + 1,) + xi.shape)
    for p in range(k + 1):
        c = np.zeros(p + 1)
        c[p] = 1.0
        out[p] = np.sqrt(2 * p + 1) * npleg.legval(xi, c)
    return out


def legendre_deriv_table(k: int, s: np.ndarray) -> np.ndarray:
    """d/ds of :func:`legendre_table`, same shape."""
    s = np.asarray(s, dtype=float)
    xi = 2.0 * s - 1.0
    out = np.empty((k + 1,) + xi.shape)
    for p in range(k + 1):
        c = np.zeros(p + 1)
        c[p] = 1.0
        out[p] = 2.0 * np.sqrt(2 * p + 1) * npleg.legval(xi, npleg.legder(c))
    return out


@dataclass(frozen=True)
class Quadrature:
    """Gauss-Legendre nodes and weights on ``interval``."""

    nodes: np.ndarray
    weights: np.ndarray
    interval: tuple[float, float] = (0.0, 1.0)

    def on(self, a: float, b: float) -> "Quadrature":
        lo, hi = self.interval
        scale = (b - a) / (hi - lo)
        return Quadrature(a + (self.nodes - lo) * scale, self.weights * scale, (a, b))

    def integrate(self, f) -> float:
        return float(np.sum(self.weights * f(self.nodes)))


@lru_cache(maxsize=None)
def _leggauss(n: int):
    x, w = npleg.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_rule(n: int, interval: tuple[float, float] = (0.0, 1.0)) -> Quadrature:
    """n-point Gauss-Legendre rule, exact for polynomials of degree 2n - 1."""
    if n < 1:
        raise ValueError(f"gauss_rule needs n >= 1, got {n}")
    x, w = _leggauss(n)
    return Quadrature(x.copy(), w.copy(), (-1.0, 1.0)).on(*interval)


@dataclass(frozen=True, eq=False)
class PiecewisePoly:
    """Piecewise polynomial on [0, 1] in per-interval orthonormal Legendre form.

    Evaluation is right-continuous at interior breakpoints; x = 1 takes the
    value from the last interval.
    """

    breakpoints: np.ndarray
    coeffs: np.ndarray  # (n_intervals, k + 1)

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        c = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        if b[0] != 0.0 or b[-1] != 1.0 or np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must increase strictly from 0 to 1")
        if c.shape[0] != len(b) - 1:
            raise ValueError("need one coefficient row per interval")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1

    def _locate(self, x):
        x = np.asarray(x, dtype=float)
        cell = np.clip(np.searchsorted(self.breakpoints, x, side="right") - 1,
                       0, len(self.breakpoints) - 2)
        a = self.breakpoints[cell]
        w = self.breakpoints[cell + 1] - a
        return x, cell, (x - a) / w, w

    def __call__(self, x):
        x, cell, s, w = self._locate(x)
        tab = legendre_table(self.degree, s)
        val = np.einsum("...p,p...->...", self.coeffs[cell], tab) / np.sqrt(w)
        inside = (x >= 0.0) & (x <= 1.0)
        return np.where(inside, val, 0.0)

    def derivative(self, x):
        x, cell, s, w = self._locate(x)
        tab = legendre_deriv_table(self.degree, s)
        return np.einsum("...p,p...->...", self.coeffs[cell], tab) / w ** 1.5

    def inner(self, other: "PiecewisePoly", n_points: int | None = None) -> float:
        """L2(0, 1) inner product by Gauss quadrature on the merged partition."""
        pts = np.union1d(self.breakpoints, other.breakpoints)
        n = n_points or (self.degree + other.degree) // 2 + 1
        total = 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            q = gauss_rule(n, (a, b))
            total += float(np.sum(q.weights * self(q.nodes) * other(q.nodes)))
        return total


def _check_degree(k: int):
    if k < 0:
        raise ValueError(f"degree must be >= 0, got {k}")
    if k > MAX_DEGREE:
        raise ValueError(f"degree {k} exceeds supported maximum {MAX_DEGREE}")


def legendre_orthonormal(k: int, cell: tuple[float, float] = (0.0, 1.0)) -> list[PiecewisePoly]:
    """Legendre polynomials of degree 0..k orthonormal in L2(cell), zero elsewhere."""
    _check_degree(k)
    a, b = map(float, cell)
    if not b > a:
        raise ValueError(f"degenerate cell [{a}, {b}]")
    if a < 0.0 or b > 1.0:
        raise ValueError("cell must lie inside [0, 1]")
    bps = np.unique([0.0, a, b, 1.0])
    target = int(np.searchsorted(bps, a))
    out = []
    for p in range(k + 1):
        c = np.zeros((len(bps) - 1, k + 1))
        c[target, p] = 1.0
        out.append(PiecewisePoly(bps, c))
    return out


@lru_cache(maxsize=None)
def _alpert_coeffs(k: int) -> np.ndarray:
    """Alpert coefficients, shape (k + 1, 2, k + 1): [function, half, degree]."""
    n = k + 1
    # moments against Legendre polynomials on [0, 1] (same spans as x^q,
    # better conditioned), expressed in the two-half coefficient space
    q = gauss_rule(2 * n + 1)
    moments = np.zeros((2 * n, 2 * n))  # [moment degree, coefficient]
    for half, (a, b) in enumerate([(0.0, 0.5), (0.5, 1.0)]):
        qq = q.on(a, b)
        tab = legendre_table(k, (qq.nodes - a) / (b - a)) / np.sqrt(b - a)
        test = legendre_table(2 * n - 1, qq.nodes)
        moments[:, half * n:(half + 1) * n] = (test * qq.weights) @ tab.T
    base = null_space(moments[:n])  # orthonormal, (2n, n)
    extra = moments[n:] @ base  # higher moments in null-space coordinates
    chosen: list[np.ndarray] = []
    for p in range(k, -1, -1):
        cons = extra[:p]
        if chosen:
            cons = np.vstack([cons, np.array(chosen)])
        y = null_space(cons) if cons.size else np.eye(n)
        vec = y[:, 0]
        for prev in chosen:  # re-orthogonalisation pass
            vec = vec - prev * (prev @ vec)
        chosen.append(vec / np.linalg.norm(vec))
    funcs = np.array([base @ y for y in reversed(chosen)])
    for i, f in enumerate(funcs):
        lead = f[np.flatnonzero(np.abs(f) > 1e-8)[0]]
        if lead < 0:
            funcs[i] = -f
    return funcs.reshape(n, 2, n)


def alpert_mother(k: int) -> list[PiecewisePoly]:
    """The k + 1 Alpert multiwavelets on [0, 1] (one break at 1/2).

    They are orthonormal and orthogonal to every polynomial of degree <= k;
    function p additionally annihilates x^(k+1), ..., x^(k+p).
    """
    _check_degree(k)
    coeffs = _alpert_coeffs(k)
    bps = np.array([0.0, 0.5, 1.0])
    return [PiecewisePoly(bps, coeffs[p]) for p in range(k + 1)]


def _in_cell(x, a, b, closed_right):
    return (x >= a) & ((x <= b) if closed_right else (x < b))


def _primal_value(k: int, l: int, j: int, p: int, x: np.ndarray) -> np.ndarray:
    if l == 0:
        tab = legendre_table(k, np.clip(x, 0.0, 1.0))[p]
        return np.where((x >= 0.0) & (x <= 1.0), tab, 0.0)
    scale = 2.0 ** (l - 1)
    a, b = j / scale, (j + 1) / scale
    y = scale * x - j
    w = alpert_mother(k)[p]
    val = np.sqrt(scale) * w(np.clip(y, 0.0, 1.0))
    return np.where(_in_cell(x, a, b, closed_right=(b >= 1.0)), val, 0.0)


def check_index(space, l: int, j: int, p: int) -> None:
    """Raise ValueError naming the violated bound if (l, j, p) is not a basis index."""
    if not 0 <= l <= space.N:
        raise ValueError(f"level l={l} outside [0, {space.N}]")
    if not 0 <= p <= space.k:
        raise ValueError(f"degree p={p} outside [0, {space.k}]")
    if l == 0:
        jmax = 1 if (space.role == "dual" and space.boundary == "nonperiodic") else 0
    else:
        jmax = 2 ** (l - 1) - 1
    if not 0 <= j <= jmax:
        raise ValueError(f"translation j={j} outside [0, {jmax}] at level {l}")


def eval_hier_basis(space, s: tuple[int, int, int], x) -> np.ndarray:
    """Value of hierarchical basis function s = (l, j, p) of ``space`` at x.

    ``space`` needs ``role`` ('primal'/'dual'), ``boundary``
    ('periodic'/'nonperiodic'), ``N`` and ``k``. Dual functions are the primal
    ones shifted left by h_N / 2, wrapped around (periodic) or truncated at
    x = 1 - h_N / 2 with extra Legendre modes on [1 - h_N / 2, 1] (nonperiodic).
    """
    l, j, p = (int(v) for v in s)
    check_index(space, l, j, p)
    x = np.asarray(x, dtype=float)
    k = space.k
    if space.role == "primal":
        return _primal_value(k, l, j, p, x)
    half = 0.5 * 2.0 ** (-space.N)
    if space.boundary == "periodic":
        return _primal_value(k, l, j, p, np.mod(x + half, 1.0))
    cut = 1.0 - half
    if l == 0 and j == 1:
        s_loc = np.clip((x - cut) / half, 0.0, 1.0)
        val = legendre_table(k, s_loc)[p] / np.sqrt(half)
        return np.where((x >= cut) & (x <= 1.0), val, 0.0)
    val = _primal_value(k, l, j, p, np.minimum(x + half, 1.0))
    return np.where((x >= 0.0) & (x < cut), val, 0.0)
