"""Dense reference implementations for the d = 2 scheme.

Everything here is built from pointwise basis values (``eval_hier_basis``)
fitted to Legendre series on every quarter cell of the finest mesh, so it
shares no quadrature, half-cell representation or transform code with the
package. Integrals are full 2D tensor Gauss sums of the pointwise integrand,
so coefficients need not be separable.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as leg

from sgcdg.basis1d import eval_hier_basis

# Gauss points per quarter cell; enough for smooth non-polynomial data to round-off
QUAD_POINTS = 12


class Table1D:
    """1D basis functions of one space as Legendre series on quarter cells."""

    def __init__(self, space1d):
        self.space = space1d
        self.k = space1d.k
        self.n = 2 ** (space1d.N + 2)
        xg, _ = leg.leggauss(self.k + 2)
        coef = np.zeros((space1d.dim, self.n, self.k + 1))
        for c in range(self.n):
            x = (c + (xg + 1) / 2) / self.n
            vals = np.array([eval_hier_basis(space1d, s, x) for s in space1d.indices])
            coef[:, c, :] = leg.legfit(xg, vals.T, self.k).T
        self.coef = coef
        self.dcoef = np.stack([[leg.legder(coef[f, c]) * 2 * self.n for c in range(self.n)]
                               for f in range(space1d.dim)]) if self.k > 0 else np.zeros_like(coef[..., :1])

    def _at(self, coef, cells, y):
        V = leg.legvander(y, coef.shape[2] - 1)
        return np.einsum("fpq,pq->fp", coef[:, cells, :], V)

    def values(self, x, side="+", deriv=False):
        """Values (dim, len(x)); at breakpoints take the left ('-') or right ('+') limit."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        t = x * self.n
        if side == "+":
            cells = np.floor(t + 1e-12).astype(int)
        else:
            cells = np.ceil(t - 1e-12).astype(int) - 1
        cells = np.mod(cells, self.n)  # x = 0 from the left wraps (periodic use only)
        y = 2 * (t - np.floor(t + 1e-12) if side == "+" else t - (np.ceil(t - 1e-12) - 1)) - 1
        return self._at(self.dcoef if deriv else self.coef, cells, y)


@lru_cache(maxsize=None)
def table(space1d) -> Table1D:
    return Table1D(space1d)


def gauss_points(N, k):
    n = 2 ** (N + 2)
    xg, wg = leg.leggauss(max(k + 3, QUAD_POINTS))
    x = ((np.arange(n)[:, None] + (xg[None, :] + 1) / 2) / n).ravel()
    w = np.tile(wg / (2 * n), n)
    return x, w


def faces(space1d):
    h = 2.0 ** -space1d.N
    n = 2 ** space1d.N
    if space1d.role == "dual":
        return (np.arange(n) + 0.5) * h
    start = 0 if space1d.boundary == "periodic" else 1
    return np.arange(start, n) * h


def _pairs(te, tr, x, w, te_mode="value", tr_side=None):
    """Rows (s_te, t_tr) of products of test and trial values at points x."""
    if te_mode == "value":
        A = te.values(x)
    elif te_mode == "deriv":
        A = te.values(x, deriv=True)
    elif te_mode == "jump":
        A = te.values(x, "-") - te.values(x, "+")
    else:  # a one-sided limit '-' or '+'
        A = te.values(x, te_mode)
    if tr_side is None:
        B = tr.values(x)
    elif tr_side == "avg":
        B = 0.5 * (tr.values(x, "-") + tr.values(x, "+"))
    else:
        B = tr.values(x, tr_side)
    return (A[:, None, :] * B[None, :, :] * w).reshape(-1, len(x))


def _assemble(test_sp, trial_sp, per_dim, weight):
    """E[s, t] = sum over points of per-dim pair rows times weight(x1, x2)."""
    (P0, x0), (P1, x1) = per_dim
    X0, X1 = np.meshgrid(x0, x1, indexing="ij")
    A = np.ones_like(X0) if weight is None else np.asarray(weight(X0, X1), dtype=float) * np.ones_like(X0)
    R = P0 @ A @ P1.T
    n0 = trial_sp.spaces[0].dim
    n1 = trial_sp.spaces[1].dim
    i0 = test_sp.index1d[:, 0][:, None] * n0 + trial_sp.index1d[:, 0][None, :]
    i1 = test_sp.index1d[:, 1][:, None] * n1 + trial_sp.index1d[:, 1][None, :]
    return R[i0, i1]


def mass(test_sp, trial_sp, weight=None):
    N, k = test_sp.N, test_sp.k
    x, w = gauss_points(N, k)
    per = [(_pairs(table(test_sp.spaces[r]), table(trial_sp.spaces[r]), x, w), x) for r in range(2)]
    return _assemble(test_sp, trial_sp, per, weight)


def derivative_operator(test_sp, trial_sp, i, weight=None):
    """int a v d_i phi - sum over interior test faces of a v [phi]."""
    N, k = test_sp.N, test_sp.k
    x, w = gauss_points(N, k)
    tes = [table(s) for s in test_sp.spaces]
    trs = [table(s) for s in trial_sp.spaces]
    vol = [(_pairs(tes[r], trs[r], x, w, "deriv" if r == i else "value"), x) for r in range(2)]
    e = faces(test_sp.spaces[i])
    fac = [(_pairs(tes[r], trs[r], e, np.ones_like(e), "jump", "avg"), e) if r == i
           else (_pairs(tes[r], trs[r], x, w), x) for r in range(2)]
    return _assemble(test_sp, trial_sp, vol, weight) - _assemble(test_sp, trial_sp, fac, weight)


def outflow_operator(test_sp, trial_sp, i, side, weight=None):
    """-n a w phi on the face x_i = 0 ('left', n = -1) or x_i = 1 ('right', n = 1)."""
    N, k = test_sp.N, test_sp.k
    x, w = gauss_points(N, k)
    xb = np.array([1.0 if side == "right" else 0.0])
    lim = "-" if side == "right" else "+"
    normal = 1.0 if side == "right" else -1.0
    tes = [table(s) for s in test_sp.spaces]
    trs = [table(s) for s in trial_sp.spaces]
    per = [(_pairs(tes[r], trs[r], xb, np.ones(1), lim, lim), xb) if r == i
           else (_pairs(tes[r], trs[r], x, w), x) for r in range(2)]
    return -normal * _assemble(test_sp, trial_sp, per, weight)


def inflow_vector(test_sp, i, side, a, g):
    """-n a g phi on the inflow face; a and g take (x1, x2) arrays."""
    N, k = test_sp.N, test_sp.k
    x, w = gauss_points(N, k)
    xb = 1.0 if side == "right" else 0.0
    lim = "-" if side == "right" else "+"
    normal = 1.0 if side == "right" else -1.0
    j = 1 - i
    te_b = table(test_sp.spaces[i]).values(np.array([xb]), lim)[:, 0]
    te_o = table(test_sp.spaces[j]).values(x)
    pts = [None, None]
    pts[i], pts[j] = np.full_like(x, xb), x
    vals = np.asarray(a(*pts) * g(*pts), dtype=float) * np.ones_like(x)
    line = te_o @ (w * vals)
    return -normal * te_b[test_sp.index1d[:, i]] * line[test_sp.index1d[:, j]]


def restricted_product(f, mats, space_in, space_out):
    """b_j = sum_s f_s prod_r t_r[s_r, j_r] over the two index sets, by explicit loops."""
    f = np.asarray(f, dtype=float)
    out = np.zeros(space_out.size)
    for s in range(space_in.size):
        if f[s] == 0:
            continue
        si = space_in.index1d[s]
        for j in range(space_out.size):
            sj = space_out.index1d[j]
            v = f[s]
            for r, t in enumerate(mats):
                v *= t[si[r], sj[r]]
            out[j] += v
    return out


def reference_rhs(system, spaces, tau, u, v, t=0.0, boundary_data=None):
    """Dense right-hand side (du, dv) of the CDG scheme for d = 2.

    Coefficients are sampled pointwise from ``system.coefficient``;
    ``boundary_data(x1, x2)`` gives the Dirichlet value at time t.
    """
    P, D = spaces
    m = system.m
    M_pd, M_dp, M_dd, M_pp = mass(P, D), mass(D, P), mass(D, D), mass(P, P)
    bu = (M_pd @ v.T - M_pp @ u.T).T / tau
    bv = (M_dp @ u.T - M_dd @ v.T).T / tau
    for i in range(2):
        for l in range(m):
            for r in range(m):
                def a(x1, x2, i=i, l=l, r=r):
                    return system.coefficient(i, t, [x1, x2])[l, r]
                probe = system.coefficient(i, t, [np.linspace(0.01, 0.99, 7)[:, None],
                                                  np.linspace(0.01, 0.99, 7)[None, :]])[l, r]
                if not np.any(probe != 0):
                    continue
                bu[l] += derivative_operator(P, D, i, a) @ v[r]
                bv[l] += derivative_operator(D, P, i, a) @ u[r]
                if system.boundary == "dirichlet":
                    side_in = "left" if np.all(probe > 0) else "right"
                    side_out = "right" if side_in == "left" else "left"
                    bu[l] += outflow_operator(P, D, i, side_out, a) @ v[r]
                    bv[l] += outflow_operator(D, P, i, side_out, a) @ u[r]
                    bu[l] += inflow_vector(P, i, side_in, a, boundary_data)
                    bv[l] += inflow_vector(D, i, side_in, a, boundary_data)
    du = np.linalg.solve(M_pp, bu.T).T
    dv = np.linalg.solve(M_dd, bv.T).T
    return du, dv
