"""Semi-discrete sparse-grid CDG operator for linear hyperbolic systems.

The system is u^l_t + sum_i d/dx_i (sum_r A_i[l, r](t, x) u^r) = 0 on [0,1]^d.
Each A_i is a sum of separable terms C * prod_r a_r(x_r) * g(t). The primal
copy u_h is tested with primal functions and fed by the dual copy v_h, and
vice versa:

    (u_t, phi) = (v - u, phi) / tau + sum_i [ (A_i v, d_i phi) - sum_e A_i v [phi] ]

Each separable term becomes one tensor-product operator whose direction-i
factor is weighted stiffness minus weighted flux and whose other factors are
weighted cross-masses; all of them are applied with the fast transform.

Dirichlet problems (scalar only) replace the boundary trace by g on inflow
faces; on outflow faces the trace of the opposite mesh is used. With that choice the
boundary contribution to the energy balance is -|A_i| u_h v_h on every face,
which vanishes in the stability argument once u_h = v_h = g = 0 there.
"""
from __future__ import annotations

import logging
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fast_transform import LUSplit, apply, apply_mass, has_identity_mass, lu_split, solve_mass
from .functions import SeparableFunction
from .hierarchy1d import Space1D, boundary_values, coupling_matrix
from .projection import _cells_rule, error_rule, project
from .sparse_space import SparseSpace, enumerate_space

log = logging.getLogger(__name__)

Factor = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CoefficientTerm:
    """matrix * prod_r factors[r](x_r) * time(t); a None factor means 1."""

    matrix: np.ndarray
    factors: tuple[Factor | None, ...]
    time: Callable[[float], float] | None = None

    def time_value(self, t: float) -> float:
        return 1.0 if self.time is None else float(self.time(t))

    def factor_value(self, r: int, x) -> np.ndarray:
        f = self.factors[r]
        x = np.asarray(x, dtype=float)
        return np.ones_like(x) if f is None else np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)


@dataclass(frozen=True)
class HyperbolicSystem:
    d: int
    m: int
    coefficients: tuple[tuple[CoefficientTerm, ...], ...]
    boundary: str = "periodic"
    # g(t) as a separable function of all d coordinates; the factor along the
    # face normal is evaluated on the face (scalar dirichlet problems only)
    boundary_data: Callable[[float], SeparableFunction] | None = None
    name: str = ""

    def __post_init__(self):
        if self.m < 1 or self.d < 1:
            raise ValueError("need m >= 1 and d >= 1")
        if len(self.coefficients) != self.d:
            raise ValueError(f"need coefficient terms for {self.d} directions")
        for i, terms in enumerate(self.coefficients):
            for term in terms:
                if np.shape(term.matrix) != (self.m, self.m):
                    raise ValueError(f"direction {i}: matrix shape {np.shape(term.matrix)} "
                                     f"!= ({self.m}, {self.m})")
                if len(term.factors) != self.d:
                    raise ValueError(f"direction {i}: need {self.d} spatial factors")
        if self.boundary not in ("periodic", "dirichlet"):
            raise ValueError(f"boundary must be 'periodic' or 'dirichlet', got {self.boundary!r}")
        if self.boundary == "dirichlet":
            if self.m != 1:
                raise ValueError("dirichlet boundaries are implemented for scalar problems only")
            if self.boundary_data is None:
                raise ValueError("dirichlet mode needs boundary_data")

    @property
    def mode(self) -> str:
        return "periodic" if self.boundary == "periodic" else "nonperiodic"

    def coefficient(self, i: int, t: float, x: Sequence[np.ndarray]) -> np.ndarray:
        """A_i(t, x) for broadcastable coordinates, shape (m, m) + broadcast shape."""
        shape = np.broadcast_shapes(*[np.shape(xi) for xi in x])
        out = np.zeros((self.m, self.m) + shape)
        for term in self.coefficients[i]:
            val = term.time_value(t) * np.ones(shape)
            for r in range(self.d):
                val = val * term.factor_value(r, x[r])
            out += np.asarray(term.matrix, dtype=float)[(...,) + (None,) * len(shape)] * val
        return out


@dataclass
class SolutionState:
    t: float
    u: np.ndarray  # (m, primal size)
    v: np.ndarray  # (m, dual size)

    def __post_init__(self):
        self.u = np.atleast_2d(np.asarray(self.u, dtype=float))
        self.v = np.atleast_2d(np.asarray(self.v, dtype=float))
        if self.u.shape[0] != self.v.shape[0]:
            raise ValueError("u and v need the same number of components")

    def copy(self) -> "SolutionState":
        return SolutionState(self.t, self.u.copy(), self.v.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v)))


@dataclass(frozen=True, eq=False)
class TensorTerm:
    """One separable piece of the operator, ready for the fast transform."""

    direction: int
    matrix: np.ndarray
    time: Callable[[float], float] | None
    primal: tuple[LUSplit, ...]  # test primal, trial dual
    dual: tuple[LUSplit, ...]  # test dual, trial primal
    columns: np.ndarray  # components r with a nonzero column in matrix

    def scale(self, t):
        return 1.0 if self.time is None else float(self.time(t))


@dataclass(frozen=True, eq=False)
class BoundaryTerm:
    """Outflow face operator and inflow source data for one coefficient term."""

    direction: int
    term: CoefficientTerm
    inflow_side: str  # 'left' or 'right'
    primal: tuple[LUSplit, ...]  # outflow: test primal, trial per outflow_trace
    dual: tuple[LUSplit, ...]


@dataclass(eq=False)
class AssembledOperator:
    system: HyperbolicSystem
    primal: SparseSpace
    dual: SparseSpace
    tau_max: float
    t: float
    coupling_pd: tuple[LUSplit, ...]
    coupling_dp: tuple[LUSplit, ...]
    terms: list[TensorTerm]
    boundary_terms: list[BoundaryTerm] = field(default_factory=list)
    outflow_trace: str = "opposite"


def make_spaces(system: HyperbolicSystem, N: int, k: int, rule: str = "sparse"):
    P = enumerate_space(system.d, N, k, ("primal", system.mode), rule)
    D = enumerate_space(system.d, N, k, ("dual", system.mode), rule)
    return P, D


def default_tau_max(N: int, k: int) -> float:
    return 2.0 ** (-N) / (2 * k + 1)


def _split(kind, test: Space1D, trial: Space1D, weight=None) -> LUSplit:
    if kind == "mass" and weight is None:
        return _split_mass(test, trial)
    if weight is None:
        t = coupling_matrix(kind, test, trial).entries
    else:
        t = coupling_matrix("weighted-" + kind, test, trial, weight=weight).entries
    return lu_split(t, trial.layout, test.layout)


_MASS_CACHE: dict = {}


def _split_mass(test, trial):
    key = (test, trial)
    if key not in _MASS_CACHE:
        t = coupling_matrix("mass", test, trial).entries
        _MASS_CACHE[key] = lu_split(t, trial.layout, test.layout)
    return _MASS_CACHE[key]


def _derivative_split(test, trial, weight):
    if weight is None:
        t = coupling_matrix("stiffness", test, trial).entries - \
            coupling_matrix("flux", test, trial).entries
    else:
        t = coupling_matrix("weighted-stiffness", test, trial, weight=weight).entries - \
            coupling_matrix("weighted-flux", test, trial, weight=weight).entries
    return lu_split(t, trial.layout, test.layout)


def _tensor_splits(test_sp, trial_sp, term: CoefficientTerm, i: int):
    out = []
    for r, (te, tr) in enumerate(zip(test_sp, trial_sp)):
        w = term.factors[r]
        out.append(_derivative_split(te, tr, w) if r == i else _split("mass", te, tr, w))
    return tuple(out)


def inflow_side(system: HyperbolicSystem, i: int, t: float, N: int, k: int) -> str:
    """'left' if A_i > 0 everywhere (inflow at x_i = 0), 'right' if A_i < 0."""
    n = min(2 ** N * (k + 2), int(round(2.0e6 ** (1.0 / system.d))))
    x = (np.arange(n) + 0.5) / n
    grid = np.meshgrid(*([x] * system.d), indexing="ij", sparse=True)
    a = system.coefficient(i, t, grid)[0, 0]
    if np.all(a > 0):
        return "left"
    if np.all(a < 0):
        return "right"
    raise ValueError(f"coefficient A_{i + 1} is not sign-definite on the domain; "
                     "inflow/outflow faces cannot be classified")


def assemble(system: HyperbolicSystem, spaces: tuple[SparseSpace, SparseSpace],
             tau_max: float | None = None, t: float = 0.0,
             outflow_trace: str = "opposite") -> AssembledOperator:
    """Build all factored 1D operators of the scheme.

    Spatial factors are taken as time independent; time factors are applied
    as scalars when the right-hand side is evaluated.
    """
    P, D = spaces
    if P.spaces is None or D.spaces is None:
        raise ValueError("spaces must come from enumerate_space/make_spaces")
    N, k = P.N, P.k
    if tau_max is None:
        tau_max = default_tau_max(N, k)
    if not tau_max > 0:
        raise ValueError(f"tau_max must be positive, got {tau_max}")
    if outflow_trace not in ("opposite", "own"):
        raise ValueError("outflow_trace must be 'opposite' or 'own'")
    ps, ds = P.spaces, D.spaces
    coupling_pd = tuple(_split("mass", te, tr) for te, tr in zip(ps, ds))
    coupling_dp = tuple(_split("mass", te, tr) for te, tr in zip(ds, ps))
    terms = []
    for i, dir_terms in enumerate(system.coefficients):
        for term in dir_terms:
            C = np.asarray(term.matrix, dtype=float)
            cols = np.flatnonzero(np.any(C != 0, axis=0))
            if len(cols) == 0:
                continue
            terms.append(TensorTerm(i, C, term.time, _tensor_splits(ps, ds, term, i),
                                    _tensor_splits(ds, ps, term, i), cols))
    bterms = []
    if system.boundary == "dirichlet":
        for i, dir_terms in enumerate(system.coefficients):
            side = inflow_side(system, i, t, N, k)
            out_side = "right" if side == "left" else "left"
            for term in dir_terms:
                bterms.append(BoundaryTerm(
                    i, term, side,
                    _outflow_splits(ps, ds if outflow_trace == "opposite" else ps, term, i, out_side),
                    _outflow_splits(ds, ps if outflow_trace == "opposite" else ds, term, i, out_side)))
    return AssembledOperator(system, P, D, float(tau_max), float(t), coupling_pd, coupling_dp,
                             terms, bterms, outflow_trace)


def _outflow_splits(test_sp, trial_sp, term: CoefficientTerm, i: int, side: str):
    normal = 1.0 if side == "right" else -1.0
    xb = 1.0 if side == "right" else 0.0
    out = []
    for r, (te, tr) in enumerate(zip(test_sp, trial_sp)):
        if r == i:
            a = float(term.factor_value(r, np.array([xb]))[0])
            t1 = -normal * a * np.outer(boundary_values(tr, side), boundary_values(te, side))
            out.append(lu_split(t1, tr.layout, te.layout))
        else:
            out.append(_split("mass", te, tr, term.factors[r]))
    return tuple(out)


# -- evaluation -----------------------------------------------------------------

def _check(x, what):
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite values in {what}")
    return x


@lru_cache(maxsize=512)
def _inner_1d(s1: Space1D, w: Factor | None, g: Callable) -> np.ndarray:
    """int w g v over [0,1] for every 1D basis function v (cached per factor object)."""
    x, wt, vals = _fine_rule(s1)
    wx = np.ones_like(x) if w is None else np.asarray(w(x), dtype=float)
    f = wt * wx * np.asarray(g(x))
    if np.iscomplexobj(f):
        return vals @ f.real + 1j * (vals @ f.imag)
    return vals @ f


@lru_cache(maxsize=None)
def _fine_rule(s1: Space1D):
    H = 2 ** (s1.N + 1)
    x, wt = _cells_rule([(j / H, (j + 1) / H) for j in range(H)], max(s1.k + 2, 8))
    return x, wt, s1.values(x)


def _inflow_source(op: AssembledOperator, space: SparseSpace, t: float) -> np.ndarray:
    g = op.system.boundary_data(t)
    out = np.zeros(space.size, dtype=complex)
    for bt in op.boundary_terms:
        i, term = bt.direction, bt.term
        side = bt.inflow_side
        normal = -1.0 if side == "left" else 1.0
        xb = 0.0 if side == "left" else 1.0
        a = float(term.factor_value(i, np.array([xb]))[0]) * term.time_value(t) * \
            float(np.asarray(term.matrix)[0, 0])
        bv = boundary_values(space.spaces[i], side)
        for gt in g.terms:
            prod = np.full(space.size, -normal * a * gt.coeff *
                           complex(np.asarray(gt.factors[i](np.array([xb])))[0]), dtype=complex)
            prod *= bv[space.index1d[:, i]]
            for r, s1 in enumerate(space.spaces):
                if r != i:
                    prod *= _inner_1d(s1, term.factors[r], gt.factors[r])[space.index1d[:, r]]
            out += prod
    return out.real


def _apply_terms(op: AssembledOperator, X: np.ndarray, which: str, t: float, Y: np.ndarray):
    # X: (m, n_trial); accumulates into Y: (m, n_test)
    sp_in, sp_out = (op.dual, op.primal) if which == "primal" else (op.primal, op.dual)
    for term in op.terms:
        splits = term.primal if which == "primal" else term.dual
        cols = term.columns
        Z = apply(X[cols].T, splits, sp_in, sp_out)  # (n_test, len(cols))
        _check(Z, f"{which} equation, direction {term.direction + 1}")
        Y += term.scale(t) * (term.matrix[:, cols] @ Z.T)


def rhs(state: SolutionState, op: AssembledOperator) -> SolutionState:
    """Time derivative of (u_h, v_h) at state.t."""
    t = state.t
    u, v = state.u, state.v
    sys = op.system
    if u.shape != (sys.m, op.primal.size) or v.shape != (sys.m, op.dual.size):
        raise ValueError("state does not match the operator's spaces")
    inv_tau = 1.0 / op.tau_max
    identity = has_identity_mass(op.dual)
    du = inv_tau * (apply(v.T, op.coupling_pd, op.dual, op.primal).T - u)
    # the dual -v/tau term is added after the mass solve
    dv = inv_tau * apply(u.T, op.coupling_dp, op.primal, op.dual).T
    _apply_terms(op, v, "primal", t, du)
    _apply_terms(op, u, "dual", t, dv)
    if op.boundary_terms:
        own = op.outflow_trace == "own"
        for bt in op.boundary_terms:
            s = bt.term.time_value(t) * float(np.asarray(bt.term.matrix)[0, 0])
            src_p, src_d = (u, v) if own else (v, u)
            du += s * apply(src_p.T, bt.primal, op.primal if own else op.dual, op.primal).T
            dv += s * apply(src_d.T, bt.dual, op.dual if own else op.primal, op.dual).T
        du[0] += _inflow_source(op, op.primal, t)
        dv[0] += _inflow_source(op, op.dual, t)
    for l in range(sys.m):
        _check(du[l], f"primal equation, component {l + 1}")
        _check(dv[l], f"dual equation, component {l + 1}")
    if not identity:
        dv = solve_mass(dv.T, op.dual, refine=False).T
    dv -= inv_tau * v
    return SolutionState(t, du, dv)


def energy(state: SolutionState, op_or_dual) -> float:
    """sum_l ||u^l||^2 + ||v^l||^2, the dual norm through the dual mass."""
    dual = op_or_dual.dual if isinstance(op_or_dual, AssembledOperator) else op_or_dual
    e = float(np.sum(state.u * state.u))
    Mv = apply_mass(state.v.T, dual).T
    return e + float(np.sum(state.v * Mv))


def coupling_defect(state: SolutionState, op: AssembledOperator) -> float:
    """||u_h - v_h||^2 over the domain."""
    uv = np.sum(state.u * apply(state.v.T, op.coupling_pd, op.dual, op.primal).T)
    return float(np.sum(state.u * state.u) + np.sum(state.v * apply_mass(state.v.T, op.dual).T)
                 - 2 * uv)


def project_state(f, spaces, t: float = 0.0, m: int = 1) -> SolutionState:
    """Project component functions onto both spaces.

    ``f`` is one scalar function (m = 1) or a sequence of m functions.
    """
    P, D = spaces
    fs = [f] if m == 1 and not isinstance(f, (list, tuple)) else list(f)
    u = np.array([project(fi, P) for fi in fs])
    v = np.array([project(fi, D) for fi in fs])
    return SolutionState(t, u, v)


__all__ = [
    "CoefficientTerm", "HyperbolicSystem", "SolutionState", "AssembledOperator",
    "make_spaces", "assemble", "rhs", "energy", "coupling_defect", "project_state",
    "default_tau_max", "inflow_side", "error_rule",
]
