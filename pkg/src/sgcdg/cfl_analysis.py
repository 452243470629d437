"""Linear stability (CFL) analysis by dense eigenvalues of the semi-discrete operator.

Schemes: ``dg`` and ``sparse-dg`` (upwind DG on the primal mesh, full or
sparse index set) and ``cdg`` and ``sparse-cdg``. Only constant-coefficient
periodic advection u_t + sum_i c_i u_{x_i} = 0 is handled.

For the CDG variants the operator is A + C / tau where C is the coupling
term. With ``tau="dt"`` the coupling time scale follows the time step, so the
amplification is governed by the eigenvalues of dt A + C.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .cdg_operator import CoefficientTerm, HyperbolicSystem, assemble, make_spaces
from .fast_transform import apply, lu_split
from .hierarchy1d import coupling_matrix
from .sparse_space import enumerate_space

MAX_DENSE_DOF = 20000
SCHEMES = ("dg", "cdg", "sparse-dg", "sparse-cdg")
RESOLUTION = 0.005
STABILITY_SLACK = 1e-10

# published values (d = 2, unit speeds): scheme -> {(k, nu): cfl}
TABLE1 = {
    "dg": {(1, 2): 0.33, (1, 3): 0.40, (2, 3): 0.20, (3, 3): 0.13,
           (1, 4): 0.46, (2, 4): 0.23, (3, 4): 0.14},
    "cdg": {(1, 2): 0.48, (1, 3): 0.66, (2, 3): 0.36, (3, 3): 0.24,
            (1, 4): 0.90, (2, 4): 0.52, (3, 4): 0.35},
    "sparse-dg": {(1, 2): 0.66, (1, 3): 0.81, (2, 3): 0.41, (3, 3): 0.25,
                  (1, 4): 0.92, (2, 4): 0.46, (3, 4): 0.28},
    "sparse-cdg": {(1, 2): 0.87, (1, 3): 1.17, (2, 3): 0.65, (3, 3): 0.44,
                   (1, 4): 1.58, (2, 4): 0.94, (3, 4): 0.62},
}


class DofGuardError(ValueError):
    pass


@dataclass
class DenseOperator:
    """dX/dt = (A + C / tau) X with X = (primal DoF, dual DoF) for CDG."""

    scheme: str
    A: np.ndarray
    C: np.ndarray | None
    h: float
    speeds: tuple[float, ...]
    n_primal: int | None = None

    def matrix(self, tau: float | None = None) -> np.ndarray:
        if self.C is None:
            return self.A
        if tau is None or not tau > 0:
            raise ValueError("CDG operators need tau > 0")
        return self.A + self.C / tau


def _advection_system(d, speeds, boundary="periodic"):
    coef = tuple((CoefficientTerm(np.array([[float(c)]]), (None,) * d),) for c in speeds)
    return HyperbolicSystem(d, 1, coef, boundary)


def _probe(lus, space_in, space_out):
    # columns are basis states; result row j = image of basis state j
    return apply(np.eye(space_in.size), lus, space_in, space_out).T


def build_dense_operator(scheme: str, d: int, N: int, k: int, speeds=None) -> DenseOperator:
    """Probe the semi-discrete operator column by column."""
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}")
    speeds = tuple(float(c) for c in (speeds if speeds is not None else [1.0] * d))
    if len(speeds) != d:
        raise ValueError("need one speed per direction")
    rule = "sparse" if scheme.startswith("sparse") else "full"
    h = 2.0 ** (-N)
    if scheme.endswith("cdg"):
        system = _advection_system(d, speeds)
        P, D = make_spaces(system, N, k, rule)
        n = P.size + D.size
        _guard(n)
        op = assemble(system, (P, D), tau_max=1.0)
        A = np.zeros((n, n))
        C = np.zeros((n, n))
        p = P.size
        C[:p, :p] = -np.eye(p)
        C[p:, p:] = -np.eye(D.size)
        C[:p, p:] = _probe(op.coupling_pd, D, P)
        C[p:, :p] = _probe(op.coupling_dp, P, D)
        for term in op.terms:
            c = float(term.matrix[0, 0])
            A[:p, p:] += c * _probe(term.primal, D, P)
            A[p:, :p] += c * _probe(term.dual, P, D)
        return DenseOperator(scheme, A, C, h, speeds, p)
    P = enumerate_space(d, N, k, ("primal", "periodic"), rule)
    _guard(P.size)
    A = np.zeros((P.size, P.size))
    for i, c in enumerate(speeds):
        if c == 0:
            continue
        lus = [_upwind_split(s, c) if r == i else _mass_split(s) for r, s in enumerate(P.spaces)]
        A += c * _probe(lus, P, P)
    return DenseOperator(scheme, A, None, h, speeds)


def _guard(n):
    if n > MAX_DENSE_DOF:
        raise DofGuardError(f"{n} DoF exceeds the dense-analysis limit {MAX_DENSE_DOF}")


@lru_cache(maxsize=None)
def _mass_split(s):
    t = coupling_matrix("mass", s, s).entries
    return lu_split(t, s.layout, s.layout)


@lru_cache(maxsize=None)
def _upwind_split(s, c):
    """Stiffness minus upwind flux for u_t + c u_x = 0 (trial upwind trace)."""
    xe = s.interfaces()
    jump = s.one_sided(xe, "-") - s.one_sided(xe, "+")
    trace = s.one_sided(xe, "-" if c > 0 else "+")
    t = coupling_matrix("stiffness", s, s).entries - trace @ jump.T
    return lu_split(t, s.layout, s.layout)


def _coupled_eigs(L: DenseOperator, dt: float) -> np.ndarray:
    """Eigenvalues of dt A + C.

    When both diagonal blocks are -I (orthonormal primal and dual bases) the
    matrix is [[-I, X], [Y, -I]] and its eigenvalues mu satisfy
    (mu + 1)^2 in eig(X Y), which halves the size of the eigenproblem.
    """
    M = dt * L.A + L.C
    p = L.n_primal
    try:
        if p is not None and _minus_identity(M[:p, :p]) and _minus_identity(M[p:, p:]) and p * 2 == len(M):
            s = np.sqrt(np.linalg.eigvals(M[:p, p:] @ M[p:, :p]).astype(complex))
            return np.concatenate([-1 + s, -1 - s])
        return np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"eigensolver failed: {exc}") from exc


def _minus_identity(B):
    return B.shape[0] == B.shape[1] and np.array_equal(B, -np.eye(len(B)))


def taylor_amplification(z: np.ndarray, nu: int) -> np.ndarray:
    """R_nu(z) = sum_{j <= nu} z^j / j!."""
    out = np.ones_like(z, dtype=complex)
    term = np.ones_like(z, dtype=complex)
    for j in range(1, nu + 1):
        term = term * z / j
        out = out + term
    return out


def _stable(eigs, nu):
    return bool(np.all(np.abs(taylor_amplification(eigs, nu)) <= 1 + STABILITY_SLACK))


def dt_from_cfl(c: float, h: float, speeds) -> float:
    return c / sum(abs(s) / h for s in speeds)


def max_cfl(L, nu: int, h: float, speeds, tau: str | float = "fixed", k: int | None = None,
            c_max: float = 4.0, resolution: float = RESOLUTION) -> float:
    """Largest stable CFL number, bisected to ``resolution`` and rounded to 0.01.

    ``L`` is a :class:`DenseOperator` or a plain matrix (then ``tau`` is
    ignored). ``tau="fixed"`` uses tau = h/(2k+1); ``tau="dt"`` sets tau
    equal to the time step; a number is used as tau directly.
    """
    if nu not in (2, 3, 4):
        raise ValueError("nu must be 2, 3 or 4")
    unit = dt_from_cfl(1.0, h, speeds)
    if isinstance(L, DenseOperator) and L.C is not None and tau == "dt":
        cache = {}

        def stable(c):
            if c not in cache:
                cache[c] = _coupled_eigs(L, c * unit)
            return _stable(cache[c], nu)
    else:
        if isinstance(L, DenseOperator):
            if L.C is None:
                M = L.A
            elif tau == "fixed":
                if k is None:
                    raise ValueError("tau='fixed' needs k")
                M = L.matrix(h / (2 * k + 1))
            else:
                M = L.matrix(float(tau))
        else:
            M = np.asarray(L)
        try:
            eigs = np.linalg.eigvals(M)
        except np.linalg.LinAlgError as exc:
            raise ArithmeticError(f"eigensolver failed: {exc}") from exc

        def stable(c):
            return _stable(c * unit * eigs, nu)

    lo, hi = 0.0, c_max
    if stable(hi):
        return hi
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if stable(mid):
            lo = mid
        else:
            hi = mid
    return round(lo, 2)


def cfl_table(schemes=("cdg", "sparse-cdg"), ks=(1, 2, 3), nus=(2, 3, 4), d: int = 2,
              N: int = 4, tau: str | float = "dt", speeds=None, N_full: int | None = None):
    """Rows (scheme, k, nu, cfl, published) for the entries of the published table."""
    rows = []
    for scheme in schemes:
        for k in ks:
            n_lvl = N if scheme.startswith("sparse") or N_full is None else N_full
            L = build_dense_operator(scheme, d, n_lvl, k, speeds)
            for nu in nus:
                if (k, nu) not in TABLE1[scheme]:
                    continue
                c = max_cfl(L, nu, L.h, L.speeds, tau=tau, k=k)
                rows.append((scheme, k, nu, c, TABLE1[scheme][(k, nu)]))
    return rows

