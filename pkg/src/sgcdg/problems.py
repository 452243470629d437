"""Catalogue of benchmark problems: coefficients, initial/boundary data, exact solutions.

Names:
    linear-advection        u_t + sum_i u_{x_i} = 0, sin(2 pi sum x_i), d in {2,3,4}
    solid-body-rotation     cosine bell rotated about the domain centre, d in {2,3}
    deformational-flow      cosine bell in a reversing swirl, d = 2
    acoustic-standing       u_t = div v, v_t = grad u, standing wave, d = 2
    acoustic-traveling      same system, traveling wave
    elastic-2d              velocity-stress elastic waves, m = 5
    elastic-3d              velocity-stress elastic waves, m = 9

Functions are :class:`SeparableFunction` where possible; the cosine bells
and the exp(sin) elastic waves are black-box callables (d <= 3 only).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cdg_operator import (CoefficientTerm, HyperbolicSystem, SolutionState, project_state)
from .functions import SeparableFunction, plane_wave, product

ScalarFn = Callable[[Sequence[np.ndarray]], np.ndarray]


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    system: HyperbolicSystem
    initial: tuple  # one function per component
    exact: Callable[[float], tuple] | None  # t -> one function per component
    T: float
    speeds: tuple[float, ...]  # max |wave speed| per direction
    params: dict = field(default_factory=dict)
    exact_times: tuple[float, ...] | None = None  # None: exact at every t

    @property
    def d(self) -> int:
        return self.system.d

    @property
    def m(self) -> int:
        return self.system.m

    def has_exact(self, t: float) -> bool:
        if self.exact is None:
            return False
        return self.exact_times is None or any(abs(t - s) < 1e-12 for s in self.exact_times)

    def exact_values(self, t: float, x: Sequence[np.ndarray]) -> np.ndarray:
        """Exact solution on broadcastable coordinates, shape (m,) + broadcast shape."""
        if not self.has_exact(t):
            raise ValueError(f"{self.name}: no exact solution at t={t}")
        shape = np.broadcast_shapes(*[np.shape(xi) for xi in x])
        return np.array([np.broadcast_to(np.asarray(f(x), dtype=float), shape)
                         for f in self.exact(t)])


# -- example 4.1 ------------------------------------------------------------------

def _sin_wave(d, t):
    return plane_wave([1.0] * d, phase=-2 * np.pi * d * t)


def linear_advection(d: int = 2, boundary: str = "periodic") -> ProblemSpec:
    if d not in (1, 2, 3, 4, 5, 6):
        raise ValueError("linear-advection supports 1 <= d <= 6")
    one = np.ones((1, 1))
    coef = tuple((CoefficientTerm(one, (None,) * d),) for _ in range(d))
    system = HyperbolicSystem(d, 1, coef, boundary,
                              boundary_data=(lambda t: _sin_wave(d, t)) if boundary == "dirichlet" else None,
                              name="linear-advection")
    T = {1: 1.0, 2: 1.0, 3: 2.0 / 3.0, 4: 0.5}.get(d, 2.0 / d)
    return ProblemSpec("linear-advection", system, (_sin_wave(d, 0.0),),
                       lambda t: (_sin_wave(d, t),), T, (1.0,) * d)


# -- cosine bells ---------------------------------------------------------------------

def cosine_bell(center: Sequence[float], b: float) -> ScalarFn:
    """b^(d-1) cos^6(pi r / (2 b)) for r <= b, zero outside."""
    c = np.asarray(center, dtype=float)
    d = len(c)

    def f(x):
        r2 = sum((np.asarray(xi, dtype=float) - ci) ** 2 for xi, ci in zip(x, c))
        r = np.sqrt(r2)
        return np.where(r <= b, b ** (d - 1) * np.cos(np.pi * np.minimum(r, b) / (2 * b)) ** 6, 0.0)

    return f


def _affine(a, shift):
    """x -> a * (x - shift)."""
    return lambda x: a * (np.asarray(x, dtype=float) - shift)


def _rotation_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K


def solid_body_rotation(d: int = 2) -> ProblemSpec:
    if d == 2:
        coef = ((CoefficientTerm(np.ones((1, 1)), (None, _affine(-1.0, 0.5))),),
                (CoefficientTerm(np.ones((1, 1)), (_affine(1.0, 0.5), None)),))
        center, b = (0.75, 0.5), 0.23
        speeds = (0.5, 0.5)
    elif d == 3:
        a = np.sqrt(2) / 2
        coef = ((CoefficientTerm(np.ones((1, 1)), (None, _affine(-a, 0.5), None)),),
                (CoefficientTerm(np.ones((1, 1)), (_affine(a, 0.5), None, None)),
                 CoefficientTerm(np.ones((1, 1)), (None, None, _affine(a, 0.5)))),
                (CoefficientTerm(np.ones((1, 1)), (None, _affine(-a, 0.5), None)),))
        center, b = (0.5, 0.55, 0.5), 0.45
        speeds = (a / 2, a, a / 2)
    else:
        raise ValueError("solid-body-rotation supports d in {2, 3}")
    system = HyperbolicSystem(d, 1, coef, "periodic", name="solid-body-rotation")
    bell = cosine_bell(center, b)

    def exact(t):
        return (_rotated(bell, d, t),)

    return ProblemSpec("solid-body-rotation", system, (bell,), exact, 2 * np.pi, speeds,
                       {"b": b, "center": center})


def _rotated(f, d, t):
    """f composed with the backward flow map of the rigid rotation."""
    if d == 2:
        c, s = np.cos(t), np.sin(t)
        R = np.array([[c, s], [-s, c]])  # rotation by -t
    else:
        R = _rotation_matrix(np.array([-1.0, 0.0, 1.0]), -t)

    def g(x):
        y = [np.asarray(xi, dtype=float) - 0.5 for xi in x]
        z = [sum(R[i, j] * y[j] for j in range(d)) + 0.5 for i in range(d)]
        return f(z)

    return g


def deformational_flow(T: float = 1.5) -> ProblemSpec:
    def s2(x):
        return np.sin(np.pi * np.asarray(x)) ** 2

    def sin2pi(x):
        return np.sin(2 * np.pi * np.asarray(x))

    def g(t):
        return np.cos(np.pi * t / T)

    coef = ((CoefficientTerm(np.ones((1, 1)), (s2, sin2pi), g),),
            (CoefficientTerm(-np.ones((1, 1)), (sin2pi, s2), g),))
    system = HyperbolicSystem(2, 1, coef, "periodic", name="deformational-flow")
    bell = cosine_bell((0.65, 0.5), 0.35)
    return ProblemSpec("deformational-flow", system, (bell,), lambda t: (bell,), T, (1.0, 1.0),
                       {"b": 0.35, "center": (0.65, 0.5)}, exact_times=(0.0, T))


# -- acoustics --------------------------------------------------------------------

OMEGA_AC = 2 * np.sqrt(2) * np.pi


def _acoustic_system():
    A1 = -np.array([[0.0, 1, 0], [1, 0, 0], [0, 0, 0]])
    A2 = -np.array([[0.0, 0, 1], [0, 0, 0], [1, 0, 0]])
    coef = ((CoefficientTerm(A1, (None, None)),), (CoefficientTerm(A2, (None, None)),))
    return HyperbolicSystem(2, 3, coef, "periodic", name="acoustic")


def _s(x):
    return np.sin(2 * np.pi * np.asarray(x))


def _c(x):
    return np.cos(2 * np.pi * np.asarray(x))


def acoustic(variant: str = "standing") -> ProblemSpec:
    if variant == "standing":
        def exact(t):
            return (product([_s, _s], -np.sqrt(2) * np.sin(OMEGA_AC * t)),
                    product([_c, _s], np.cos(OMEGA_AC * t)),
                    product([_s, _c], np.cos(OMEGA_AC * t)))
    elif variant == "traveling":
        def exact(t):
            return (_wave_times_cos(np.sqrt(2), "sin", t),
                    _wave_times_cos(1.0, "sin", t),
                    _cos_wave_times_sin(t))
    else:
        raise ValueError("variant must be 'standing' or 'traveling'")
    return ProblemSpec(f"acoustic-{variant}", _acoustic_system(), exact(0.0), exact, 1.0, (1.0, 1.0))


def _wave_times_cos(amp, kind, t):
    # amp * sin(omega t + 2 pi x1) * cos(2 pi x2) = sum of two plane waves
    w1 = plane_wave([1.0, 1.0], phase=OMEGA_AC * t, kind=kind, amplitude=amp / 2)
    w2 = plane_wave([1.0, -1.0], phase=OMEGA_AC * t, kind=kind, amplitude=amp / 2)
    return w1 + w2


def _cos_wave_times_sin(t):
    # cos(omega t + 2 pi x1) sin(2 pi x2) = (sin(a + b) - sin(a - b)) / 2 with b = 2 pi x2
    w1 = plane_wave([1.0, 1.0], phase=OMEGA_AC * t, kind="sin", amplitude=0.5)
    w2 = plane_wave([1.0, -1.0], phase=OMEGA_AC * t, kind="sin", amplitude=-0.5)
    return w1 + w2


# -- elasticity ---------------------------------------------------------------------

def elastic_matrices_2d(lam: float, mu: float, rho: float):
    A1 = np.zeros((5, 5))
    A1[0, 3], A1[1, 3], A1[2, 4] = lam + 2 * mu, lam, mu
    A1[3, 0], A1[4, 2] = 1 / rho, 1 / rho
    A2 = np.zeros((5, 5))
    A2[0, 4], A2[1, 4], A2[2, 3] = lam, lam + 2 * mu, mu
    A2[3, 2], A2[4, 1] = 1 / rho, 1 / rho
    return -A1, -A2


def elastic_matrices_3d(lam: float, mu: float, rho: float):
    r = 1 / rho
    A1 = np.zeros((9, 9))
    A1[0, 6], A1[1, 6], A1[2, 6], A1[3, 7], A1[5, 8] = lam + 2 * mu, lam, lam, mu, mu
    A1[6, 0], A1[7, 3], A1[8, 5] = r, r, r
    A2 = np.zeros((9, 9))
    A2[0, 7], A2[1, 7], A2[2, 7], A2[3, 6], A2[4, 8] = lam, lam + 2 * mu, lam, mu, mu
    A2[6, 3], A2[7, 1], A2[8, 4] = r, r, r
    A3 = np.zeros((9, 9))
    A3[0, 8], A3[1, 8], A3[2, 8], A3[4, 7], A3[5, 6] = lam, lam, lam + 2 * mu, mu, mu
    A3[6, 5], A3[7, 4], A3[8, 2] = r, r, r
    return -A1, -A2, -A3


def wave_speeds(lam: float, mu: float, rho: float) -> tuple[float, float]:
    return float(np.sqrt((lam + 2 * mu) / rho)), float(np.sqrt(mu / rho))


def elastic_2d(lam: float = 2.0, mu: float = 1.0, rho: float = 1.0) -> ProblemSpec:
    cp, cs = wave_speeds(lam, mu, rho)
    A1, A2 = elastic_matrices_2d(lam, mu, rho)
    system = HyperbolicSystem(2, 5, ((CoefficientTerm(A1, (None, None)),),
                                     (CoefficientTerm(A2, (None, None)),)),
                              "periodic", name="elastic-2d")
    h = np.sqrt(2) / 2
    Rs = np.array([-mu, mu, 0.0, -h * cs, h * cs])
    Rp = np.array([lam + mu, lam + mu, mu, -h * cp, -h * cp])
    kk = 2 * np.sqrt(2) * np.pi

    def exact(t):
        def comp(l):
            def f(x):
                phase = 2 * np.pi * (np.asarray(x[0]) + np.asarray(x[1]))
                return (Rs[l] * np.exp(np.sin(phase + kk * cs * t))
                        + Rp[l] * np.exp(np.sin(phase - kk * cp * t)))
            return f
        return tuple(comp(l) for l in range(5))

    return ProblemSpec("elastic-2d", system, exact(0.0), exact, 1.0, (cp, cp),
                       {"lambda": lam, "mu": mu, "rho": rho, "c_p": cp, "c_s": cs,
                        "R_s": Rs, "R_p": Rp})


def elastic_3d(lam: float = 2.0, mu: float = 1.0, rho: float = 1.0) -> ProblemSpec:
    cp, cs = wave_speeds(lam, mu, rho)
    mats = elastic_matrices_3d(lam, mu, rho)
    system = HyperbolicSystem(3, 9, tuple((CoefficientTerm(A, (None,) * 3),) for A in mats),
                              "periodic", name="elastic-3d")
    r3 = 1 / np.sqrt(3)
    Rs = np.array([-2 * mu / 3, 2 * mu / 3, 0, 0, mu / 3, -mu / 3, -r3 * cs, r3 * cs, 0])
    Rp = np.array([lam + 2 * mu / 3] * 3 + [2 * mu / 3] * 3 + [-r3 * cp] * 3)
    kk = -2 * np.sqrt(3) * np.pi  # k . x = 2 pi (x1 + x2 + x3)

    def exact(t):
        out = []
        for l in range(9):
            terms = []
            if Rs[l] != 0:
                terms.append(plane_wave([1.0] * 3, phase=-kk * cs * t, amplitude=Rs[l]))
            if Rp[l] != 0:
                terms.append(plane_wave([1.0] * 3, phase=kk * cp * t, amplitude=Rp[l]))
            f = terms[0]
            for g in terms[1:]:
                f = f + g
            out.append(f)
        return tuple(out)

    return ProblemSpec("elastic-3d", system, exact(0.0), exact, 1.0, (cp, cp, cp),
                       {"lambda": lam, "mu": mu, "rho": rho, "c_p": cp, "c_s": cs,
                        "R_s": Rs, "R_p": Rp})


# -- registry ---------------------------------------------------------------------------

_BUILDERS = {
    "linear-advection": lambda d=2, boundary="periodic", **kw: linear_advection(d, boundary),
    "solid-body-rotation": lambda d=2, **kw: solid_body_rotation(d),
    "deformational-flow": lambda d=2, **kw: _check_d(d, 2) or deformational_flow(),
    "acoustic-standing": lambda d=2, **kw: _check_d(d, 2) or acoustic("standing"),
    "acoustic-traveling": lambda d=2, **kw: _check_d(d, 2) or acoustic("traveling"),
    "elastic-2d": lambda d=2, **kw: _check_d(d, 2) or elastic_2d(**_material(kw)),
    "elastic-3d": lambda d=3, **kw: _check_d(d, 3) or elastic_3d(**_material(kw)),
}

NAMES = tuple(_BUILDERS)
DEFAULT_D = {"elastic-3d": 3}


def _check_d(d, want):
    if d != want:
        raise ValueError(f"problem only defined for d={want}")


def _material(kw):
    return {k: float(kw[k]) for k in ("lam", "mu", "rho") if k in kw}


def get_problem(name: str, d: int | None = None, boundary: str = "periodic", **kw) -> ProblemSpec:
    if name not in _BUILDERS:
        raise ValueError(f"unknown problem {name!r}; known: {', '.join(NAMES)}")
    if boundary != "periodic" and name != "linear-advection":
        raise ValueError(f"{name} is periodic only")
    d = d if d is not None else DEFAULT_D.get(name, 2)
    return _BUILDERS[name](d=d, boundary=boundary, **kw)


def catalogue() -> dict[str, ProblemSpec]:
    """Every problem at its default dimension."""
    return {name: get_problem(name) for name in NAMES}


def exact_state(problem: ProblemSpec, t: float, spaces) -> SolutionState:
    """Projections of the exact solution at time t onto both spaces."""
    if not problem.has_exact(t):
        raise ValueError(f"{problem.name}: no exact solution at t={t}")
    st = project_state(list(problem.exact(t)), spaces, t, m=problem.m)
    return st


def initial_state(problem: ProblemSpec, spaces) -> SolutionState:
    return project_state(list(problem.initial), spaces, 0.0, m=problem.m)


# -- published convergence tables: (name, d, boundary, k) -> {N: L2 error} ----------------

PUBLISHED: dict[tuple[str, int, str, int], dict[int, float]] = {
    ("linear-advection", 2, "periodic", 1): {3: 3.14e-1, 4: 6.99e-2, 5: 1.34e-2, 6: 3.43e-3, 7: 9.21e-4},
    ("linear-advection", 2, "periodic", 2): {3: 1.20e-2, 4: 2.23e-3, 5: 4.87e-4, 6: 5.97e-5, 7: 9.33e-6},
    ("linear-advection", 2, "periodic", 3): {3: 5.84e-4, 4: 8.50e-5, 5: 3.84e-6, 6: 3.89e-7, 7: 1.80e-8},
    ("linear-advection", 3, "periodic", 1): {3: 6.77e-1, 4: 3.56e-1, 5: 1.05e-1, 6: 2.54e-2, 7: 7.45e-3},
    ("linear-advection", 3, "periodic", 2): {3: 5.27e-2, 4: 1.10e-2, 5: 1.82e-3, 6: 5.22e-4, 7: 6.89e-5},
    ("linear-advection", 3, "periodic", 3): {3: 2.13e-3, 4: 2.62e-4, 5: 2.85e-5, 6: 2.01e-6, 7: 2.01e-7},
    ("linear-advection", 4, "periodic", 1): {3: 7.13e-1, 4: 6.48e-1, 5: 3.80e-1, 6: 1.37e-1, 7: 3.81e-2},
    ("linear-advection", 4, "periodic", 2): {3: 1.26e-1, 4: 3.39e-2, 5: 6.91e-3, 6: 1.39e-3, 7: 3.56e-4},
    ("linear-advection", 4, "periodic", 3): {3: 4.41e-3, 4: 7.56e-4, 5: 9.82e-5, 6: 9.44e-6, 7: 8.16e-7},
    ("linear-advection", 2, "dirichlet", 1): {3: 2.66e-1, 4: 7.47e-2, 5: 1.94e-2, 6: 5.44e-3, 7: 1.49e-3},
    ("linear-advection", 2, "dirichlet", 2): {3: 1.66e-2, 4: 3.33e-3, 5: 5.97e-4, 6: 8.60e-5, 7: 1.35e-5},
    ("linear-advection", 2, "dirichlet", 3): {3: 8.21e-4, 4: 8.80e-5, 5: 4.79e-6, 6: 4.50e-7, 7: 2.20e-8},
    ("linear-advection", 3, "dirichlet", 1): {3: 6.15e-1, 4: 2.86e-1, 5: 1.14e-1, 6: 3.23e-2, 7: 1.03e-2},
    ("linear-advection", 3, "dirichlet", 2): {3: 5.34e-2, 4: 1.40e-2, 5: 2.57e-3, 6: 5.82e-4, 7: 9.81e-5},
    ("linear-advection", 3, "dirichlet", 3): {3: 2.67e-3, 4: 2.87e-4, 5: 3.21e-5, 6: 2.60e-6, 7: 2.86e-7},
    ("solid-body-rotation", 2, "periodic", 1): {5: 1.53e-2, 6: 1.02e-2, 7: 4.66e-3, 8: 1.42e-3},
    ("solid-body-rotation", 2, "periodic", 2): {5: 5.81e-3, 6: 1.50e-3, 7: 1.46e-4, 8: 2.34e-5},
    ("solid-body-rotation", 2, "periodic", 3): {5: 1.34e-3, 6: 9.64e-5, 7: 1.16e-5, 8: 1.10e-6},
    ("solid-body-rotation", 3, "periodic", 1): {5: 4.83e-3, 6: 1.87e-3, 7: 7.46e-4, 8: 2.55e-4},
    ("solid-body-rotation", 3, "periodic", 2): {5: 6.25e-4, 6: 1.20e-4, 7: 3.39e-5, 8: 8.11e-6},
    ("solid-body-rotation", 3, "periodic", 3): {5: 7.35e-5, 6: 9.18e-6, 7: 1.36e-6, 8: 1.94e-7},
    ("deformational-flow", 2, "periodic", 1): {5: 1.73e-2, 6: 8.06e-3, 7: 3.29e-3, 8: 1.08e-3},
    ("deformational-flow", 2, "periodic", 2): {5: 4.37e-3, 6: 1.17e-3, 7: 2.04e-4, 8: 2.78e-5},
    ("deformational-flow", 2, "periodic", 3): {5: 1.14e-3, 6: 2.44e-4, 7: 2.05e-5, 8: 2.75e-6},
    ("acoustic-standing", 2, "periodic", 1): {3: 3.56e-1, 4: 7.93e-2, 5: 1.50e-2, 6: 3.72e-3, 7: 1.01e-3},
    ("acoustic-standing", 2, "periodic", 2): {3: 1.05e-2, 4: 1.84e-3, 5: 3.18e-4, 6: 4.95e-5, 7: 7.60e-6},
    ("acoustic-standing", 2, "periodic", 3): {3: 5.37e-4, 4: 4.31e-5, 5: 3.39e-6, 6: 2.77e-7, 7: 2.03e-8},
    ("acoustic-traveling", 2, "periodic", 1): {3: 3.97e-1, 4: 8.58e-2, 5: 1.97e-2, 6: 5.36e-3, 7: 1.50e-3},
    ("acoustic-traveling", 2, "periodic", 2): {3: 1.85e-2, 4: 3.36e-3, 5: 6.07e-4, 6: 9.66e-5, 7: 1.45e-5},
    ("acoustic-traveling", 2, "periodic", 3): {3: 7.75e-4, 4: 6.76e-5, 5: 5.68e-6, 6: 4.44e-7, 7: 3.39e-8},
    ("elastic-2d", 2, "periodic", 1): {4: 1.09e0, 5: 7.47e-1, 6: 2.41e-1, 7: 7.14e-2},
    ("elastic-2d", 2, "periodic", 2): {4: 2.72e-1, 5: 6.48e-2, 6: 9.65e-3, 7: 1.12e-3},
    ("elastic-2d", 2, "periodic", 3): {4: 5.71e-2, 5: 6.19e-3, 6: 4.77e-4, 7: 2.55e-5},
    ("elastic-3d", 3, "periodic", 1): {4: 2.49e0, 5: 7.70e-1, 6: 1.76e-1, 7: 4.27e-2},
    ("elastic-3d", 3, "periodic", 2): {4: 4.93e-2, 5: 8.17e-3, 6: 1.59e-3, 7: 2.79e-4},
    ("elastic-3d", 3, "periodic", 3): {4: 8.91e-4, 5: 8.66e-5, 6: 7.12e-6, 7: 5.42e-7},
}


# -- convergence studies reproduced at desk scale ------------------------------------------


@dataclass(frozen=True)
class Study:
    """One convergence table: problem, dimension, boundary, degree and levels."""

    name: str
    d: int
    boundary: str
    k: int
    levels: tuple[int, ...]
    min_order: float | None  # least-squares order over the last three levels
    smoke: bool = False  # only checked for finite, decreasing errors

    @property
    def key(self) -> str:
        return f"{self.name}-d{self.d}-{self.boundary}-k{self.k}"

    @property
    def published(self) -> dict[int, float]:
        return PUBLISHED.get((self.name, self.d, self.boundary, self.k), {})


# order floors: scalar constant-coefficient and wave problems vs the cosine bells
_FLOORS = {1: 1.7, 2: 2.3, 3: 3.2}


def _studies():
    out = []
    for k in (1, 2, 3):
        for d, boundary in ((2, "periodic"), (3, "periodic"), (2, "dirichlet"), (3, "dirichlet")):
            levels = (5, 6, 7) if d == 2 else (4, 5, 6)
            out.append(Study("linear-advection", d, boundary, k, levels, _FLOORS[k]))
        out.append(Study("linear-advection", 4, "periodic", k, (3, 4, 5), None, smoke=True))
        out.append(Study("solid-body-rotation", 2, "periodic", k, (5, 6, 7), float(k)))
        out.append(Study("solid-body-rotation", 3, "periodic", k, (4, 5, 6), float(k)))
        out.append(Study("deformational-flow", 2, "periodic", k, (5, 6, 7), float(k)))
        for name in ("acoustic-standing", "acoustic-traveling", "elastic-2d"):
            out.append(Study(name, 2, "periodic", k, (5, 6, 7), _FLOORS[k]))
        out.append(Study("elastic-3d", 3, "periodic", k, (4, 5, 6), _FLOORS[k]))
    return tuple(out)


STUDIES: tuple[Study, ...] = _studies()
