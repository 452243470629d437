"""Scalar functions on [0,1]^d given as sums of separable terms.

A term is ``coeff * f_1(x_1) * ... * f_d(x_d)``; factors may be complex, the
function value is the real part of the sum. Complex factors make plane waves
cheap: sin(2 pi (a . x) + phi) is a single term Re(-i e^{i phi} prod e^{2 pi i a_r x_r}).

Functions (separable or not) are called with a sequence of d coordinate
arrays that broadcast against each other, e.g. ``f([x1, x2])``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

Factor = Callable[[np.ndarray], np.ndarray]


def one(x):
    return np.ones_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class SeparableTerm:
    factors: tuple[Factor, ...]
    coeff: complex = 1.0

    def __call__(self, x: Sequence[np.ndarray]):
        out = self.coeff
        for f, xi in zip(self.factors, x):
            out = out * f(np.asarray(xi, dtype=float))
        return out


@dataclass(frozen=True)
class SeparableFunction:
    terms: tuple[SeparableTerm, ...]
    d: int

    def __post_init__(self):
        for t in self.terms:
            if len(t.factors) != self.d:
                raise ValueError(f"term has {len(t.factors)} factors, expected {self.d}")

    def __call__(self, x: Sequence[np.ndarray]) -> np.ndarray:
        if len(x) != self.d:
            raise ValueError(f"expected {self.d} coordinate arrays, got {len(x)}")
        shape = np.broadcast_shapes(*[np.shape(xi) for xi in x])
        total = np.zeros(shape, dtype=complex)
        for t in self.terms:
            total = total + t(x)
        return total.real

    def __add__(self, other: "SeparableFunction") -> "SeparableFunction":
        if other.d != self.d:
            raise ValueError("dimension mismatch")
        return SeparableFunction(self.terms + other.terms, self.d)

    def scaled(self, a: complex) -> "SeparableFunction":
        return SeparableFunction(tuple(SeparableTerm(t.factors, a * t.coeff) for t in self.terms),
                                 self.d)


def constant(value: float, d: int) -> SeparableFunction:
    return SeparableFunction((SeparableTerm((one,) * d, value),), d)


def product(factors: Sequence[Factor], coeff: complex = 1.0) -> SeparableFunction:
    return SeparableFunction((SeparableTerm(tuple(factors), coeff),), len(factors))


@lru_cache(maxsize=1024)
def _expfactor(a):
    # cached so equal frequencies share one function object (lets callers
    # cache 1D inner products by factor)
    return lambda x: np.exp(2j * np.pi * a * x)


def plane_wave(freqs: Sequence[float], phase: complex = 0.0, kind: str = "sin",
               amplitude: float = 1.0) -> SeparableFunction:
    """amplitude * sin or cos of (2 pi sum_r freqs_r x_r + phase) as one complex term.

    ``phase`` may carry time dependence baked in by the caller.
    """
    z = amplitude * np.exp(1j * phase)
    if kind == "sin":
        c = -1j * z
    elif kind == "cos":
        c = z
    else:
        raise ValueError(f"kind must be 'sin' or 'cos', got {kind!r}")
    return product([_expfactor(float(a)) for a in freqs], c)
