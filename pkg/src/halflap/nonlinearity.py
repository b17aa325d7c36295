"""Reaction terms f, their potentials G (G' = -f) and the range minimum c_u."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial

Fn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Nonlinearity:
    name: str
    f: Fn
    fprime: Fn
    G: Fn
    smoothness: str = "C-infinity"
    beta: Optional[float] = None

    def Gpp(self, u):
        """Second derivative of the potential, -f'(u)."""
        return -self.fprime(u)


class HypothesisReport(NamedTuple):
    odd: bool
    double_well: bool
    fprime_decreasing: bool
    tol: float
    probe_points: int

    @property
    def all(self) -> bool:
        return self.odd and self.double_well and self.fprime_decreasing


class RangeMinimum(NamedTuple):
    value: float
    point: float


def allen_cahn() -> Nonlinearity:
    return Nonlinearity(
        "allen-cahn",
        f=lambda u: u - u ** 3,
        fprime=lambda u: 1.0 - 3.0 * u ** 2,
        G=lambda u: 0.25 * (1.0 - u ** 2) ** 2,
    )


def sine() -> Nonlinearity:
    return Nonlinearity(
        "sine",
        f=lambda u: np.sin(np.pi * u),
        fprime=lambda u: np.pi * np.cos(np.pi * u),
        G=lambda u: (1.0 + np.cos(np.pi * u)) / np.pi,
    )


def polynomial(coefficients: Sequence[float], name: str = "cubic-custom") -> Nonlinearity:
    """f(u) = sum_k c_k u^k, with G the exact antiderivative normalised by G(1) = 0."""
    coefficients = [float(c) for c in coefficients] or [0.0]
    f = Polynomial(coefficients)
    F = f.integ()
    F1 = float(F(1.0))
    df = f.deriv()
    return Nonlinearity(
        name,
        f=lambda u: f(np.asarray(u, dtype=float)),
        fprime=lambda u: df(np.asarray(u, dtype=float)),
        G=lambda u: F1 - F(np.asarray(u, dtype=float)),
    )


BUILTINS = ("allen-cahn", "sine", "cubic-custom")


def builtin(name: str, params: Optional[Sequence[float]] = None) -> Nonlinearity:
    if name == "allen-cahn":
        return allen_cahn()
    if name == "sine":
        return sine()
    if name == "cubic-custom":
        if params is None:
            raise ValueError("cubic-custom needs polynomial coefficients")
        return polynomial(params)
    raise ValueError(f"unknown nonlinearity {name!r}; expected one of {BUILTINS}")


def consistency_errors(nl: Nonlinearity, lo: float = -2.0, hi: float = 2.0,
                       step: float = 1e-4, points: int = 401) -> tuple[float, float]:
    """Max |G'(u) + f(u)| and max |f'(u) - (f)'_fd(u)| with central differences."""
    u = np.linspace(lo, hi, points)
    dG = (nl.G(u + step) - nl.G(u - step)) / (2 * step)
    df = (nl.f(u + step) - nl.f(u - step)) / (2 * step)
    return float(np.max(np.abs(dG + nl.f(u)))), float(np.max(np.abs(df - nl.fprime(u))))


def c_u_of(nl: Nonlinearity, lo: float, hi: float, samples: int = 4096) -> RangeMinimum:
    """Minimum of G over [lo, hi]: dense scan plus one Newton step at the best cell."""
    if lo > hi:
        raise ValueError("lo must not exceed hi")
    if lo == hi:
        return RangeMinimum(float(nl.G(np.float64(lo))), float(lo))
    s = np.linspace(lo, hi, samples)
    g = nl.G(s)
    k = int(np.argmin(g))
    best_s, best_g = float(s[k]), float(g[k])
    if 0 < k < samples - 1:
        fp = float(nl.fprime(np.float64(best_s)))
        if fp != 0.0:
            # Newton on G' = -f
            cand = best_s - float(nl.f(np.float64(best_s))) / fp
            if s[k - 1] <= cand <= s[k + 1]:
                gc = float(nl.G(np.float64(cand)))
                if gc < best_g:
                    best_s, best_g = cand, gc
    return RangeMinimum(best_g, best_s)


def check_hypotheses(nl: Nonlinearity, tol: float = 1e-10, probe_points: int = 2001) -> HypothesisReport:
    """Probe-grid versions of: f odd; G >= 0 = G(+-1) with G > 0 on (-1, 1); f' decreasing on (0, 1)."""
    u = np.linspace(-2.0, 2.0, probe_points)
    scale = max(1.0, float(np.max(np.abs(nl.f(u)))))
    odd = bool(np.max(np.abs(nl.f(u) + nl.f(-u))) <= tol * scale)

    g = nl.G(u)
    inner = np.linspace(-1.0, 1.0, probe_points)[1:-1]
    wells = nl.G(np.array([-1.0, 1.0]))
    double_well = bool(np.all(g >= -tol) and np.all(np.abs(wells) <= tol)
                       and np.all(nl.G(inner) > tol))

    p = np.linspace(0.0, 1.0, probe_points)[1:-1]
    fp = nl.fprime(p)
    fprime_decreasing = bool(np.all(np.diff(fp) < 0))
    return HypothesisReport(odd, double_well, fprime_decreasing, tol, probe_points)


def describe(nl: Nonlinearity) -> str:
    return f"{nl.name} (smoothness {nl.smoothness}" + (
        f", beta={nl.beta})" if nl.beta is not None else ")")


