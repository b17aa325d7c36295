"""Fast closed-form checks runnable without pytest (``halflap selftest``)."""

from __future__ import annotations

import math
import warnings
from typing import Callable

import numpy as np

from . import layers
from .energy import energy_breakdown, fit_values
from .extension import (MollifierKernel, build_comparison, dirichlet_solve, mollifier_extend,
                        poisson_extend)
from .grid import (CylinderDomain, ScalarField, UniformGrid, WedgeDomain, gradient, integrate,
                   laplacian_residual)
from .hhalf import TraceDomain, h_half_seminorm, ramp_profile
from .nonlinearity import allen_cahn, c_u_of, check_hypotheses, polynomial, sine
from .solver import SolveConfig, minimize_cylinder, reflect_odd
from .symmetry import UndefinedDirectionError, one_d_direction

CHECKS: list[tuple[str, Callable[[], bool]]] = []


def check(name: str):
    def deco(fn):
        CHECKS.append((name, fn))
        return fn
    return deco


def _box(h=0.1):
    return CylinderDomain.from_bounds([(-1.0, 1.0)], 1.0, h)


@check("gradient of a constant vanishes")
def _():
    d = _box()
    return all(np.all(g.values == 0) for g in gradient(d.field(lambda x, l: 3.0 + 0 * x)))


@check("gradient of x is (1, 0)")
def _():
    g = gradient(_box().field(lambda x, l: x + 0 * l))
    return np.allclose(g[0].values, 1.0, atol=1e-13) and np.allclose(g[1].values, 0.0, atol=1e-13)


@check("x^2 - lambda^2 is discretely harmonic")
def _():
    r = laplacian_residual(_box().field(lambda x, l: x * x - l * l))
    return float(np.max(np.abs(r.values))) < 1e-10


@check("laplacian residual of x^2 is 2")
def _():
    d = _box()
    r = laplacian_residual(d.field(lambda x, l: x * x + 0 * l))
    return np.allclose(r.values[d.interior], 2.0, atol=1e-9)


@check("area of (-1,1)x(0,1) is 2")
def _():
    d = _box()
    return abs(integrate(d.field(lambda x, l: 1.0 + 0 * x)) - 2.0) < 1e-12


@check("double-well values of the builtins")
def _():
    ac, sn = allen_cahn(), sine()
    return (abs(ac.G(1.0)) < 1e-15 and abs(ac.G(0.0) - 0.25) < 1e-15
            and abs(sn.G(1.0)) < 1e-15 and abs(sn.G(0.0) - 2 / math.pi) < 1e-15
            and ac.f(0.0) == 0 and ac.f(1.0) == 0 and ac.f(-1.0) == 0)


@check("range minimum on [-1, 1] is 0")
def _():
    return abs(c_u_of(allen_cahn(), -1, 1).value) < 1e-15 and abs(c_u_of(sine(), -1, 1).value) < 1e-15


@check("f(u) = u is not a double well")
def _():
    return not check_hypotheses(polynomial([0.0, 1.0])).double_well


@check("extensions of a constant are constant")
def _():
    g = UniformGrid((-2.0,), (0.05,), (81,))
    u = ScalarField(g, np.full(g.shape, 0.7))
    p = poisson_extend(u, [0.0, 0.5, 1.0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = mollifier_extend(u, [0.0, 0.01, 0.02], MollifierKernel.standard(1))
    return np.allclose(p.values, 0.7, atol=1e-12) and np.allclose(m.values, 0.7, atol=1e-12)


@check("Dirichlet solve reproduces x^2 - lambda^2 and constants")
def _():
    d = _box()
    exact = d.field(lambda x, l: x * x - l * l)
    one = d.field(lambda x, l: 1.0 + 0 * x)
    return (np.max(np.abs(dirichlet_solve(d, exact).values - exact.values)) < 1e-9
            and np.max(np.abs(dirichlet_solve(d, one).values - 1.0)) < 1e-9)


@check("comparison of a constant is the constant")
def _():
    d = CylinderDomain.build(1, 3.0, 0.1)
    c = build_comparison(d.field(lambda x, l: 0.3 + 0 * x), 0.3, d)
    return np.allclose(c.g.values, 0.3, atol=1e-14) and np.allclose(c.wbar.values[d.mask], 0.3, atol=1e-9)


@check("well data gives the well with zero energy")
def _():
    d = CylinderDomain.build(1, 3.0, 0.1)
    sol = minimize_cylinder(d, allen_cahn(), lambda x, l: 1.0 + 0 * x,
                            SolveConfig(residual_tol=1e-10), init=0.8)
    return np.allclose(sol.field.values[d.mask], 1.0, atol=1e-8) and abs(sol.energy) < 1e-12


@check("energy of the well state is zero")
def _():
    d = _box()
    eb = energy_breakdown(d.field(lambda x, l: 1.0 + 0 * x), allen_cahn())
    return eb.dirichlet == 0 and abs(eb.potential) < 1e-15 and abs(eb.total) < 1e-15


@check("fit recovers model coefficients")
def _():
    R = np.array([4.0, 8.0, 16.0, 32.0])
    fit = fit_values(R, 3 * R * np.log(R) + 2 * R, 2)
    return abs(fit.a - 3) < 1e-9 and abs(fit.b - 2) < 1e-9 and fit.r2 > 1 - 1e-12


@check("seminorm of a constant is 0 and of x is about 4")
def _():
    td = TraceDomain.interval_box(1, 2 ** -7)
    z = h_half_seminorm((td, np.ones(len(td.points))))
    x = h_half_seminorm((td, td.points[:, 0]))
    return z == 0 and abs(x - 4) < 0.08


@check("ramp endpoints and scope")
def _():
    td = TraceDomain.interval_box(1, 0.125)
    w = ramp_profile(td, 0.25)
    x = td.points[:, 0]
    ok = w.values[x == -1][0] == -1 and w.values[x == 1][0] == 1 and w.values[x == 0][0] == 0
    try:
        ramp_profile(td, 0.6)
        return False
    except ValueError:
        return ok


@check("odd reflection across the diagonal")
def _():
    wd = WedgeDomain.build(1, 2.0, 1.0, 0.25)
    rng = np.random.default_rng(0)
    vals = np.where(wd.free, rng.random(wd.grid.shape), 0.0)
    u = reflect_odd(ScalarField(wd.grid, vals, wd.mask), wd).values
    return np.array_equal(u, -np.swapaxes(u, 0, 1))


@check("constant trace has no direction")
def _():
    g = UniformGrid((-1.0, -1.0), (0.1, 0.1), (21, 21))
    try:
        one_d_direction(ScalarField(g, np.ones(g.shape)))
        return False
    except UndefinedDirectionError:
        return True


@check("explicit layer satisfies the Neumann condition")
def _():
    lam = np.linspace(0, 1, 5)
    gx, gl = layers.layer_gradient(np.linspace(-3, 3, 7)[:, None], lam[None, :])
    v = layers.layer_extension(np.linspace(-3, 3, 7), 0.0)
    return np.allclose(-gl[:, 0], np.sin(np.pi * v), atol=1e-13)


def run(verbose: bool = True) -> tuple[int, int]:
    passed = 0
    for name, fn in CHECKS:
        try:
            ok = bool(fn())
        except Exception as exc:  # a crashing check counts as a failure
            ok = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        passed += ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'} {name}")
    return passed, len(CHECKS)
