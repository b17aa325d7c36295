"""Variational solver for the extension problem with a nonlinear Neumann condition.

The discrete energy is

    E(v) = 1/2 sum_edges w_e (dv_e / h_e)^2 + sum_{lambda = 0} a_i G(v_i),

with trapezoid edge volumes ``w_e`` and bottom areas ``a_i``. Its gradient
divided by the dual volume is the 5/7-point Laplacian inside and, on the
bottom row, the ghost-point form of -d_lambda v - f(v); minimisation and the
Euler-Lagrange residual therefore agree by construction.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ._linalg import EdgeOperator, SeparablePreconditioner
from .grid import (CylinderDomain, ScalarField, UniformGrid, WedgeDomain,
                   bottom_weights, edge_weights, point_weights)
from .nonlinearity import Nonlinearity, check_hypotheses

log = logging.getLogger(__name__)

Bound = Union[None, float, np.ndarray, ScalarField]


class SolverError(RuntimeError):
    """Raised when a solve fails; ``solution`` carries the last valid iterate."""

    reason = "solver-failure"

    def __init__(self, message: str, solution: "Solution"):
        super().__init__(message)
        self.solution = solution


class LineSearchError(SolverError):
    reason = "line-search"


class IterationLimitError(SolverError):
    reason = "iteration-cap"


class NonFiniteEnergyError(SolverError):
    reason = "non-finite-energy"


class StalledError(SolverError):
    reason = "stalled"


@dataclass
class SolveConfig:
    max_iter: int = 3000
    energy_tol: float = 1e-15
    residual_tol: float = 1e-6
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 50
    lower: Bound = None
    upper: Bound = None
    init: str = "tanh"
    log_every: int = 25

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.energy_tol <= 0 or self.residual_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not (0 < self.armijo_c < 1 and 0 < self.backtrack < 1):
            raise ValueError("line-search parameters must lie in (0, 1)")
        if self.init not in ("tanh", "data", "zero", "harmonic"):
            raise ValueError(f"unknown initial guess policy {self.init!r}")
        lo, hi = _as_array(self.lower), _as_array(self.upper)
        if lo is not None and hi is not None and np.any(np.asarray(lo) > np.asarray(hi)):
            raise ValueError("lower bound exceeds upper bound")


def _as_array(b: Bound):
    if isinstance(b, ScalarField):
        return b.values
    return b


@dataclass
class ResidualReport:
    interior: float
    neumann: float

    @property
    def max(self) -> float:
        return max(self.interior, self.neumann)


class DiscreteEnergy:
    """Energy, gradient and curvature on a masked grid with pinned nodes."""

    def __init__(self, grid: UniformGrid, mask: np.ndarray, free: np.ndarray,
                 nl: Nonlinearity, density: Optional[Callable] = None):
        self.grid = grid
        self.mask = mask
        self.free = free & mask
        self.nl = nl
        self.A = EdgeOperator(grid, edge_weights(grid, mask, density))
        self.bw = np.where(mask[..., 0], bottom_weights(grid, mask, density), 0.0)
        vol = point_weights(mask, grid.spacings)
        if density is not None:
            vol = vol * np.broadcast_to(density(*grid.mesh()), grid.shape)
        self.vol = vol
        lam0 = np.zeros(grid.shape, dtype=bool)
        lam0[..., 0] = True
        self.free_bottom = self.free & lam0
        self.free_interior = self.free & ~lam0

    def parts(self, v: np.ndarray) -> tuple[float, float]:
        dirichlet = 0.5 * self.A.quad(v)
        potential = float(np.sum(self.bw * self.nl.G(v[..., 0])))
        return dirichlet, potential

    def energy(self, v: np.ndarray) -> float:
        d, p = self.parts(v)
        return d + p

    def full_gradient(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(gradient on all nodes, quadratic part A v)."""
        Av = self.A.apply(v)
        g = Av.copy()
        g[..., 0] -= self.bw * self.nl.f(v[..., 0])
        return g, Av

    def gradient(self, v: np.ndarray) -> np.ndarray:
        g, _ = self.full_gradient(v)
        return np.where(self.free, g, 0.0)

    def curvature(self, v: np.ndarray, d: np.ndarray) -> float:
        return self.A.quad(d) + float(np.sum(self.bw * self.nl.Gpp(v[..., 0]) * d[..., 0] ** 2))

    def change(self, v: np.ndarray, Av: np.ndarray, step: np.ndarray) -> float:
        """E(v + step) - E(v) without forming the two large energies."""
        quad = float(np.sum(Av * step)) + 0.5 * self.A.quad(step)
        v0, s0 = v[..., 0], step[..., 0]
        pot = float(np.sum(self.bw * (self.nl.G(v0 + s0) - self.nl.G(v0))))
        return quad + pot

    def residuals(self, v: np.ndarray, g: Optional[np.ndarray] = None) -> ResidualReport:
        if g is None:
            g, _ = self.full_gradient(v)
        inner = self.free_interior & (self.vol > 0)
        r_in = float(np.max(np.abs(g[inner] / self.vol[inner]))) if inner.any() else 0.0
        fb = self.free_bottom[..., 0] & (self.bw > 0)
        gb = g[..., 0]
        r_b = float(np.max(np.abs(gb[fb] / self.bw[fb]))) if fb.any() else 0.0
        return ResidualReport(r_in, r_b)

    def neumann_defect(self, v: np.ndarray) -> np.ndarray:
        """Ghost-point defect -d_lambda v - f(v) on free bottom nodes (zero elsewhere)."""
        g, _ = self.full_gradient(v)
        fb = self.free_bottom[..., 0] & (self.bw > 0)
        out = np.zeros(self.bw.shape)
        out[fb] = g[..., 0][fb] / self.bw[fb]
        return out


@dataclass
class Solution:
    field: ScalarField
    trace: ScalarField
    residuals: ResidualReport
    iterations: int
    energy_history: list
    status: str
    log: list = field(default_factory=list)
    model: Optional[DiscreteEnergy] = field(default=None, repr=False)
    reflected: Optional[ScalarField] = field(default=None, repr=False)
    trivial: bool = False

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def energy(self) -> float:
        return self.model.energy(self.field.values)

    def report(self) -> dict:
        d, p = self.model.parts(self.field.values)
        return {
            "status": self.status,
            "iterations": self.iterations,
            "energy": d + p,
            "dirichlet": d,
            "potential": p,
            "residual_interior": self.residuals.interior,
            "residual_neumann": self.residuals.neumann,
        }


# ---------------------------------------------------------------------------
# projected, preconditioned nonlinear conjugate gradients

def _bounds(b: Bound, shape, default):
    b = _as_array(b)
    if b is None:
        return np.full(shape, default)
    return np.broadcast_to(np.asarray(b, dtype=float), shape)


def _make_solution(model, v, g, it, history, status, entries, mask):
    res = model.residuals(v, g)
    fld = ScalarField(model.grid, np.where(mask, v, 0.0), mask)
    return Solution(fld, fld.level(0), res, it, history, status, entries, model)


class _Projected:
    """Gradient bookkeeping on the feasible box: active set and reduced gradient."""

    def __init__(self, model: DiscreteEnergy, lo: np.ndarray, hi: np.ndarray):
        self.model, self.lo, self.hi = model, lo, hi
        free = model.free
        self.bounded = bool(np.isfinite(lo[free]).any() or np.isfinite(hi[free]).any())

    def at_bound(self, v):
        if not self.bounded:
            return None
        return self.model.free & ((v <= self.lo) | (v >= self.hi))

    def evaluate(self, v):
        """(full gradient with active components zeroed, A v, active set)."""
        g_full, Av = self.model.full_gradient(v)
        if not self.bounded:
            return g_full, Av, None
        free = self.model.free
        active = free & (((v <= self.lo) & (g_full > 0)) | ((v >= self.hi) & (g_full < 0)))
        return np.where(active, 0.0, g_full), Av, active

    def clip(self, v):
        if not self.bounded:
            return v
        return np.where(self.model.free, np.clip(v, self.lo, self.hi), v)


def _ncg(model: DiscreteEnergy, v: np.ndarray, cfg: SolveConfig, precond,
         callback: Optional[Callable[[int, np.ndarray], None]] = None) -> Solution:
    free = model.free
    proj = _Projected(model, _bounds(cfg.lower, v.shape, -np.inf),
                      _bounds(cfg.upper, v.shape, np.inf))
    v = proj.clip(v)

    def finish(v, status, it):
        g_red, _, _ = proj.evaluate(v)
        return _make_solution(model, v, g_red, it, history, status, entries, model.mask)

    history: list[float] = []
    entries: list[dict] = []
    E = model.energy(v)
    history.append(E)
    if not math.isfinite(E):
        raise NonFiniteEnergyError("initial energy is not finite", finish(v, "non-finite", 0))
    d_prev = gr_prev = z_prev = None
    stall = 0
    restart = True
    bound_set = proj.at_bound(v)
    for it in range(cfg.max_iter + 1):
        if callback is not None:
            callback(it, v)
        g_red, Av, active = proj.evaluate(v)
        res = model.residuals(v, g_red)
        gr = np.where(free, g_red, 0.0)
        if cfg.log_every and it % cfg.log_every == 0:
            entries.append({"iter": it, "energy": E, "res_interior": res.interior,
                            "res_neumann": res.neumann})
            log.debug("iter %d energy %.12g residuals %.3e %.3e", it, E, res.interior, res.neumann)
        if res.max <= cfg.residual_tol:
            return _make_solution(model, v, g_red, it, history, "converged", entries, model.mask)
        if it == cfg.max_iter:
            break
        z = precond.apply(gr)
        if active is not None:
            z[active] = 0.0
        if restart or d_prev is None:
            d = -z
        else:
            beta = max(0.0, float(np.sum(gr * (z - z_prev))) / float(np.sum(gr_prev * z_prev)))
            d = -z + beta * d_prev
            if active is not None:
                d[active] = 0.0
            if float(np.sum(gr * d)) >= 0:
                d = -z
        slope = float(np.sum(gr * d))
        curv = model.curvature(v, d)
        alpha = -slope / curv if curv > 0 else 1.0
        accepted = False
        for _ in range(cfg.max_backtracks):
            trial = proj.clip(v + alpha * d)
            step = trial - v
            dE = model.change(v, Av, step)
            if math.isfinite(dE) and dE <= 0 and dE <= cfg.armijo_c * float(np.sum(gr * step)):
                accepted = True
                break
            alpha *= cfg.backtrack
        if not accepted:
            if not restart:
                restart = True
                d_prev = None
                continue
            sol = _make_solution(model, v, g_red, it, history, "line-search-failure", entries,
                                 model.mask)
            if res.max <= 10 * cfg.residual_tol:
                # no representable descent left at the tolerance scale
                sol.status = "converged"
                return sol
            raise LineSearchError(f"Armijo backtracking failed at iteration {it} "
                                  f"(residual {res.max:.3e})", sol)
        v = trial
        E = E + dE
        history.append(E)
        stall = stall + 1 if abs(dE) <= cfg.energy_tol * max(1.0, abs(E)) else 0
        new_bound = proj.at_bound(v)
        restart = bound_set is not None and bool(np.any(new_bound != bound_set))
        bound_set = new_bound
        d_prev, gr_prev, z_prev = d, gr, z
        if stall >= 10:
            sol = finish(v, "stalled", it + 1)
            if sol.residuals.max <= 10 * cfg.residual_tol:
                # energy is flat to rounding and the residual is at the tolerance scale
                sol.status = "converged"
                return sol
            raise StalledError(f"energy decrease below tolerance but residual {sol.residuals.max:.3e}",
                               sol)
    sol = finish(v, "iteration-cap", cfg.max_iter)
    raise IterationLimitError(f"no convergence in {cfg.max_iter} iterations "
                              f"(residual {sol.residuals.max:.3e})", sol)


def _shift_estimate(nl: Nonlinearity, trace: np.ndarray) -> float:
    if trace.size == 0:
        return 0.0
    return max(0.0, float(np.median(nl.Gpp(trace))))


def _cylinder_bcs(domain: CylinderDomain):
    return [("dirichlet", "dirichlet")] * domain.n + [("neumann", "dirichlet")]


def _as_values(data, grid: UniformGrid) -> np.ndarray:
    if isinstance(data, ScalarField):
        if data.grid != grid:
            raise ValueError("data lives on a different grid")
        return data.values
    if callable(data):
        return np.broadcast_to(data(*grid.mesh()), grid.shape).astype(float)
    return np.broadcast_to(np.asarray(data, dtype=float), grid.shape).copy()


def minimize_cylinder(domain: CylinderDomain, nl: Nonlinearity, plus_boundary,
                      cfg: Optional[SolveConfig] = None, init=None,
                      callback: Optional[Callable[[int, np.ndarray], None]] = None) -> Solution:
    """Minimise the discrete energy with the values on the lateral/top boundary pinned.

    ``plus_boundary`` (field, array or function of the coordinates) is read on
    the pinned nodes only. With ``cfg.lower``/``cfg.upper`` the minimisation is
    over the box of admissible fields and stationarity is measured by the
    projected gradient. ``callback(iteration, values)`` sees every iterate.
    """
    cfg = cfg or SolveConfig()
    grid = domain.grid
    data = _as_values(plus_boundary, grid)
    if init is not None:
        v0 = _as_values(init, grid).copy()
    elif cfg.init == "data":
        v0 = data.copy()
    elif cfg.init == "zero":
        v0 = np.zeros(grid.shape)
    elif cfg.init == "harmonic":
        from .extension import solve_harmonic
        v0 = solve_harmonic(grid, domain.mask, domain.fixed, np.where(domain.fixed, data, 0.0),
                            rtol=1e-8, bcs=_cylinder_bcs(domain))
    else:
        xn = grid.mesh()[domain.n - 1]
        v0 = np.broadcast_to(np.tanh(xn), grid.shape).copy()
    v0 = np.where(domain.fixed, data, v0)
    v0 = np.where(domain.mask, v0, 0.0)
    lo = _as_array(cfg.lower)
    hi = _as_array(cfg.upper)
    if lo is not None or hi is not None:
        v0 = np.where(domain.free, np.clip(v0, -np.inf if lo is None else lo,
                                           np.inf if hi is None else hi), v0)
    model = DiscreteEnergy(grid, domain.mask, domain.free, nl)
    shift = _shift_estimate(nl, v0[..., 0][domain.free[..., 0]])
    precond = SeparablePreconditioner(grid, domain.free, _cylinder_bcs(domain), shift=shift)
    return _ncg(model, v0, cfg, precond, callback)


def saddle_minimize(wedge: WedgeDomain, nl: Nonlinearity, cfg: Optional[SolveConfig] = None) -> Solution:
    """Nonnegative minimiser on the wedge, zero on the cone s = t and on the outer boundary.

    The returned solution carries ``reflected``: the odd extension across the
    cone on the full quarter plane of (s, t).
    """
    rep = check_hypotheses(nl)
    if not rep.all:
        warnings.warn(f"nonlinearity {nl.name} fails the balanced bistable hypotheses: {rep}",
                      RuntimeWarning, stacklevel=2)
    cfg = cfg or SolveConfig()
    if cfg.lower is None:
        cfg = SolveConfig(**{**cfg.__dict__, "lower": 0.0})
    grid = wedge.grid
    s, t, _ = grid.mesh()
    v0 = np.broadcast_to(np.clip(np.tanh((s - t) / math.sqrt(2.0)), 0.0, 1.0), grid.shape).copy()
    v0 = np.where(wedge.free, v0, 0.0)
    model = DiscreteEnergy(grid, wedge.mask, wedge.free, nl, density=wedge.density)
    shift = _shift_estimate(nl, v0[..., 0][wedge.free[..., 0]])
    bcs = [("dirichlet", "dirichlet"), ("neumann", "dirichlet"), ("neumann", "dirichlet")]
    precond = SeparablePreconditioner(grid, wedge.free, bcs, shift=shift)
    sol = _ncg(model, v0, cfg, precond)
    sol.reflected = reflect_odd(sol.field, wedge)
    if float(np.max(sol.field.values)) <= 1e-8:
        sol.trivial = True
        warnings.warn("saddle minimiser is identically zero; enlarge R and L", RuntimeWarning,
                      stacklevel=2)
    return sol


def reflect_odd(v: ScalarField, wedge: WedgeDomain) -> ScalarField:
    """u(s, t) = v(s, t) for t <= s and -v(t, s) for t > s."""
    vals = np.where(wedge.mask, v.values, 0.0)
    full = vals - np.swapaxes(vals, 0, 1)
    s, t, _ = wedge.grid.mesh()
    disk = np.broadcast_to(s ** 2 + t ** 2 <= wedge.R ** 2 * (1 + 1e-9), wedge.grid.shape)
    return ScalarField(wedge.grid, np.where(disk, full, 0.0), disk)


# ---------------------------------------------------------------------------
# diagnostics

def _field_of(v) -> ScalarField:
    return v.field if isinstance(v, Solution) else v


def check_monotone(v: ScalarField, axis: int, tol: float = 1e-10) -> float:
    """Fraction of masked axis-neighbour pairs where v decreases by more than tol."""
    d = np.diff(v.values, axis=axis)
    lo = [slice(None)] * v.grid.ndim
    hi = [slice(None)] * v.grid.ndim
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    both = v.mask[tuple(lo)] & v.mask[tuple(hi)]
    if not both.any():
        return 0.0
    return float(np.mean(d[both] < -tol))


def slide_energy_profile(v, nl: Nonlinearity, R: float, shifts: Sequence[float],
                         axis: Optional[int] = None, base_shape: str = "box") -> list[tuple[float, float]]:
    """Energies E_{C_R}(v^t) of the field shifted by t along ``axis`` (potential offset 0)."""
    from .energy import energy_breakdown

    fld = _field_of(v)
    grid = fld.grid
    n = grid.ndim - 1
    axis = n - 1 if axis is None else axis
    if check_monotone(fld, axis) > 0:
        raise ValueError("field is not monotone along the sliding axis")
    h = grid.spacings[0]
    tol = 1e-9 * h
    mesh = grid.mesh()
    out = []
    dropped = []
    for t in shifts:
        center = [0.0] * n
        center[axis] = float(t)
        fits = grid.upper(n) >= R - tol
        for k in range(n):
            fits &= grid.origins[k] <= center[k] - R + tol and grid.upper(k) >= center[k] + R - tol
        if not fits:
            dropped.append(t)
            continue
        if base_shape == "ball":
            base = sum((mesh[k] - center[k]) ** 2 for k in range(n)) <= R * R + tol
        else:
            base = np.ones((1,) * grid.ndim, dtype=bool)
            for k in range(n):
                base = base & (np.abs(mesh[k] - center[k]) <= R + tol)
        region = np.broadcast_to(base & (mesh[-1] <= R + tol), grid.shape) & fld.mask
        eb = energy_breakdown(fld, nl, c_offset=0.0, region=region)
        out.append((float(t), eb.total))
    if dropped:
        warnings.warn(f"shifts {dropped} leave the computed field; truncated", RuntimeWarning,
                      stacklevel=2)
    return out


@dataclass
class LimitProfiles:
    lower: ScalarField
    upper: ScalarField
    m: float
    m_tilde: float
    M_tilde: float
    M: float


def limit_profiles(v, axis: Optional[int] = None, edge_fraction: float = 0.05) -> LimitProfiles:
    """Edge averages approximating the limits of v as x_axis -> -inf / +inf."""
    fld = _field_of(v)
    grid = fld.grid
    n = grid.ndim - 1
    axis = n - 1 if axis is None else axis
    if not 0 < edge_fraction <= 0.5:
        raise ValueError("edge_fraction must lie in (0, 1/2]")
    if check_monotone(fld, axis) > 0:
        raise ValueError("field is not monotone along the limit axis")
    count = grid.counts[axis]
    k = max(1, int(math.ceil(edge_fraction * count)))
    vals = np.where(fld.mask, fld.values, np.nan)
    low = np.nanmean(np.take(vals, np.arange(k), axis=axis), axis=axis)
    up = np.nanmean(np.take(vals, np.arange(count - k, count), axis=axis), axis=axis)
    keep = [i for i in range(grid.ndim) if i != axis]
    sub = UniformGrid([grid.origins[i] for i in keep], [grid.spacings[i] for i in keep],
                      [grid.counts[i] for i in keep])
    lmask = np.isfinite(low)
    umask = np.isfinite(up)
    lower = ScalarField(sub, np.where(lmask, low, 0.0), lmask)
    upper = ScalarField(sub, np.where(umask, up, 0.0), umask)
    ul = low[..., 0][lmask[..., 0]]
    uu = up[..., 0][umask[..., 0]]
    return LimitProfiles(lower, upper, float(ul.min()), float(ul.max()),
                         float(uu.min()), float(uu.max()))


def random_free_directions(model: DiscreteEnergy, count: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        d = rng.standard_normal(model.grid.shape)
        out.append(np.where(model.free, d, 0.0))
    return out


def gradient_check(model: DiscreteEnergy, v: np.ndarray, directions: int = 20, seed: int = 0,
                   eps: float = 1e-4) -> float:
    """Max relative error between g . d and a Richardson central difference of E."""
    g = model.gradient(v)
    worst = 0.0
    for d in random_free_directions(model, directions, seed):
        exact = float(np.sum(g * d))

        def cd(e):
            return (model.energy(v + e * d) - model.energy(v - e * d)) / (2 * e)

        fd = (4 * cd(eps / 2) - cd(eps)) / 3
        worst = max(worst, abs(fd - exact) / max(abs(exact), 1e-300))
    return worst


def perturbation_check(sol: Solution, count: int = 50, amplitude: float = 0.05,
                       seed: int = 0) -> np.ndarray:
    """Energy changes under random smooth bumps vanishing on the pinned boundary."""
    model = sol.model
    grid = model.grid
    rng = np.random.default_rng(seed)
    v = sol.field.values
    E0 = model.energy(v)
    mesh = grid.mesh()
    free_idx = np.argwhere(model.free)
    lengths = [grid.upper(k) - grid.origins[k] for k in range(grid.ndim)]
    out = np.empty(count)
    for i in range(count):
        c = free_idx[rng.integers(len(free_idx))]
        centre = [grid.origins[k] + c[k] * grid.spacings[k] for k in range(grid.ndim)]
        radius = rng.uniform(3 * max(grid.spacings), 0.25 * min(lengths))
        r2 = sum((mesh[k] - centre[k]) ** 2 for k in range(grid.ndim)) / radius ** 2
        bump = np.where(r2 < 1, np.cos(0.5 * np.pi * np.sqrt(np.minimum(r2, 1.0))) ** 2, 0.0)
        bump = np.broadcast_to(bump, grid.shape)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        w = v + sign * amplitude * np.where(model.free, bump, 0.0)
        out[i] = model.energy(w) - E0
    return out
