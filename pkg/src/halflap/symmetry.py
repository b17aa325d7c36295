"""Quotients of derivatives by a positive witness, and 1-D-ness diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grid import ScalarField, gradient, shift

PHI_FLOOR = 1e-8
COLLAR = 0.2


class UndefinedDirectionError(ValueError):
    pass


def core_region(fld: ScalarField, collar: float = COLLAR) -> np.ndarray:
    """Drop a collar of width ``collar`` x (base half-width) from the lateral and top truncation."""
    grid = fld.grid
    n = grid.ndim - 1
    mesh = grid.mesh()
    tol = 1e-9 * min(grid.spacings)
    core = np.ones((1,) * grid.ndim, dtype=bool)
    halves = []
    for k in range(n):
        lo, hi = grid.origins[k], grid.upper(k)
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        halves.append(half)
        core = core & (np.abs(mesh[k] - mid) <= (1 - collar) * half + tol)
    top = grid.upper(n) - collar * min(halves)
    core = core & (mesh[n] <= top + tol)
    return np.broadcast_to(core, grid.shape) & fld.mask


def _field(v) -> ScalarField:
    return getattr(v, "field", v)


def stability_witness(v, axis: int, core: Optional[np.ndarray] = None,
                      min_fraction: float = 0.99) -> ScalarField:
    """phi = d v / d x_axis for a solution increasing along ``axis``."""
    fld = _field(v)
    core = core_region(fld) if core is None else core
    lo = [slice(None)] * fld.grid.ndim
    hi = [slice(None)] * fld.grid.ndim
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    d = np.diff(fld.values, axis=axis)
    both = core[tuple(lo)] & core[tuple(hi)]
    if not both.any():
        raise ValueError("core region has no neighbour pairs along the axis")
    frac = float(np.mean(d[both] > 0))
    if frac < min_fraction:
        raise ValueError(f"field is not increasing along axis {axis}: "
                         f"positive differences on {frac:.4f} of core pairs")
    phi = gradient(fld)[axis]
    if not np.all(phi.values[core] > 0):
        raise ValueError("witness is not positive on the core")
    return phi


def _div_weighted(sigma: np.ndarray, w: np.ndarray, spacings, ok: np.ndarray):
    """sum_k D_k^- (w_{k+1/2} D_k^+ sigma) at nodes whose full stencil lies in ``ok``."""
    out = np.zeros_like(sigma)
    valid = ok.copy()
    for k, h in enumerate(spacings):
        sp, sm = shift(sigma, k, 1), shift(sigma, k, -1)
        wp, wm = 0.5 * (w + shift(w, k, 1)), 0.5 * (w + shift(w, k, -1))
        out += (wp * (sp - sigma) - wm * (sigma - sm)) / (h * h)
        valid &= shift(ok, k, 1, False) & shift(ok, k, -1, False)
    return np.where(valid, out, 0.0), valid


@dataclass
class SymmetryReport:
    sigma: list = field(repr=False)
    osc: list
    mean_abs: list
    residual: list
    bottom_flux: list
    growth: dict
    direction: np.ndarray
    deviation: float
    h: float
    one_dimensional: bool

    def report(self) -> dict:
        out = {"h": self.h, "deviation": self.deviation, "one_dimensional": int(self.one_dimensional),
               "direction": " ".join(f"{a:.12g}" for a in self.direction)}
        for i, (o, r, b) in enumerate(zip(self.osc, self.residual, self.bottom_flux)):
            out[f"osc_{i + 1}"] = o
            out[f"residual_{i + 1}"] = r
            out[f"bottom_flux_{i + 1}"] = b
        for R, vals in self.growth.items():
            for i, g in enumerate(vals):
                out[f"growth_{i + 1}_R{R:g}"] = g
        return out


def liouville_check(v, phi: ScalarField, derivatives: Optional[Sequence[ScalarField]] = None,
                    radii: Sequence[float] = (), core: Optional[np.ndarray] = None,
                    phi_floor: float = PHI_FLOOR, osc_tol: Optional[float] = None,
                    deviation_tol: float = 1e-3) -> SymmetryReport:
    """sigma_i = v_{x_i} / phi on the core, with the diagnostics of the weighted divergence equation.

    ``derivatives`` replaces the discrete partials of v (e.g. closed forms).
    ``radii`` lists sub-cylinders for the growth quotient int (phi sigma_i)^2 / (R^2 log R).
    """
    fld = _field(v)
    grid = fld.grid
    n = grid.ndim - 1
    h = max(grid.spacings)
    core = core_region(fld) if core is None else core
    good = core & (phi.values > phi_floor)
    if not good.any():
        raise ValueError("witness is below the floor on the whole core")
    parts = list(derivatives) if derivatives is not None else gradient(fld)[:n]
    sigmas, osc, mean_abs, resid, flux = [], [], [], [], []
    w = phi.values ** 2
    for d in parts[:n]:
        sig = np.where(good, d.values / np.where(good, phi.values, 1.0), 0.0)
        sigmas.append(ScalarField(grid, sig, good))
        vals = sig[good]
        osc.append(float(vals.max() - vals.min()))
        mean_abs.append(float(np.mean(np.abs(vals))))
        div, valid = _div_weighted(sig, w, grid.spacings, good)
        resid.append(float(np.max(np.abs(div[valid]))) if valid.any() else 0.0)
        b = good[..., 0] & good[..., 1] & good[..., 2]
        dl = (-3 * sig[..., 0] + 4 * sig[..., 1] - sig[..., 2]) / (2 * grid.spacings[n])
        fl = -sig[..., 0] * dl
        flux.append(float(np.max(np.abs(fl[b]))) if b.any() else 0.0)
    growth = {}
    if radii:
        from .energy import cylinder_region
        from .grid import integrate
        for R in radii:
            reg = cylinder_region(fld, R)
            vals = []
            for d in parts[:n]:
                sq = ScalarField(grid, np.where(fld.mask, d.values ** 2, 0.0), fld.mask)
                vals.append(integrate(sq, reg) / (R * R * math.log(R)))
            growth[float(R)] = vals
    trace_grad = [ScalarField(grid.drop_last(), p.values[..., 0]) for p in parts[:n]]
    try:
        a, dev = one_d_direction(fld.level(0), gradient_fields=trace_grad, core=core[..., 0])
    except UndefinedDirectionError:
        a, dev = np.full(n, np.nan), math.pi
    tol = 10 * h if osc_tol is None else osc_tol
    one_d = all(o <= tol for o in osc) and dev <= deviation_tol
    return SymmetryReport(sigmas, osc, mean_abs, resid, flux, growth, a, dev, h, one_d)


def one_d_direction(u: ScalarField, gradient_fields: Optional[Sequence[ScalarField]] = None,
                    core: Optional[np.ndarray] = None, threshold: float = 1e-6,
                    min_fraction: float = 0.5) -> tuple[np.ndarray, float]:
    """Mean gradient direction of the trace over the core, and the max angle to it."""
    if core is None:
        grid = u.grid
        mesh = grid.mesh()
        core = np.ones((1,) * grid.ndim, dtype=bool)
        for k in range(grid.ndim):
            lo, hi = grid.origins[k], grid.upper(k)
            core = core & (np.abs(mesh[k] - 0.5 * (lo + hi)) <= (1 - COLLAR) * 0.5 * (hi - lo) + 1e-12)
        core = np.broadcast_to(core, grid.shape) & u.mask
    grads = gradient_fields if gradient_fields is not None else gradient(u)
    G = np.stack([g.values[core] for g in grads], axis=-1)
    mag = np.linalg.norm(G, axis=-1)
    live = mag > threshold
    if live.size == 0 or np.mean(live) < min_fraction:
        raise UndefinedDirectionError("gradient vanishes on most of the core; direction undefined")
    mean = G[live].mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if norm <= threshold:
        raise UndefinedDirectionError("mean gradient vanishes; direction undefined")
    a = mean / norm
    chord = np.linalg.norm(G[live] / mag[live, None] - a, axis=-1)
    dev = float(np.max(2.0 * np.arcsin(np.minimum(chord / 2.0, 1.0))))
    return a, dev
