"""Energy accounting on cylinders, nested-radius scans and growth-law fits."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .grid import (ScalarField, bottom_weights, dirichlet_energy, gradient_magnitude)
from .nonlinearity import Nonlinearity, c_u_of

Offset = Union[str, float]


@dataclass(frozen=True)
class EnergyBreakdown:
    dirichlet: float
    potential: float
    total: float
    c_u: float
    R: float
    n: int


def _trace_range(fld: ScalarField, region: np.ndarray) -> tuple[float, float]:
    bottom = region[..., 0]
    if not bottom.any():
        raise ValueError("region does not meet the bottom boundary")
    u = fld.values[..., 0][bottom]
    return float(u.min()), float(u.max())


def resolve_offset(fld: ScalarField, nl: Nonlinearity, c_offset: Offset,
                   region: Optional[np.ndarray] = None) -> float:
    if isinstance(c_offset, str):
        if c_offset != "auto":
            raise ValueError("c_offset must be 'auto' or a number")
        lo, hi = _trace_range(fld, fld.mask if region is None else region)
        return c_u_of(nl, lo, hi).value
    return float(c_offset)


def energy_breakdown(v: ScalarField, nl: Nonlinearity, c_offset: Offset = "auto",
                     region: Optional[np.ndarray] = None, density=None,
                     measure_factor: float = 1.0, R: float = float("nan")) -> EnergyBreakdown:
    """Dirichlet part 1/2 int |grad v|^2 plus potential part int (G(u) - c_u).

    Uses the same edge/bottom quadrature as the solver, so the energy of a
    discrete minimiser is the quantity that was minimised. ``region`` restricts
    both integrals to a sub-cylinder; ``density`` and ``measure_factor`` carry
    the reduced-coordinate weight of symmetric problems.
    """
    region = v.mask if region is None else (region & v.mask)
    c = resolve_offset(v, nl, c_offset, region)
    vals = np.where(region, v.values, 0.0)
    d = measure_factor * dirichlet_energy(vals, v.grid, region, density)
    bw = bottom_weights(v.grid, region, density)
    u = vals[..., 0]
    p = measure_factor * float(np.sum(np.where(region[..., 0], bw * (nl.G(u) - c), 0.0)))
    return EnergyBreakdown(d, p, d + p, c, R, v.grid.ndim - 1)


def cylinder_region(v: ScalarField, r: float, center: Optional[Sequence[float]] = None,
                    base_shape: str = "box") -> np.ndarray:
    grid = v.grid
    n = grid.ndim - 1
    center = [0.0] * n if center is None else list(center)
    mesh = grid.mesh()
    tol = 1e-9 * min(grid.spacings)
    if base_shape == "ball":
        base = sum((mesh[k] - center[k]) ** 2 for k in range(n)) <= r * r + tol
    elif base_shape == "box":
        base = np.ones((1,) * grid.ndim, dtype=bool)
        for k in range(n):
            base = base & (np.abs(mesh[k] - center[k]) <= r + tol)
    else:
        raise ValueError(f"unknown base shape {base_shape!r}")
    return np.broadcast_to(base & (mesh[-1] <= r + tol), grid.shape) & v.mask


def energy_scan(v, nl: Nonlinearity, radii: Sequence[float], c_offset: Offset = "auto",
                domain=None, base_shape: str = "box") -> list[EnergyBreakdown]:
    """Breakdowns over nested sub-cylinders C_r of one computed field (no re-solve).

    With ``c_offset='auto'`` a single c_u, taken over the trace range of the
    whole field, is used for every radius so the totals are nested.
    """
    fld = getattr(v, "field", v)
    h = max(fld.grid.spacings)
    reach = min(fld.grid.upper(fld.grid.ndim - 1), *[
        min(-fld.grid.origins[k], fld.grid.upper(k)) for k in range(fld.grid.ndim - 1)])
    if domain is not None and hasattr(domain, "L"):
        reach = max(reach, domain.R)
    for r in radii:
        if r < 3 * h:
            raise ValueError(f"radius {r} is below three grid spacings")
        if r <= 2:
            raise ValueError(f"radius {r} must exceed 2")
        if domain is None and r > reach + 1e-9 * h:
            raise ValueError(f"radius {r} exceeds the computed field")
    c = resolve_offset(fld, nl, c_offset)
    out = []
    for r in radii:
        if domain is not None:
            region = domain.region(r)
            dens, mf = domain.density, domain.measure_factor
        else:
            region = cylinder_region(fld, r, base_shape=base_shape)
            dens, mf = None, 1.0
        out.append(energy_breakdown(fld, nl, c, region, dens, mf, R=float(r)))
    return out


@dataclass
class ScalingFit:
    a: float
    b: float
    r2: float
    residuals: np.ndarray
    radii: np.ndarray
    n: int
    trend: float = 0.0
    trend_flag: bool = False

    def predict(self, R) -> np.ndarray:
        R = np.asarray(R, dtype=float)
        s = R ** (self.n - 1)
        return self.a * s * np.log(R) + self.b * s

    def report(self) -> dict:
        return {"n": self.n, "a": self.a, "b": self.b, "r2": self.r2,
                "trend": self.trend, "trend_flag": int(self.trend_flag),
                "radii": " ".join(f"{r:g}" for r in self.radii)}


def fit_values(radii: Sequence[float], values: Sequence[float], n: int) -> ScalingFit:
    """Least squares E(R) = a R^(n-1) log R + b R^(n-1)."""
    R = np.asarray(radii, dtype=float)
    E = np.asarray(values, dtype=float)
    if R.size < 4:
        raise ValueError("a scaling fit needs at least four radii")
    if np.any(np.diff(R) <= 0):
        raise ValueError("radii must be strictly increasing")
    if np.any(R <= 2):
        raise ValueError("radii must exceed 2")
    s = R ** (n - 1)
    X = np.column_stack([s * np.log(R), s])
    if np.linalg.matrix_rank(X) < 2:
        raise ValueError("singular normal equations")
    coef, *_ = np.linalg.lstsq(X, E, rcond=None)
    res = E - X @ coef
    ss_tot = float(np.sum((E - E.mean()) ** 2))
    r2 = 1.0 - float(np.sum(res ** 2)) / ss_tot if ss_tot > 0 else 1.0
    # residual trend over the upper half of the radii
    k = max(2, R.size // 2)
    trend = float(np.polyfit(R[-k:], res[-k:], 1)[0])
    flag = trend > 0 and abs(res[-1]) > 1e-3 * max(1.0, abs(E[-1]))
    return ScalingFit(float(coef[0]), float(coef[1]), r2, res, R, n, trend, flag)


def scaling_fit(scan: Sequence[EnergyBreakdown], part: str = "total") -> ScalingFit:
    if len(scan) < 4:
        raise ValueError("a scaling fit needs at least four radii")
    n = scan[0].n
    return fit_values([e.R for e in scan], [getattr(e, part) for e in scan], n)


def normalised_totals(scan: Sequence[EnergyBreakdown]) -> np.ndarray:
    """total(R) / (R^(n-1) log R)."""
    return np.array([e.total / (e.R ** (e.n - 1) * math.log(e.R)) for e in scan])


@dataclass
class DecayProfile:
    levels: np.ndarray
    sup: np.ndarray
    C: float
    ratio: float
    scaled: np.ndarray = field(repr=False)


def gradient_decay_profile(v, region: Optional[np.ndarray] = None,
                           max_level: Optional[float] = None) -> DecayProfile:
    """Per-level sup_x |grad v(x, lam)|, the constant C of C/(1+lam) and max/min of sup*(1+lam)."""
    fld = getattr(v, "field", v)
    mag = gradient_magnitude(fld)
    sel = fld.mask if region is None else (region & fld.mask)
    lam = fld.grid.coords(fld.grid.ndim - 1)
    keep = []
    sups = []
    for j, l in enumerate(lam):
        if max_level is not None and l > max_level + 1e-12:
            break
        m = sel[..., j]
        if not m.any():
            continue
        keep.append(l)
        sups.append(float(np.max(mag[..., j][m])))
    keep = np.asarray(keep)
    sups = np.asarray(sups)
    scaled = sups * (1.0 + keep)
    C = float(scaled.max()) if scaled.size else 0.0
    lo = float(scaled.min()) if scaled.size else 0.0
    if lo > 0:
        ratio = C / lo
    else:
        ratio = 1.0 if C == 0 else math.inf
    if ratio == math.inf:
        warnings.warn("gradient vanishes on some level; decay ratio is unbounded", RuntimeWarning,
                      stacklevel=2)
    return DecayProfile(keep, sups, C, ratio, scaled)
