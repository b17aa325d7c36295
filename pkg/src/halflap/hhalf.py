"""Squared H^{1/2} norms by direct double sums, ramp profiles and the |log eps| experiment.

Sets are represented by weighted nodes: an interval/box Q_1 = (-1, 1)^n with a
hyperplane interface {x_n = 0}, or the boundary of the cylinder
[-1, 1]^n x [0, 1] split into flat facets, whose interface is the bottom edge.
Pair distances are ambient chord lengths.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .grid import CylinderDomain, ScalarField, axis_count, dirichlet_energy

BLOCK = 512


@dataclass
class Facet:
    index: np.ndarray     # positions of this facet's points in the flat point list
    shape: tuple          # facet grid shape (tangential axes)
    spacings: tuple


@dataclass
class TraceDomain:
    kind: str                   # "interval" | "cylinder-boundary"
    n: int                      # dimension of the set
    h: float
    points: np.ndarray          # (N, ambient)
    weights: np.ndarray         # (N,)
    distance: np.ndarray        # (N,) unsigned distance to the interface
    side: Optional[np.ndarray]  # (N,) side of the interface, None if it has only one
    facets: list = field(default_factory=list)
    node_index: Optional[np.ndarray] = None   # cylinder grid index of each point

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    def field_from(self, fn: Callable) -> np.ndarray:
        return np.asarray(fn(*self.points.T), dtype=float) * np.ones(len(self.points))

    @classmethod
    def interval_box(cls, n: int, h: float) -> "TraceDomain":
        """Q_1 = (-1, 1)^n with interface {x_n = 0}; nodes with trapezoid weights."""
        c = axis_count(-1.0, 1.0, h)
        x = -1.0 + h * np.arange(c)
        w1 = np.full(c, h)
        w1[[0, -1]] = 0.5 * h
        mesh = np.meshgrid(*([x] * n), indexing="ij")
        wm = np.meshgrid(*([w1] * n), indexing="ij")
        pts = np.column_stack([m.ravel() for m in mesh])
        wts = np.prod(np.stack([m.ravel() for m in wm]), axis=0)
        xn = pts[:, -1]
        fac = Facet(np.arange(len(pts)), (c,) * n, (h,) * n)
        return cls("interval", n, h, pts, wts, np.abs(xn), np.sign(xn), [fac])

    @classmethod
    def cylinder_boundary(cls, n: int, h: float) -> "TraceDomain":
        """Boundary of [-1, 1]^n x [0, 1] with interface (boundary of the base) x {0}."""
        dom = CylinderDomain.from_bounds([(-1.0, 1.0)] * n, 1.0, h)
        grid = dom.grid
        counts = grid.counts
        pts, wts, idx_all, facets = [], [], [], []
        start = 0

        def add(fixed_axis: int, at: int):
            nonlocal start
            free = [k for k in range(n + 1) if k != fixed_axis]
            ranges = [np.arange(counts[k]) for k in free]
            mesh = np.meshgrid(*ranges, indexing="ij")
            idx = np.zeros((mesh[0].size, n + 1), dtype=int)
            for k, m in zip(free, mesh):
                idx[:, k] = m.ravel()
            idx[:, fixed_axis] = at
            w = np.ones(mesh[0].size)
            for k, m in zip(free, mesh):
                wk = np.full(counts[k], grid.spacings[k])
                wk[[0, -1]] *= 0.5
                w *= wk[m.ravel()]
            coords = np.column_stack([grid.origins[k] + idx[:, k] * grid.spacings[k]
                                      for k in range(n + 1)])
            pts.append(coords)
            wts.append(w)
            idx_all.append(idx)
            facets.append(Facet(np.arange(start, start + len(w)), tuple(counts[k] for k in free),
                                tuple(grid.spacings[k] for k in free)))
            start += len(w)

        add(n, 0)
        add(n, counts[n] - 1)
        for k in range(n):
            add(k, 0)
            add(k, counts[k] - 1)
        P = np.vstack(pts)
        base = P[:, :n]
        to_edge = np.min(1.0 - np.abs(base), axis=1)
        to_edge = np.maximum(to_edge, 0.0)
        dist = np.sqrt(to_edge ** 2 + P[:, n] ** 2)
        # the interface separates the bottom facet (-) from the lateral and top facets (+)
        side = np.where(P[:, n] > 0, 1.0, -1.0)
        side[dist == 0] = 0.0
        return cls("cylinder-boundary", n, h, P, np.concatenate(wts), dist, side, facets,
                   np.vstack(idx_all))

    def exact_measure(self) -> float:
        if self.kind == "interval":
            return 2.0 ** self.n
        return 2 * 2.0 ** self.n + 2 * self.n * 2.0 ** (self.n - 1)


@dataclass
class TraceFunction:
    domain: TraceDomain
    values: np.ndarray
    c0: float = 1.0
    eps: Optional[float] = None

    def scaled(self, c: float) -> "TraceFunction":
        return TraceFunction(self.domain, c * self.values, abs(c) * self.c0, self.eps)

    def tangential_gradient(self) -> np.ndarray:
        """|D w| per point from facet-wise central (one-sided at facet edges) differences."""
        out = np.zeros(len(self.values))
        for fac in self.domain.facets:
            vals = self.values[fac.index].reshape(fac.shape)
            grads = np.gradient(vals, *fac.spacings) if vals.ndim > 1 else [
                np.gradient(vals, fac.spacings[0])]
            mag = np.sqrt(sum(g ** 2 for g in grads)).ravel()
            out[fac.index] = np.maximum(out[fac.index], mag)
        return out

    def check_bounds(self) -> tuple[bool, bool]:
        """(amplitude bound, gradient bound c0 min{1/eps, 1/dist} (1 + 3h))."""
        amp = bool(np.all(np.abs(self.values) <= self.c0 * (1 + 1e-12)))
        if self.eps is None:
            return amp, True
        d = self.domain.distance
        with np.errstate(divide="ignore"):
            cap = self.c0 * np.minimum(1.0 / self.eps, np.where(d > 0, 1.0 / d, np.inf))
        grad = self.tangential_gradient()
        return amp, bool(np.all(grad <= cap * (1 + 3 * self.domain.h) + 1e-12))


def _values(w) -> tuple[TraceDomain, np.ndarray]:
    if isinstance(w, TraceFunction):
        return w.domain, w.values
    dom, vals = w
    return dom, np.asarray(vals, dtype=float)


def h_half_seminorm(w, block: int = BLOCK) -> float:
    """sum_{i,j} a_i a_j (w_i - w_j)^2 / |z_i - z_j|^{n+1}, pairs closer than h/2 excluded.

    ``w`` is a TraceFunction or a (TraceDomain, values) pair. Both orders of
    each pair are counted (the double integral over A x A). Partial sums are
    accumulated block by block in a fixed order.
    """
    dom, vals = _values(w)
    P, a = dom.points, dom.weights
    cut2 = (0.5 * dom.h) ** 2
    p = 0.5 * (dom.n + 1)
    N = len(vals)
    total = 0.0
    for s in range(0, N, block):
        e = min(N, s + block)
        d2 = np.zeros((e - s, N))
        for k in range(P.shape[1]):
            d2 += (P[s:e, k, None] - P[None, :, k]) ** 2
        diff2 = (vals[s:e, None] - vals[None, :]) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            kern = np.where(d2 >= cut2, diff2 / d2 ** p, 0.0)
        total += float(np.sum(a[s:e] * (kern @ a)))
    return total


def l2_squared(w) -> float:
    dom, vals = _values(w)
    return float(np.sum(dom.weights * vals ** 2))


def h_half_norm_squared(w) -> float:
    return l2_squared(w) + h_half_seminorm(w)


def ramp_profile(domain: TraceDomain, eps: float, c0: float = 1.0) -> TraceFunction:
    """c0 clamp(signed distance / eps, -1, 1); unsigned with range [0, c0] for one-sided interfaces."""
    if not 0 < eps < 0.5:
        raise ValueError(f"eps={eps} must lie in (0, 1/2)")
    ramp = np.minimum(domain.distance / eps, 1.0)
    if domain.side is not None:
        ramp = ramp * domain.side
    return TraceFunction(domain, c0 * ramp, c0, eps)


def _lsq_line(x, y) -> tuple[float, float, float]:
    X = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    res = y - X @ coef
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(res ** 2)) / ss if ss > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2


@dataclass
class LogBoundReport:
    eps: np.ndarray
    l2: np.ndarray
    seminorm: np.ndarray
    total: np.ndarray
    slope: float
    intercept: float
    r2: float
    dropped: list

    def rows(self):
        return [(float(e), float(a), float(b), float(c))
                for e, a, b, c in zip(self.eps, self.l2, self.seminorm, self.total)]

    def report(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2,
                "dropped": " ".join(f"{e:g}" for e in self.dropped)}


def log_bound_experiment(domain: TraceDomain, eps_list: Sequence[float], c0: float = 1.0,
                         profile: Optional[Callable[[TraceDomain, float], TraceFunction]] = None,
                         min_resolution: float = 4.0) -> LogBoundReport:
    """Full squared norm of the eps-profile for each eps and the fit s |log eps| + b."""
    eps_list = [float(e) for e in eps_list]
    for e in eps_list:
        if not 0 < e < 0.5:
            raise ValueError(f"eps={e} must lie in (0, 1/2)")
    keep = [e for e in eps_list if e >= min_resolution * domain.h - 1e-15]
    dropped = [e for e in eps_list if e not in keep]
    if dropped:
        warnings.warn(f"eps values {dropped} are under-resolved at h={domain.h}; dropped",
                      RuntimeWarning, stacklevel=2)
    if len(keep) < 4:
        raise ValueError("need at least four resolved eps values")
    profile = profile or (lambda d, e: ramp_profile(d, e, c0))
    l2, semi = [], []
    for e in keep:
        w = profile(domain, e)
        l2.append(l2_squared(w))
        semi.append(h_half_seminorm(w))
    eps = np.asarray(keep)
    l2, semi = np.asarray(l2), np.asarray(semi)
    total = l2 + semi
    s, b, r2 = _lsq_line(np.abs(np.log(eps)), total)
    return LogBoundReport(eps, l2, semi, total, s, b, r2, dropped)


# ---------------------------------------------------------------------------
# extension inequality on the unit cylinder

def band_limited(n: int, rng: np.random.Generator, modes: int = 6, kmax: float = 2 * math.pi):
    """Random sum of plane waves in R^{n+1} with |k| <= kmax and unit-variance amplitude."""
    k = rng.standard_normal((modes, n + 1))
    k *= (kmax * rng.random(modes) ** (1.0 / (n + 1)) / np.linalg.norm(k, axis=1))[:, None]
    amp = rng.standard_normal(modes) / math.sqrt(modes)
    phase = rng.uniform(0, 2 * math.pi, modes)

    def fn(*coords):
        out = 0.0
        for j in range(modes):
            arg = sum(k[j, i] * coords[i] for i in range(n + 1)) + phase[j]
            out = out + amp[j] * np.cos(arg)
        return out

    return fn


@dataclass
class ExtensionRatio:
    dirichlet: float      # int |grad w_bar|^2 (no factor 1/2)
    norm_squared: float   # L2 + seminorm on the cylinder boundary
    ratio: float
    mollified: Optional[float] = None            # int |grad zeta~|^2
    mollified_completion: Optional[float] = None  # same for the harmonic field with zeta~'s boundary values

    @property
    def ordering_holds(self) -> Optional[bool]:
        if self.mollified is None:
            return None
        return self.mollified_completion <= self.mollified * (1 + 1e-10)


def extension_inequality_check(data, n: int, h: float, mollifier: bool = False) -> ExtensionRatio:
    """Ratio of the harmonic extension's Dirichlet integral to the boundary's squared norm.

    ``data`` is a function of (x_1, ..., x_n, lam) read on the boundary of
    [-1, 1]^n x [0, 1] (or a full-grid array). With ``mollifier=True`` the
    bottom trace is also extended by the mollifier and the harmonic completion
    of that extension's boundary values is compared with it.
    """
    from .extension import dirichlet_solve, mollifier_extend

    dom = CylinderDomain.from_bounds([(-1.0, 1.0)] * n, 1.0, h)
    grid = dom.grid
    vals = np.broadcast_to(data(*grid.mesh()) if callable(data) else data, grid.shape).astype(float)
    bnd = ScalarField(grid, np.where(dom.fixed | dom.bottom, vals, 0.0), dom.mask)
    wbar = dirichlet_solve(dom, bnd)
    energy = 2.0 * dirichlet_energy(wbar.values, grid, dom.mask)
    td = TraceDomain.cylinder_boundary(n, h)
    tv = vals[tuple(td.node_index.T)]
    norm2 = h_half_norm_squared((td, tv))
    ratio = energy / norm2 if norm2 > 0 else 0.0
    out = ExtensionRatio(energy, norm2, ratio)
    if mollifier:
        zeta = ScalarField(grid.drop_last(), vals[..., 0].copy())
        zt = mollifier_extend(zeta, grid.coords(n))
        out.mollified = 2.0 * dirichlet_energy(zt.values, grid, dom.mask)
        comp = dirichlet_solve(dom, ScalarField(grid, np.where(dom.fixed | dom.bottom, zt.values, 0.0),
                                                dom.mask))
        out.mollified_completion = 2.0 * dirichlet_energy(comp.values, grid, dom.mask)
    return out
