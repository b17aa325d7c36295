"""Harmonic (Poisson-kernel) and mollifier extensions, and Dirichlet solves."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.integrate
import scipy.ndimage
import scipy.signal
from scipy.sparse.linalg import LinearOperator, cg

from ._linalg import EdgeOperator, SeparablePreconditioner
from .grid import (CylinderDomain, ScalarField, UniformGrid, edge_weights,
                   gradient_magnitude, point_weights)


class L2BoundWarning(UserWarning):
    pass


class DirichletSolveError(RuntimeError):
    def __init__(self, message: str, residuals: list[float]):
        super().__init__(message)
        self.residuals = residuals


def _sphere_area(n: int) -> float:
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


@dataclass(frozen=True)
class MollifierKernel:
    """exp(-1 / (1 - |x|^2)) on the unit ball of R^n, scaled to unit mass."""

    n: int
    normalization: float

    @classmethod
    def standard(cls, n: int) -> "MollifierKernel":
        radial, _ = scipy.integrate.quad(
            lambda r: r ** (n - 1) * math.exp(-1.0 / (1.0 - r * r)), 0.0, 1.0,
            epsabs=1e-14, epsrel=1e-12)
        if n == 1:
            mass = 2.0 * radial
        else:
            mass = _sphere_area(n) * radial
        return cls(n, mass)

    def __call__(self, r2: np.ndarray) -> np.ndarray:
        """Kernel value as a function of the squared radius."""
        r2 = np.asarray(r2, dtype=float)
        out = np.zeros_like(r2)
        inside = r2 < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - r2[inside])) / self.normalization
        return out

    def stencil(self, lam: float, spacings: Sequence[float]) -> tuple[np.ndarray, float]:
        """Grid weights of K_lam(x) = lam^-n K(x / lam), normalised to sum one.

        Returns the stencil and the raw quadrature mass before normalisation.
        Below lam = 16h the kernel is sampled on a refined sub-grid and mapped to
        the nodes by multilinear interpolation.
        """
        n = len(spacings)
        hmin = min(spacings)
        if lam <= 0:
            return np.ones((1,) * n), 1.0
        if lam >= 16 * hmin:
            half = [int(math.floor(lam / h)) for h in spacings]
            axes = [np.arange(-k, k + 1) * h for k, h in zip(half, spacings)]
            mesh = np.meshgrid(*axes, indexing="ij")
            r2 = sum(m ** 2 for m in mesh) / lam ** 2
            w = self(r2) * np.prod(spacings) / lam ** n
            mass = float(w.sum())
            return w / mass, mass
        q = int(math.ceil(16 * hmin / lam))
        half = [int(math.ceil(lam / h)) for h in spacings]
        sub_axes = []
        for h in spacings:
            m = int(math.ceil(lam / (h / q)))
            sub_axes.append(np.arange(-m, m + 1) * (h / q))
        mesh = np.meshgrid(*sub_axes, indexing="ij")
        r2 = sum(m ** 2 for m in mesh) / lam ** 2
        w = self(r2) * np.prod([h / q for h in spacings]) / lam ** n
        mass = float(w.sum())
        keep = w.ravel() > 0
        wf = w.ravel()[keep]
        base, frac = [], []
        for m, h, k in zip(mesh, spacings, half):
            t = m.ravel()[keep] / h
            i0 = np.floor(t).astype(int)
            base.append(i0 + k)
            frac.append(t - i0)
        stencil = np.zeros([2 * k + 1 for k in half])
        for corner in range(2 ** n):
            idx = []
            wt = wf.copy()
            for a in range(n):
                bit = (corner >> a) & 1
                idx.append(base[a] + bit)
                wt = wt * (frac[a] if bit else 1.0 - frac[a])
            np.add.at(stencil, tuple(idx), wt)
        return stencil / stencil.sum(), mass


def _levels_grid(base: UniformGrid, levels) -> tuple[np.ndarray, UniformGrid]:
    levels = np.asarray(levels, dtype=float)
    if np.any(levels < 0):
        raise ValueError("lambda levels must be nonnegative")
    return levels, base.with_levels(levels)


def mollifier_extend(zeta: ScalarField, levels, kernel: Optional[MollifierKernel] = None) -> ScalarField:
    """zeta~(x, lam) = int K_lam(x - y) zeta(y) dy by grid quadrature.

    Values beyond the truncated base are the nearest edge values. The L2 bound
    ||zeta~(., lam)|| <= ||zeta|| is checked at every level; a violation (only
    possible through edge padding) is reported as an ``L2BoundWarning``.
    """
    n = zeta.grid.ndim
    kernel = kernel or MollifierKernel.standard(n)
    levels, grid = _levels_grid(zeta.grid, levels)
    out = np.empty(grid.shape)
    pw = point_weights(np.ones(zeta.grid.shape, dtype=bool), zeta.grid.spacings)
    ref = math.sqrt(float(np.sum(pw * zeta.values ** 2)))
    for j, lam in enumerate(levels):
        if lam == 0:
            out[..., j] = zeta.values
            continue
        st, _ = kernel.stencil(lam, zeta.grid.spacings)
        out[..., j] = scipy.ndimage.correlate(zeta.values, st, mode="nearest")
        norm = math.sqrt(float(np.sum(pw * out[..., j] ** 2)))
        if norm > ref * (1 + 1e-12) + 1e-300:
            warnings.warn(f"L2 bound violated at lambda={lam}: {norm} > {ref}", L2BoundWarning,
                          stacklevel=2)
    return ScalarField(grid, out)


# ---------------------------------------------------------------------------
# Poisson kernel

def poisson_kernel(n: int):
    c_n = math.gamma((n + 1) / 2) / math.pi ** ((n + 1) / 2)

    def P(r2, lam):
        return c_n * lam / (r2 + lam * lam) ** ((n + 1) / 2)

    return P


def _hat_weights_1d(d: np.ndarray, h: float, lam: float):
    """Left and right half-hat integrals of the 1-D Poisson kernel at offsets d."""
    def A0(y):
        return np.arctan((y - d) / lam) / math.pi

    def A1(y):
        return lam / (2 * math.pi) * np.log((y - d) ** 2 + lam * lam) + d * A0(y)

    a0m, a00, a0p = A0(-h), A0(0.0), A0(h)
    a1m, a10, a1p = A1(-h), A1(0.0), A1(h)
    left = (a00 - a0m) + (a10 - a1m) / h
    right = (a0p - a00) - (a1p - a10) / h
    return left, right


def _poisson_1d(u: np.ndarray, x: np.ndarray, h: float, lam: float) -> np.ndarray:
    N = u.size
    k = np.arange(-(N - 1), N) * h
    left, right = _hat_weights_1d(k, h, lam)
    full = np.convolve(u, left + right, mode="full")[N - 1:2 * N - 1]
    y0, y1 = x[0], x[-1]
    tail_left = np.arctan((y0 - x) / lam) / math.pi + 0.5
    tail_right = 0.5 - np.arctan((y1 - x) / lam) / math.pi
    l0, _ = _hat_weights_1d(x - y0, h, lam)
    _, rN = _hat_weights_1d(x - y1, h, lam)
    return full + u[0] * (tail_left - l0) + u[-1] * (tail_right - rN)


def _poisson_nd(u: np.ndarray, spacings, lam: float) -> np.ndarray:
    n = u.ndim
    P = poisson_kernel(n)
    counts = u.shape
    axes = [np.arange(-(c - 1), c) * h for c, h in zip(counts, spacings)]
    mesh = np.meshgrid(*axes, indexing="ij")
    r2 = sum(m ** 2 for m in mesh)
    cell = float(np.prod(spacings))
    w = P(r2, lam) * cell
    hmax = max(spacings)
    if lam < 3 * hmax:
        q = min(64, int(math.ceil(8 * hmax / lam)))
        near = r2 <= (3 * hmax) ** 2
        sub = [(np.arange(q) + 0.5) / q - 0.5 for _ in range(n)]
        smesh = np.meshgrid(*sub, indexing="ij")
        acc = np.zeros(int(near.sum()))
        centres = [m[near] for m in mesh]
        for offs in zip(*[s.ravel() for s in smesh]):
            rr = sum((c + o * h) ** 2 for c, o, h in zip(centres, offs, spacings))
            acc += P(rr, lam)
        w[near] = acc * cell / q ** n
    padded = np.pad(u, [(c - 1, c - 1) for c in counts], mode="edge")
    conv = scipy.signal.convolve(padded, w, mode="valid")
    # kernel mass beyond the padded window goes to the mean edge value
    ring = np.concatenate([np.moveaxis(u, k, 0)[[0, -1]].ravel() for k in range(n)])
    rest = 1.0 - float(w.sum())
    return conv + rest * float(ring.mean())


def poisson_extend(u: ScalarField, levels) -> ScalarField:
    """Harmonic extension by direct quadrature against the half-space Poisson kernel.

    The data are extended beyond the truncated base by their edge values.
    In one dimension the quadrature is exact for piecewise linear data.
    """
    levels, grid = _levels_grid(u.grid, levels)
    out = np.empty(grid.shape)
    n = u.grid.ndim
    for j, lam in enumerate(levels):
        if lam == 0:
            out[..., j] = u.values
        elif n == 1:
            out[..., j] = _poisson_1d(u.values, u.grid.coords(0), u.grid.spacings[0], lam)
        else:
            out[..., j] = _poisson_nd(u.values, u.grid.spacings, lam)
    return ScalarField(grid, out)


# ---------------------------------------------------------------------------
# Dirichlet problem

def solve_harmonic(grid: UniformGrid, mask: np.ndarray, fixed: np.ndarray,
                   values: np.ndarray, rtol: float = 1e-10, maxiter: int = 5000,
                   bcs=None) -> np.ndarray:
    """Discrete harmonic function on ``mask`` equal to ``values`` on ``fixed``."""
    free = mask & ~fixed
    A = EdgeOperator(grid, edge_weights(grid, mask))
    base = np.where(fixed, values, 0.0)
    rhs = -A.apply(base)[free]
    if not free.any():
        return base
    bcs = bcs or [("dirichlet", "dirichlet")] * grid.ndim
    P = SeparablePreconditioner(grid, free, bcs)
    size = int(free.sum())
    buf = np.zeros(grid.shape)

    def matvec(x):
        buf[...] = 0.0
        buf[free] = x
        return A.apply(buf)[free]

    def psolve(r):
        buf2 = np.zeros(grid.shape)
        buf2[free] = r
        return P.apply(buf2)[free]

    op = LinearOperator((size, size), matvec=matvec, dtype=float)
    prec = LinearOperator((size, size), matvec=psolve, dtype=float)
    history: list[float] = []
    bnorm = float(np.linalg.norm(rhs)) or 1.0

    def record(xk):
        history.append(float(np.linalg.norm(rhs - matvec(xk))) / bnorm)

    x0 = np.zeros(size)
    sol, info = cg(op, rhs, x0=x0, rtol=rtol, atol=0.0, maxiter=maxiter, M=prec, callback=record)
    if info != 0:
        raise DirichletSolveError(f"CG did not converge in {maxiter} iterations", history)
    out = base.copy()
    out[free] = sol
    bvals = values[fixed]
    inner = out[free]
    slack = 1e-9 * max(1.0, float(np.max(np.abs(bvals))))
    if inner.max() > bvals.max() + slack or inner.min() < bvals.min() - slack:
        warnings.warn("discrete maximum principle violated", RuntimeWarning, stacklevel=2)
    return out


def dirichlet_solve(domain: CylinderDomain, boundary: ScalarField, rtol: float = 1e-10,
                    maxiter: int = 5000) -> ScalarField:
    """Harmonic field in the cylinder matching ``boundary`` on bottom and lateral/top."""
    if boundary.grid != domain.grid:
        raise ValueError("boundary data must live on the domain grid")
    fixed = domain.mask & (domain.bottom | domain.plus)
    vals = solve_harmonic(domain.grid, domain.mask, fixed, boundary.values, rtol, maxiter)
    return ScalarField(domain.grid, np.where(domain.mask, vals, 0.0), domain.mask)


# ---------------------------------------------------------------------------
# comparison functions

def smoothstep5(t):
    t = np.clip(t, 0.0, 1.0)
    return t ** 3 * (10 - 15 * t + 6 * t * t)


@dataclass
class ComparisonData:
    eta: ScalarField
    g: ScalarField
    wbar: ScalarField
    grad_g_max: float


def cutoff(domain: CylinderDomain) -> ScalarField:
    """eta_R: 1 on B_{R-1}, 0 outside B_R, quintic in between."""
    base = domain.grid.drop_last()
    mesh = base.mesh()
    if domain.base_shape == "ball":
        r = np.sqrt(sum(m ** 2 for m in mesh))
    else:
        r = np.max(np.broadcast_arrays(*[np.abs(m) for m in mesh]), axis=0)
    eta = 1.0 - smoothstep5(r - (domain.R - 1.0))
    eta = np.broadcast_to(eta, base.shape).copy()
    return ScalarField(base, np.where(domain.mask[..., 0], eta, 0.0), domain.mask[..., 0])


def build_comparison(v: ScalarField, s: float, domain: CylinderDomain,
                     trace_range: Optional[tuple[float, float]] = None) -> ComparisonData:
    """g = s eta_R + (1 - eta_R) v(., 0) and its harmonic completion w_bar.

    ``trace_range`` is the closed range of the whole-space trace when known
    (e.g. (-1, 1) for a layer); by default the range on the domain is used.
    """
    if v.grid != domain.grid:
        raise ValueError("v must live on the domain grid")
    trace = v.values[..., 0][domain.mask[..., 0]]
    lo, hi = float(trace.min()), float(trace.max())
    if trace_range is not None:
        lo, hi = min(lo, trace_range[0]), max(hi, trace_range[1])
    tol = 1e-12 * max(1.0, abs(lo), abs(hi))
    if not (lo - tol <= s <= hi + tol):
        raise ValueError(f"s={s} outside the trace range [{lo}, {hi}]")
    eta = cutoff(domain)
    g_vals = s * eta.values + (1.0 - eta.values) * v.values[..., 0]
    g = ScalarField(eta.grid, np.where(eta.mask, g_vals, 0.0), eta.mask)
    bnd = v.values.copy()
    bnd[..., 0] = g_vals
    wbar = dirichlet_solve(domain, ScalarField(domain.grid, np.where(domain.mask, bnd, 0.0), domain.mask))
    grad_g = float(np.max(gradient_magnitude(g)[g.mask]))
    return ComparisonData(eta, g, wbar, grad_g)
