"""Matrix-free edge operators and a separable fast preconditioner."""

from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.fft
import scipy.linalg

from .grid import UniformGrid


class EdgeOperator:
    """Hessian of the quadratic form 1/2 sum_e w_e (dv_e / h_e)^2."""

    def __init__(self, grid: UniformGrid, weights: Sequence[np.ndarray]):
        self.grid = grid
        self.coef = [w / (h * h) for w, h in zip(weights, grid.spacings)]

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros_like(v)
        for k, c in enumerate(self.coef):
            flux = c * np.diff(v, axis=k)
            lo = [slice(None)] * v.ndim
            hi = [slice(None)] * v.ndim
            lo[k] = slice(0, -1)
            hi[k] = slice(1, None)
            out[tuple(lo)] -= flux
            out[tuple(hi)] += flux
        return out

    def quad(self, v: np.ndarray) -> float:
        """v^T A v."""
        return float(sum(np.sum(c * np.diff(v, axis=k) ** 2) for k, c in enumerate(self.coef)))

    def bilinear(self, v: np.ndarray, w: np.ndarray) -> float:
        return float(sum(np.sum(c * np.diff(v, axis=k) * np.diff(w, axis=k))
                         for k, c in enumerate(self.coef)))


class _Axis:
    def __init__(self, count: int, h: float, lo_bc: str, hi_bc: str, shift: float):
        first = 0 if lo_bc == "neumann" else 1
        last = count - 1 if hi_bc == "neumann" else count - 2
        self.sl = slice(first, last + 1)
        m = last - first + 1
        self.dst = (lo_bc == "dirichlet" and hi_bc == "dirichlet" and shift == 0.0)
        if self.dst:
            k = np.arange(1, m + 1)
            self.mu = (2.0 - 2.0 * np.cos(np.pi * k / (m + 1))) / (h * h)
            self.scale = 1.0 / np.sqrt(h)
            return
        K = np.zeros((m, m))
        M = np.full(m, h)
        idx = np.arange(m - 1)
        K[idx, idx + 1] = K[idx + 1, idx] = -1.0 / h
        K[np.arange(m), np.arange(m)] = 2.0 / h
        if lo_bc == "neumann":
            K[0, 0] = 1.0 / h
            M[0] = 0.5 * h
        if hi_bc == "neumann":
            K[-1, -1] = 1.0 / h
            M[-1] = 0.5 * h
        K[0, 0] += shift
        self.mu, self.phi = scipy.linalg.eigh(K, np.diag(M))

    def forward(self, a: np.ndarray, axis: int) -> np.ndarray:
        if self.dst:
            return self.scale * scipy.fft.dst(a, type=1, axis=axis, norm="ortho")
        return np.moveaxis(np.tensordot(self.phi.T, a, axes=([1], [axis])), 0, axis)

    def backward(self, a: np.ndarray, axis: int) -> np.ndarray:
        if self.dst:
            return self.scale * scipy.fft.dst(a, type=1, axis=axis, norm="ortho")
        return np.moveaxis(np.tensordot(self.phi, a, axes=([1], [axis])), 0, axis)


class SeparablePreconditioner:
    """Exact inverse of the box Laplacian sum_k (prod_{j!=k} M_j) (x) K_k.

    ``bcs`` gives ('dirichlet' | 'neumann') per axis end; Dirichlet end nodes
    are excluded. ``shift`` adds a boundary mass on the first node of the last
    axis (the linearised potential term on lambda = 0). Applied to masked
    problems it acts as the restriction of the enclosing-box inverse.
    """

    def __init__(self, grid: UniformGrid, free: np.ndarray,
                 bcs: Sequence[tuple[str, str]], shift: float = 0.0):
        self.free = free
        last = grid.ndim - 1
        self.axes = [_Axis(c, h, lo, hi, shift if k == last else 0.0)
                     for k, (c, h, (lo, hi)) in enumerate(zip(grid.counts, grid.spacings, bcs))]
        self.slices = tuple(ax.sl for ax in self.axes)
        total = 0.0
        for k, ax in enumerate(self.axes):
            shape = [1] * grid.ndim
            shape[k] = ax.mu.size
            total = total + ax.mu.reshape(shape)
        self.inv = 1.0 / np.maximum(total, 1e-300)

    def apply(self, g: np.ndarray) -> np.ndarray:
        sub = np.where(self.free, g, 0.0)[self.slices]
        for k, ax in enumerate(self.axes):
            sub = ax.forward(sub, k)
        sub *= self.inv
        for k, ax in enumerate(self.axes):
            sub = ax.backward(sub, k)
        out = np.zeros_like(g)
        out[self.slices] = sub
        out[~self.free] = 0.0
        return out
