"""Uniform tensor grids, masked domains and discrete calculus.

The last grid axis is always the extension variable lambda (height above the
boundary hyperplane); the leading axes are the base variables x_1..x_n.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

Density = Callable[..., np.ndarray]

_TOL = 1e-9


class EmptyRegionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class UniformGrid:
    origins: tuple[float, ...]
    spacings: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "origins", tuple(float(o) for o in self.origins))
        object.__setattr__(self, "spacings", tuple(float(h) for h in self.spacings))
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if not (len(self.origins) == len(self.spacings) == len(self.counts)):
            raise ValueError("origins, spacings and counts must have equal length")
        if not 1 <= self.ndim <= 4:
            raise ValueError(f"unsupported grid dimension {self.ndim}")
        if any(h <= 0 for h in self.spacings):
            raise ValueError("grid spacings must be strictly positive")
        if any(c < 2 for c in self.counts):
            raise ValueError("every grid axis needs at least 2 points")

    @property
    def ndim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    def coords(self, axis: int) -> np.ndarray:
        return self.origins[axis] + np.arange(self.counts[axis]) * self.spacings[axis]

    def mesh(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays (open mesh)."""
        out = []
        for k in range(self.ndim):
            shape = [1] * self.ndim
            shape[k] = self.counts[k]
            out.append(self.coords(k).reshape(shape))
        return out

    def full_mesh(self) -> list[np.ndarray]:
        return [np.broadcast_to(c, self.shape) for c in self.mesh()]

    def upper(self, axis: int) -> float:
        return self.origins[axis] + (self.counts[axis] - 1) * self.spacings[axis]

    def drop_last(self) -> "UniformGrid":
        """Grid of the boundary hyperplane lambda = 0."""
        return UniformGrid(self.origins[:-1], self.spacings[:-1], self.counts[:-1])

    def with_levels(self, levels: np.ndarray) -> "UniformGrid":
        levels = np.asarray(levels, dtype=float)
        if levels.size < 2:
            raise ValueError("need at least two lambda levels")
        dl = np.diff(levels)
        if not np.allclose(dl, dl[0], rtol=1e-9, atol=0):
            raise ValueError("lambda levels must be uniformly spaced")
        return UniformGrid(self.origins + (levels[0],), self.spacings + (dl[0],),
                           self.counts + (levels.size,))


def axis_count(lo: float, hi: float, h: float) -> int:
    steps = (hi - lo) / h
    k = int(round(steps))
    if abs(steps - k) > 1e-6 * max(1.0, steps):
        raise ValueError(f"interval [{lo}, {hi}] is not a multiple of h={h}")
    return k + 1


@dataclass
class ScalarField:
    grid: UniformGrid
    values: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid {self.grid.shape}")
        if self.mask is None:
            self.mask = np.ones(self.grid.shape, dtype=bool)
        else:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.grid.shape:
                raise ValueError("mask shape does not match grid")
        if not np.all(np.isfinite(self.values[self.mask])):
            raise ValueError("field has non-finite values inside its mask")

    def _other(self, other):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values, other.mask
        return other, None

    def _combine(self, other, op):
        vals, mask = self._other(other)
        new_mask = self.mask if mask is None else (self.mask & mask)
        return ScalarField(self.grid, np.where(new_mask, op(self.values, vals), 0.0), new_mask)

    def __add__(self, other):
        return self._combine(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values, self.mask.copy())

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy(), self.mask.copy())

    def level(self, j: int = 0) -> "ScalarField":
        """Restriction to the lambda level with index j (a field one dimension down)."""
        return ScalarField(self.grid.drop_last(), self.values[..., j].copy(), self.mask[..., j].copy())

    @classmethod
    def from_function(cls, grid: UniformGrid, fn, mask=None) -> "ScalarField":
        vals = np.broadcast_to(fn(*grid.mesh()), grid.shape).astype(float)
        if mask is not None:
            vals = np.where(mask, vals, 0.0)
        return cls(grid, vals, mask)


# ---------------------------------------------------------------------------
# shifting helpers

def shift(a: np.ndarray, axis: int, k: int, fill=0) -> np.ndarray:
    """out[i] = a[i + k] along axis, ``fill`` where i + k is outside."""
    out = np.full_like(a, fill)
    n = a.shape[axis]
    if abs(k) >= n:
        return out
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if k >= 0:
        src[axis] = slice(k, n)
        dst[axis] = slice(0, n - k)
    else:
        src[axis] = slice(0, n + k)
        dst[axis] = slice(-k, n)
    out[tuple(dst)] = a[tuple(src)]
    return out


def dual_widths(mask: np.ndarray, spacings: Sequence[float]) -> list[np.ndarray]:
    """Per-axis trapezoid widths: h/2 for each neighbour inside the mask."""
    widths = []
    for k, h in enumerate(spacings):
        nb = shift(mask, k, -1, False).astype(float) + shift(mask, k, 1, False).astype(float)
        widths.append(np.where(mask, 0.5 * h * nb, 0.0))
    return widths


def point_weights(mask: np.ndarray, spacings: Sequence[float]) -> np.ndarray:
    w = np.where(mask, 1.0, 0.0)
    for dw in dual_widths(mask, spacings):
        w = w * dw
    return w


def _midpoint_mesh(grid: UniformGrid, axis: int) -> list[np.ndarray]:
    mesh = grid.mesh()
    c = mesh[axis]
    sl = [slice(None)] * grid.ndim
    sl[axis] = slice(0, -1)
    mesh[axis] = c[tuple(sl)] + 0.5 * grid.spacings[axis]
    return mesh


def edge_weights(grid: UniformGrid, mask: np.ndarray,
                 density: Optional[Density] = None) -> list[np.ndarray]:
    """Quadrature volume attached to each grid edge, one array per axis.

    Array k has the grid shape with axis k shortened by one; entry i is the
    edge between nodes i and i + e_k, nonzero only when both lie in ``mask``.
    The transverse dual area is the mean of the two endpoint trapezoid widths,
    so the edge energy reproduces the trapezoid rule on boxes.
    """
    widths = dual_widths(mask, grid.spacings)
    out = []
    for k, h in enumerate(grid.spacings):
        lo = [slice(None)] * grid.ndim
        hi = [slice(None)] * grid.ndim
        lo[k] = slice(0, -1)
        hi[k] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        w = np.where(mask[lo] & mask[hi], h, 0.0)
        for j, dw in enumerate(widths):
            if j != k:
                w = w * 0.5 * (dw[lo] + dw[hi])
        if density is not None:
            w = w * np.broadcast_to(density(*_midpoint_mesh(grid, k)), w.shape)
        out.append(w)
    return out


def bottom_weights(grid: UniformGrid, mask: np.ndarray,
                   density: Optional[Density] = None) -> np.ndarray:
    """Trapezoid weights of the lambda = 0 layer of ``mask`` (base-shaped array).

    A density is averaged over the four quarter-cell offsets of each node so
    that a density vanishing on a coordinate axis does not zero the node.
    """
    base = grid.drop_last()
    w = point_weights(mask[..., 0], base.spacings)
    if density is not None:
        mesh = base.mesh()
        acc = np.zeros(base.shape)
        offsets = [(-0.25, 0.25)] * base.ndim
        combos = np.array(np.meshgrid(*offsets, indexing="ij")).reshape(base.ndim, -1).T
        for combo in combos:
            pts = [np.maximum(mesh[k] + combo[k] * base.spacings[k], 0.0) for k in range(base.ndim)]
            acc = acc + np.broadcast_to(density(*pts), base.shape)
        w = w * acc / len(combos)
    return w


def dirichlet_energy(values: np.ndarray, grid: UniformGrid, mask: np.ndarray,
                     density: Optional[Density] = None, weights=None) -> float:
    """Edge quadrature of (1/2) * integral of |grad v|^2 over the masked region."""
    if weights is None:
        weights = edge_weights(grid, mask, density)
    total = 0.0
    for k, (w, h) in enumerate(zip(weights, grid.spacings)):
        d = np.diff(values, axis=k) / h
        total += float(np.sum(w * d * d))
    return 0.5 * total


# ---------------------------------------------------------------------------
# discrete calculus

def _partial(v: np.ndarray, mask: np.ndarray, axis: int, h: float) -> np.ndarray:
    m1, p1 = shift(mask, axis, -1, False), shift(mask, axis, 1, False)
    m2, p2 = shift(mask, axis, -2, False), shift(mask, axis, 2, False)
    f_m1, f_p1 = shift(v, axis, -1), shift(v, axis, 1)
    f_m2, f_p2 = shift(v, axis, -2), shift(v, axis, 2)
    d = np.zeros_like(v)
    todo = mask.copy()

    sel = todo & m1 & p1
    d[sel] = (f_p1[sel] - f_m1[sel]) / (2 * h)
    todo &= ~sel
    sel = todo & p1 & p2
    d[sel] = (-3 * v[sel] + 4 * f_p1[sel] - f_p2[sel]) / (2 * h)
    todo &= ~sel
    sel = todo & m1 & m2
    d[sel] = (3 * v[sel] - 4 * f_m1[sel] + f_m2[sel]) / (2 * h)
    todo &= ~sel
    sel = todo & p1
    d[sel] = (f_p1[sel] - v[sel]) / h
    todo &= ~sel
    sel = todo & m1
    d[sel] = (v[sel] - f_m1[sel]) / h
    return d


def gradient(field: ScalarField) -> list[ScalarField]:
    """Central differences inside, one-sided second order at mask edges."""
    g = field.grid
    if any(c < 2 for c in g.counts):
        raise ValueError("degenerate axis")
    vals = np.where(field.mask, field.values, 0.0)
    return [ScalarField(g, _partial(vals, field.mask, k, h), field.mask.copy())
            for k, h in enumerate(g.spacings)]


def gradient_magnitude(field: ScalarField) -> np.ndarray:
    comps = gradient(field)
    return np.sqrt(sum(c.values ** 2 for c in comps))


def stencil_interior(mask: np.ndarray) -> np.ndarray:
    inner = mask.copy()
    for k in range(mask.ndim):
        inner &= shift(mask, k, -1, False) & shift(mask, k, 1, False)
    return inner


def laplacian_residual(field: ScalarField, interior: Optional[np.ndarray] = None) -> ScalarField:
    """(2d+1)-point Laplacian at interior points, zero elsewhere."""
    inner = stencil_interior(field.mask)
    if interior is not None:
        inner &= interior
    v = np.where(field.mask, field.values, 0.0)
    lap = np.zeros_like(v)
    for k, h in enumerate(field.grid.spacings):
        lap += (shift(v, k, 1) - 2 * v + shift(v, k, -1)) / (h * h)
    return ScalarField(field.grid, np.where(inner, lap, 0.0), field.mask.copy())


def integrate(field: ScalarField, region: Optional[np.ndarray] = None,
              weight=None) -> float:
    """Trapezoid-type quadrature over a masked region.

    ``weight`` may be a ScalarField, an array, or a density callable of the
    grid coordinates.
    """
    region = field.mask if region is None else np.asarray(region, dtype=bool)
    if np.any(region & ~field.mask):
        raise ValueError("integration region leaves the field mask")
    if not region.any():
        warnings.warn("empty integration region", EmptyRegionWarning, stacklevel=2)
        return 0.0
    w = point_weights(region, field.grid.spacings)
    if weight is not None:
        if isinstance(weight, ScalarField):
            w = w * weight.values
        elif callable(weight):
            w = w * np.broadcast_to(weight(*field.grid.mesh()), w.shape)
        else:
            w = w * np.asarray(weight)
    return float(np.sum(np.where(region, field.values * w, 0.0)))


# ---------------------------------------------------------------------------
# domains

def _base_boundary(base_in: np.ndarray) -> np.ndarray:
    """Nodes of a base mask with a base-axis neighbour outside it (or the grid)."""
    edge = np.zeros_like(base_in)
    for k in range(base_in.ndim):
        edge |= ~shift(base_in, k, -1, False) | ~shift(base_in, k, 1, False)
    return base_in & edge


@dataclass
class CylinderDomain:
    """Discretisation of C_R = B_R x (0, height) (or a box slab).

    ``bottom`` is the full lambda = 0 layer of the base, ``plus`` the lateral
    and top boundary (lambda > 0). ``rim`` is the part of ``bottom`` lying on
    the lateral boundary; the solvers pin it together with ``plus``.
    """

    n: int
    R: float
    height: float
    base_shape: str
    grid: UniformGrid
    mask: np.ndarray
    interior: np.ndarray
    bottom: np.ndarray
    plus: np.ndarray
    rim: np.ndarray
    bounds: tuple = field(default=())

    @classmethod
    def build(cls, n: int, R: float, h: float, height: Optional[float] = None,
              base_shape: str = "box") -> "CylinderDomain":
        height = R if height is None else height
        bounds = tuple((-R, R) for _ in range(n))
        return cls._make(n, R, height, base_shape, bounds, h)

    @classmethod
    def from_bounds(cls, bounds: Sequence[tuple[float, float]], height: float,
                    h: float) -> "CylinderDomain":
        """Box slab prod_i [lo_i, hi_i] x [0, height]; R is the largest half-width."""
        bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        R = max(0.5 * (hi - lo) for lo, hi in bounds)
        return cls._make(len(bounds), R, height, "box", bounds, h)

    @classmethod
    def _make(cls, n, R, height, base_shape, bounds, h):
        if n < 1 or n > 3:
            raise ValueError("base dimension must be 1, 2 or 3")
        if base_shape not in ("box", "ball"):
            raise ValueError(f"unknown base shape {base_shape!r}")
        counts = [axis_count(lo, hi, h) for lo, hi in bounds] + [axis_count(0.0, height, h)]
        grid = UniformGrid([lo for lo, _ in bounds] + [0.0], [h] * (n + 1), counts)
        base_grid = grid.drop_last()
        if base_shape == "ball":
            r2 = sum(c ** 2 for c in base_grid.mesh())
            base_in = np.broadcast_to(r2 <= R * R * (1 + _TOL), base_grid.shape).copy()
        else:
            base_in = np.ones(base_grid.shape, dtype=bool)
        base_edge = _base_boundary(base_in)
        nl = counts[-1]
        lam_idx = np.arange(nl).reshape((1,) * n + (nl,))
        mask = np.broadcast_to(base_in[..., None], grid.shape).copy()
        bottom = mask & (lam_idx == 0)
        lateral = mask & base_edge[..., None] & (lam_idx > 0)
        top = mask & (lam_idx == nl - 1)
        plus = lateral | top
        rim = bottom & base_edge[..., None]
        interior = mask & ~bottom & ~plus
        return cls(n, float(R), float(height), base_shape, grid, mask, interior,
                   bottom, plus, rim, tuple(bounds))

    @property
    def h(self) -> float:
        return self.grid.spacings[0]

    @property
    def free(self) -> np.ndarray:
        """Unknowns of the Neumann problem: interior plus bottom minus rim."""
        return self.interior | (self.bottom & ~self.rim)

    @property
    def fixed(self) -> np.ndarray:
        return self.mask & ~self.free

    def region(self, r: float, center: Optional[Sequence[float]] = None) -> np.ndarray:
        """Mask of the sub-cylinder B_r(center) x [0, r] in this grid."""
        center = [0.0] * self.n if center is None else list(center)
        mesh = self.grid.mesh()
        tol = _TOL * self.h + 1e-12
        if self.base_shape == "ball":
            r2 = sum((mesh[k] - center[k]) ** 2 for k in range(self.n))
            base = r2 <= r * r + tol
        else:
            base = np.ones((1,) * (self.n + 1), dtype=bool)
            for k in range(self.n):
                base = base & (np.abs(mesh[k] - center[k]) <= r + tol)
        reg = base & (mesh[-1] <= r + tol)
        return np.broadcast_to(reg, self.grid.shape) & self.mask

    def field(self, fn) -> ScalarField:
        return ScalarField.from_function(self.grid, fn, self.mask)

    density = None
    measure_factor = 1.0


@dataclass
class WedgeDomain:
    """Discretisation of {0 <= t <= s, s^2 + t^2 < R^2} x (0, L) in (s, t, lambda).

    Nodes on the diagonal s = t, on the staircase arc and on the top are
    pinned (``plus``); the axis t = 0 carries the natural condition.
    """

    m: int
    R: float
    L: float
    grid: UniformGrid
    mask: np.ndarray
    bottom: np.ndarray
    plus: np.ndarray
    diagonal: np.ndarray
    arc: np.ndarray

    @classmethod
    def build(cls, m: int, R: float, L: float, h: float) -> "WedgeDomain":
        if m < 1:
            raise ValueError("m must be >= 1")
        ns = axis_count(0.0, R, h)
        nl = axis_count(0.0, L, h)
        grid = UniformGrid((0.0, 0.0, 0.0), (h, h, h), (ns, ns, nl))
        s, t, lam = grid.mesh()
        i = np.arange(ns).reshape(ns, 1)
        j = np.arange(ns).reshape(1, ns)
        disk = (s ** 2 + t ** 2 <= R * R * (1 + _TOL))[..., 0]
        # reflections across s = 0 / t = 0 stay inside the disk
        out_s = ~shift(disk, 0, 1, False)
        out_t = ~shift(disk, 1, 1, False)
        arc2 = disk & (out_s | out_t)
        wedge2 = disk & (j <= i)
        diag2 = wedge2 & (i == j)
        lam_idx = np.arange(nl).reshape(1, 1, nl)
        mask = np.broadcast_to(wedge2[..., None], grid.shape).copy()
        diagonal = mask & diag2[..., None]
        arc = mask & arc2[..., None]
        top = mask & (lam_idx == nl - 1)
        bottom = mask & (lam_idx == 0)
        plus = diagonal | arc | top
        return cls(m, float(R), float(L), grid, mask, bottom, plus, diagonal, arc)

    @property
    def h(self) -> float:
        return self.grid.spacings[0]

    @property
    def free(self) -> np.ndarray:
        return self.mask & ~self.plus

    @property
    def fixed(self) -> np.ndarray:
        return self.plus

    @property
    def n(self) -> int:
        return 2 * self.m

    def density(self, s, t, *rest):
        """s^(m-1) t^(m-1); identically one for m = 1."""
        if self.m == 1:
            return np.ones(np.broadcast(s, t).shape)
        return (s * t) ** (self.m - 1)

    @property
    def measure_factor(self) -> float:
        """|S^{m-1}|^2: converts (s, t) integrals into integrals over R^{2m}."""
        sphere = 2 * math.pi ** (self.m / 2) / math.gamma(self.m / 2)
        return sphere ** 2

    def weight_field(self) -> ScalarField:
        s, t, lam = self.grid.mesh()
        return ScalarField(self.grid, np.broadcast_to(self.density(s, t), self.grid.shape).copy(),
                           self.mask)

    def region(self, r: float) -> np.ndarray:
        s, t, lam = self.grid.mesh()
        tol = _TOL * self.h + 1e-12
        reg = (s ** 2 + t ** 2 <= r * r + tol) & (lam <= r + tol)
        return np.broadcast_to(reg, self.grid.shape) & self.mask
