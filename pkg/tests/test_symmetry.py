import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from halflap import layers
from halflap.grid import CylinderDomain, ScalarField, UniformGrid, WedgeDomain
from halflap.nonlinearity import allen_cahn
from halflap.solver import SolveConfig, saddle_minimize
from halflap.symmetry import (UndefinedDirectionError, core_region, liouville_check,
                              one_d_direction, stability_witness)

E = (0.6, 0.8)


def tilted_box(h, half=2.0, e=E):
    d = CylinderDomain.from_bounds([(-half, half)] * 2, half, h)
    return d, d.field(layers.tilted(e))


def analytic_parts(d, e=E):
    """Closed-form partials of the tilted layer extension."""
    x, y, lam = d.grid.mesh()
    xi = e[0] * x + e[1] * y
    dxi, _ = layers.layer_gradient(xi, lam)
    dxi = np.broadcast_to(dxi, d.grid.shape)
    return [ScalarField(d.grid, e[k] * dxi) for k in range(2)]


def test_core_region_drops_the_collar():
    d, f = tilted_box(0.1)
    core = core_region(f)
    x, y, lam = d.grid.mesh()
    inside = np.broadcast_to((np.abs(x) <= 1.6 + 1e-9) & (np.abs(y) <= 1.6 + 1e-9) & (lam <= 1.6 + 1e-9),
                             d.grid.shape)
    assert np.array_equal(core, inside)


def test_witness_of_an_embedded_layer_is_positive():
    d, f = tilted_box(0.05)
    phi = stability_witness(f, 1)
    assert np.all(phi.values[core_region(f)] > 0)


def test_witness_of_a_constant_is_rejected():
    d = CylinderDomain.from_bounds([(-1.0, 1.0)] * 2, 1.0, 0.1)
    with pytest.raises(ValueError):
        stability_witness(d.field(lambda x, y, l: 0.5 + 0 * x), 0)


def test_witness_of_the_explicit_layer_peaks_at_the_interface():
    d = CylinderDomain.from_bounds([(-3.0, 3.0)], 3.0, 0.05)
    phi = stability_witness(d.field(layers.layer_extension), 0)
    x = d.grid.coords(0)
    assert x[np.argmax(phi.values[:, 0])] == pytest.approx(0.0, abs=1e-12)


def test_quotients_are_constant_with_closed_form_derivatives():
    d, f = tilted_box(0.02)
    parts = analytic_parts(d)
    r = liouville_check(f, parts[1], derivatives=parts)
    assert max(r.osc) <= 1e-6
    sig1 = r.sigma[0].values[r.sigma[0].mask]
    assert np.allclose(sig1, E[0] / E[1], atol=1e-12)
    assert r.deviation <= 1e-6 and r.one_dimensional
    assert np.allclose(r.direction, E, atol=1e-9)


@pytest.mark.parametrize("e", [(0.6, 0.8), (1.0, 1.0), (1.0, 2.0), (5.0, 12.0)])
def test_discrete_quotients_are_nearly_constant(e):
    h = 0.05
    d, f = tilted_box(h, e=e)
    axis = int(np.argmax(np.abs(e)))
    r = liouville_check(f, stability_witness(f, axis))
    assert max(r.osc) <= 10 * h


def test_bottom_flux_is_of_order_h():
    for h in (0.1, 0.05, 0.025):
        d, f = tilted_box(h)
        r = liouville_check(f, stability_witness(f, 1))
        # frozen from this run: flux / h <= 0.27
        assert max(r.bottom_flux) <= 0.3 * h


@given(st.floats(0.01, 100.0))
def test_relative_oscillation_ignores_witness_scale(c):
    d, f = tilted_box(0.1)
    phi = stability_witness(f, 1)
    a = liouville_check(f, phi)
    b = liouville_check(f, ScalarField(phi.grid, c * phi.values, phi.mask))
    for i in range(2):
        if a.mean_abs[i] > 0:
            assert b.osc[i] / b.mean_abs[i] == pytest.approx(a.osc[i] / a.mean_abs[i], rel=1e-9)


def test_growth_quotient_stays_bounded():
    d, f = tilted_box(0.25, half=16.0)
    r = liouville_check(f, stability_witness(f, 1), radii=(4.0, 8.0, 16.0))
    for i in range(2):
        vals = [r.growth[R][i] for R in (4.0, 8.0, 16.0)]
        assert all(np.isfinite(vals)) and vals[2] <= vals[0]


def test_radial_bump_is_not_one_dimensional():
    d = CylinderDomain.from_bounds([(-2.0, 2.0)] * 2, 2.0, 0.05)
    f = d.field(lambda x, y, l: np.exp(-(x * x + y * y) / (1 + l) ** 2) + 0 * l + 3 * x)
    r = liouville_check(f, stability_witness(f, 0))
    assert max(r.osc) > 10 * 0.05 and not r.one_dimensional
    bump = d.field(lambda x, y, l: np.exp(-(x * x + y * y) / (1 + l) ** 2))
    phi = ScalarField(d.grid, np.ones(d.grid.shape))
    r = liouville_check(bump, phi)
    assert not r.one_dimensional and r.deviation > 1.0


def test_direction_of_a_one_dimensional_trace():
    g = UniformGrid((-2.0, -2.0), (0.02, 0.02), (201, 201))
    x, y = g.mesh()
    u = ScalarField(g, np.broadcast_to(np.tanh(0.6 * x + 0.8 * y), g.shape).copy())
    a, dev = one_d_direction(u)
    assert np.allclose(a, E, atol=1e-6) and dev <= 1e-3


def test_direction_of_a_constant_is_undefined():
    g = UniformGrid((-1.0, -1.0), (0.1, 0.1), (21, 21))
    with pytest.raises(UndefinedDirectionError):
        one_d_direction(ScalarField(g, np.ones(g.shape)))


def test_saddle_trace_is_not_one_dimensional():
    w = WedgeDomain.build(1, 6.0, 3.0, 0.25)
    sol = saddle_minimize(w, allen_cahn(), SolveConfig())
    _, dev = one_d_direction(sol.reflected.level(0))
    assert dev > 1.0
