import math
import warnings

import numpy as np
import pytest

from halflap import layers
from halflap.grid import CylinderDomain, ScalarField, WedgeDomain
from halflap.nonlinearity import allen_cahn, polynomial, sine
from halflap.solver import (DiscreteEnergy, IterationLimitError, SolveConfig, SolverError,
                            check_monotone, gradient_check, limit_profiles, minimize_cylinder,
                            perturbation_check, reflect_odd, saddle_minimize,
                            slide_energy_profile)


@pytest.fixture(scope="module")
def layer_solution():
    d = CylinderDomain.build(1, 8.0, 0.05)
    return d, minimize_cylinder(d, sine(), layers.layer_extension, SolveConfig(init="data"))


def test_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(residual_tol=0)
    with pytest.raises(ValueError):
        SolveConfig(armijo_c=1.5)
    with pytest.raises(ValueError):
        SolveConfig(init="random")
    with pytest.raises(ValueError):
        SolveConfig(lower=1.0, upper=0.0)


@pytest.mark.parametrize("init", [0.5, 0.8, 1.5])
def test_well_data_gives_the_well(init):
    d = CylinderDomain.build(1, 3.0, 0.1)
    sol = minimize_cylinder(d, allen_cahn(), 1.0, SolveConfig(residual_tol=1e-10), init=init)
    assert sol.converged
    assert np.allclose(sol.field.values[d.mask], 1.0, atol=1e-8)
    assert abs(sol.energy) < 1e-12


def test_layer_minimiser_satisfies_the_neumann_condition(layer_solution):
    d, sol = layer_solution
    assert sol.converged
    assert np.max(np.abs(sol.model.neumann_defect(sol.field.values))) <= 5 * 0.05
    assert sol.residuals.max <= SolveConfig().residual_tol


def test_layer_minimiser_is_close_to_the_explicit_layer(layer_solution):
    d, sol = layer_solution
    exact = d.field(layers.layer_extension).values
    assert np.max(np.abs(sol.field.values - exact)[d.mask]) < 0.02


def test_energy_history_never_increases(layer_solution):
    _, sol = layer_solution
    h = np.asarray(sol.energy_history)
    assert np.all(np.diff(h) <= 1e-12 * np.abs(h[:-1]).max())


def test_analytic_gradient_matches_finite_differences(layer_solution):
    _, sol = layer_solution
    rng = np.random.default_rng(2)
    v = sol.field.values + np.where(sol.model.free, 0.1 * rng.standard_normal(sol.field.values.shape), 0)
    assert gradient_check(sol.model, v, directions=20) <= 1e-5


def test_gradient_check_with_density():
    w = WedgeDomain.build(2, 3.0, 2.0, 0.25)
    model = DiscreteEnergy(w.grid, w.mask, w.free, allen_cahn(), density=w.density)
    rng = np.random.default_rng(4)
    v = np.where(w.free, rng.uniform(0, 1, w.grid.shape), 0.0)
    assert gradient_check(model, v, directions=20) <= 1e-5


def test_minimiser_survives_random_bumps(layer_solution):
    _, sol = layer_solution
    dE = perturbation_check(sol, count=50)
    assert np.all(dE >= -SolveConfig().residual_tol)


def test_box_bounds_hold_at_every_iterate():
    d = CylinderDomain.build(1, 4.0, 0.1)
    lo = d.field(lambda x, l: layers.layer_extension(x + 1.0, l)).values
    hi = d.field(lambda x, l: layers.layer_extension(x - 1.0, l)).values
    lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
    seen = []

    def cb(it, v):
        free = d.free
        seen.append(bool(np.all(v[free] >= lo[free]) and np.all(v[free] <= hi[free])))

    sol = minimize_cylinder(d, sine(), layers.layer_extension,
                            SolveConfig(lower=lo, upper=hi), init=0.0, callback=cb)
    assert sol.converged and seen and all(seen)


def test_comparison_principle_on_random_monotone_pairs():
    d = CylinderDomain.build(1, 4.0, 0.1)
    rng = np.random.default_rng(5)
    for _ in range(5):
        a, b = sorted(rng.uniform(-1.5, 1.5, 2))
        amp = rng.uniform(0.6, 1.0)
        hi_data = lambda x, l, a=a: amp * layers.layer_extension(x - a, l)  # noqa: E731
        lo_data = lambda x, l, b=b: amp * layers.layer_extension(x - b, l)  # noqa: E731
        cfg = SolveConfig(init="tanh")
        A = minimize_cylinder(d, sine(), hi_data, cfg)
        B = minimize_cylinder(d, sine(), lo_data, cfg)
        assert A.converged and B.converged
        assert np.all(A.field.values[d.mask] >= B.field.values[d.mask] - 1e-6)


def test_iteration_cap_is_reported_with_last_iterate():
    d = CylinderDomain.build(1, 4.0, 0.1)
    with pytest.raises(IterationLimitError) as info:
        minimize_cylinder(d, sine(), layers.layer_extension, SolveConfig(max_iter=2), init=0.0)
    exc = info.value
    assert isinstance(exc, SolverError) and exc.solution is not None
    assert np.all(np.isfinite(exc.solution.field.values))


def test_limit_profiles_of_the_layer():
    d = CylinderDomain.from_bounds([(-20.0, 20.0)], 4.0, 0.05)
    lp = limit_profiles(d.field(layers.layer_extension))
    assert lp.M == pytest.approx(1.0, abs=0.02) and lp.m == pytest.approx(-1.0, abs=0.02)
    assert lp.m <= lp.m_tilde <= lp.M_tilde <= lp.M


def test_limit_profiles_of_a_constant():
    d = CylinderDomain.build(1, 2.0, 0.1)
    lp = limit_profiles(d.field(lambda x, l: 0.4 + 0 * x))
    assert lp.m == lp.m_tilde == lp.M_tilde == lp.M == pytest.approx(0.4)


def test_limit_profiles_reject_non_monotone_input():
    d = CylinderDomain.build(1, 2.0, 0.1)
    with pytest.raises(ValueError):
        limit_profiles(d.field(lambda x, l: np.sin(3 * x) + 0 * l))


def test_slide_profile_at_zero_is_the_energy():
    from halflap.energy import cylinder_region, energy_breakdown
    d = CylinderDomain.from_bounds([(-6.0, 10.0)], 4.0, 0.1)
    fld = d.field(layers.layer_extension)
    prof = slide_energy_profile(fld, sine(), 4.0, [0.0, 2.0])
    direct = energy_breakdown(fld, sine(), 0.0, region=cylinder_region(fld, 4.0)).total
    assert prof[0] == (0.0, pytest.approx(direct, rel=1e-14))
    assert prof[1][1] < prof[0][1]


def test_slide_profile_drops_escaping_windows():
    d = CylinderDomain.from_bounds([(-6.0, 10.0)], 4.0, 0.1)
    with pytest.warns(RuntimeWarning):
        prof = slide_energy_profile(d.field(layers.layer_extension), sine(), 4.0, [0.0, 6.0, 8.0])
    assert [t for t, _ in prof] == [0.0, 6.0]


def test_slide_profile_of_allen_cahn_is_nonnegative():
    d = CylinderDomain.from_bounds([(-6.0, 10.0)], 4.0, 0.1)
    fld = d.field(lambda x, l: np.tanh(x / (1 + l)))
    prof = slide_energy_profile(fld, allen_cahn(), 4.0, np.arange(0, 7, 1.0))
    assert all(np.isfinite(e) and e >= 0 for _, e in prof)


def test_check_monotone():
    d = CylinderDomain.build(1, 2.0, 0.1)
    assert check_monotone(d.field(layers.layer_extension), 0) == 0.0
    assert check_monotone(d.field(lambda x, l: -x + 0 * l), 0) == 1.0


def test_odd_reflection_is_exact():
    w = WedgeDomain.build(1, 2.0, 1.0, 0.25)
    rng = np.random.default_rng(0)
    vals = np.where(w.free, rng.random(w.grid.shape), 0.0)
    u = reflect_odd(ScalarField(w.grid, vals, w.mask), w).values
    assert np.array_equal(u, -np.swapaxes(u, 0, 1))
    s, t, _ = w.grid.mesh()
    assert np.all(u[np.broadcast_to(s == t, w.grid.shape)] == 0)


def test_small_wedge_saddle_is_odd_and_nonnegative():
    w = WedgeDomain.build(1, 6.0, 3.0, 0.25)
    sol = saddle_minimize(w, allen_cahn())
    assert sol.converged and not sol.trivial
    assert np.all(sol.field.values[w.mask] >= 0)
    u = sol.reflected.values
    assert np.array_equal(u, -np.swapaxes(u, 0, 1))
    assert np.max(np.abs(u)) < 1


def test_tiny_wedge_is_flagged_trivial():
    w = WedgeDomain.build(1, 1.0, 0.5, 0.25)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sol = saddle_minimize(w, allen_cahn())
    assert sol.trivial


def test_saddle_warns_on_non_bistable_reaction():
    w = WedgeDomain.build(1, 2.0, 1.0, 0.25)
    with pytest.warns(RuntimeWarning):
        saddle_minimize(w, polynomial([0.0, 1.0]), SolveConfig(max_iter=50))
