#!/usr/bin/env python
# type: ignore

"""Tests for the explicit solution and its building blocks."""

import math

import numpy as np
import pytest
from scipy import special

from fieldroad.cubic import ModelParams, classify_regime
from fieldroad.exceptions import DomainError
from fieldroad.fd_solver import SimConfig, simulate
from fieldroad.kernels import HalfSpacePoint, QuadratureConfig
from fieldroad.semi_analytic import (
    DataSpec,
    InitialData,
    TraceCache,
    evaluate_probes,
    graded_time_mesh,
    refined_quadrature,
    solve_U,
    solve_u_many,
    solve_V,
    solve_V_many,
    solve_v,
    solve_v_many,
    solve_with_estimate,
)

SMALL_QUAD = QuadratureConfig(panels=8, nodes_per_panel=8, time_nodes=8)


def make_params(mu=1.0, D=2.0, nu=1.0):
    return ModelParams(d=1.0, D=D, mu=mu, nu=nu)


def erf_window(p, lo, hi, scale):
    return 0.5 * (special.erf((p - lo) / scale) - special.erf((p - hi) / scale))


def test_zero_data_gives_zero(simple_params):
    params, regime = simple_params
    data = InitialData.from_boxes()
    assert solve_V(1.0, HalfSpacePoint(x=0.0, y=0.5), data, params) == 0.0
    assert solve_U(1.0, 0.0, data, params) == 0.0
    assert solve_v(1.0, HalfSpacePoint(x=0.0, y=0.5), data, params, regime, SMALL_QUAD) == 0.0
    assert solve_u_many(1.0, [0.0, 1.0], data, params, regime, SMALL_QUAD, cache=None).tolist() == [0.0, 0.0]


def test_free_road_flow_of_an_interval():
    params = make_params(D=2.0)
    data = InitialData.from_boxes([], [{"x": [-1.0, 1.0]}], 0.5)
    t = 0.7
    scale = 2 * math.sqrt(params.D * t)
    for x in (-3.0, -0.4, 0.0, 1.0, 2.2):
        assert solve_U(t, x, data, params) == pytest.approx(erf_window(x, -1.0, 1.0, scale), abs=1e-10)


def test_narrow_bump_is_the_heat_kernel():
    params = make_params(D=1.0)
    width = 1e-3
    data = InitialData.from_boxes([], [{"x": [-width, width], "height": 1 / (2 * width)}], width)
    assert solve_U(1.0, 0.0, data, params) == pytest.approx(1 / math.sqrt(4 * math.pi), rel=1e-6)


def test_field_flow_in_the_neumann_limit():
    params = make_params(nu=1e-9)
    data = InitialData.from_boxes([{"x": [-1.0, 1.0], "y": [0.5, 1.5]}], [], 0.5)
    t = 0.8
    scale = 2 * math.sqrt(params.d * t)
    for x, y in [(0.0, 0.0), (0.5, 1.0), (-2.0, 0.3), (1.5, 3.0)]:
        across = erf_window(y, 0.5, 1.5, scale) + erf_window(-y, 0.5, 1.5, scale)
        expected = erf_window(x, -1.0, 1.0, scale) * across
        assert solve_V(t, HalfSpacePoint(x=x, y=y), data, params) == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize("t", [0.5, 3.0])
def test_field_flow_satisfies_the_robin_condition(t):
    params = make_params(nu=1.0)
    data = InitialData.from_boxes([{"x": [-1.0, 1.0], "y": [0.2, 1.2]}], [], 0.5)
    h = 1e-4
    xs = np.array([-1.5, 0.0, 0.7])
    v0, v1, v2 = (solve_V_many(t, xs, k * h, data, params) for k in range(3))
    slope = (-3 * v0 + 4 * v1 - v2) / (2 * h)
    scale = np.max(np.abs(v0))
    assert np.max(np.abs(params.nu * v0 - params.d * slope)) <= 1e-5 * scale


def test_field_flow_is_nonnegative():
    params = make_params()
    data = InitialData.from_boxes([{"x": [-1.0, 2.0], "y": [0.0, 1.0], "height": 2.0}], [], 0.25)
    xs = np.linspace(-6.0, 6.0, 25)
    for y in (0.0, 0.5, 2.0, 6.0):
        assert np.all(solve_V_many(2.0, xs, y, data, params) >= 0)


@pytest.mark.parametrize("t", [0.01, 1.0, 50.0])
def test_graded_time_mesh(t):
    s, w = graded_time_mesh(t, 64)
    assert w.sum() == pytest.approx(t, rel=1e-14)
    assert np.all(np.diff(s) > 0)
    assert 0 < s[0] and s[-1] < t
    assert w @ np.sqrt(s) == pytest.approx(2 / 3 * t**1.5, rel=1e-10)
    assert w @ (1 / np.sqrt(s)) == pytest.approx(2 * math.sqrt(t), rel=1e-10)
    assert w @ np.sqrt(t - s) == pytest.approx(2 / 3 * t**1.5, rel=1e-10)


def test_graded_time_mesh_rejects_nonpositive_time():
    with pytest.raises(DomainError):
        graded_time_mesh(0.0, 8)


def test_road_solution_reuses_trace_spectra(simple_params):
    params, regime = simple_params
    data = InitialData.from_boxes([{"x": [-1.0, 1.0], "y": [0.0, 1.0]}], [{"x": [-1.0, 1.0]}], 0.5)
    cache = TraceCache()
    first = solve_u_many(1.0, [0.0, 0.5], data, params, regime, SMALL_QUAD, cache)
    assert (cache.hits, cache.misses) == (0, 8)
    assert len(cache) == 8
    second = solve_u_many(1.0, [0.0, 0.5], data, params, regime, SMALL_QUAD, cache)
    assert (cache.hits, cache.misses) == (8, 8)
    np.testing.assert_array_equal(first, second)
    uncached = solve_u_many(1.0, [0.0, 0.5], data, params, regime, SMALL_QUAD, cache=None)
    np.testing.assert_array_equal(first, uncached)


def test_empty_cache_is_filled(simple_params):
    params, regime = simple_params
    data = InitialData.from_boxes([{"x": [-1.0, 1.0], "y": [0.0, 1.0]}], [], 0.5)
    cache = TraceCache()
    assert not cache
    solve_u_many(2.0, [0.0], data, params, regime, SMALL_QUAD, cache)
    assert len(cache) == 8
    assert cache.misses == 8


def test_mesh_refinement_stays_within_the_estimate(simple_params):
    params, regime = simple_params
    data = InitialData.from_boxes([{"x": [-1.0, 1.0], "y": [0.0, 1.0]}], [{"x": [-0.5, 0.5]}], 0.5)
    xs = [-1.0, 0.0, 2.0]
    estimate = solve_with_estimate(1.0, xs, 0.3, data, params, regime, SMALL_QUAD, cache=None)
    finer = refined_quadrature(refined_quadrature(SMALL_QUAD))
    assert (finer.panels, finer.time_nodes) == (32, 32)

    v = solve_v_many(1.0, xs, 0.3, data, params, regime, finer)
    u = solve_u_many(1.0, xs, data, params, regime, finer, cache=None)
    assert np.max(np.abs(v - estimate.v)) <= estimate.v_error + 1e-12
    assert np.max(np.abs(u - estimate.u)) <= estimate.u_error + 1e-12


def test_process_cache_is_used_by_default(simple_params, clear_trace_cache):
    params, regime = simple_params
    data = InitialData.from_boxes([], [{"x": [-1.0, 1.0]}], 0.5)
    solve_u_many(1.0, [0.0], data, params, regime, SMALL_QUAD)
    assert len(clear_trace_cache) == 8
    clear_trace_cache.clear()
    assert (len(clear_trace_cache), clear_trace_cache.hits, clear_trace_cache.misses) == (0, 0, 0)


def test_symmetric_data_give_even_solutions(regime_params):
    _, params, regime = regime_params
    data = InitialData.from_boxes([{"x": [-1.0, 1.0], "y": [0.0, 1.0]}], [{"x": [-0.5, 0.5]}], 0.5)
    xs = np.array([-2.5, -0.5, 0.5, 2.5])
    v = solve_v_many(2.0, xs, 0.3, data, params, regime, SMALL_QUAD)
    np.testing.assert_allclose(v, v[::-1], rtol=0, atol=1e-10)
    u = solve_u_many(2.0, xs, data, params, regime, SMALL_QUAD, cache=None)
    np.testing.assert_allclose(u, u[::-1], rtol=0, atol=1e-10)


def test_explicit_solution_domain(simple_params):
    params, regime = simple_params
    data = InitialData.from_boxes([], [{"x": [-1.0, 1.0]}], 0.5)
    with pytest.raises(DomainError):
        solve_v_many(1.0, [0.0], -0.1, data, params, regime)
    with pytest.raises(DomainError):
        solve_u_many(0.0, [0.0], data, params, regime)
    with pytest.raises(DomainError):
        solve_U(-1.0, 0.0, data, params)


def test_initial_data_validation():
    with pytest.raises(ValueError):
        InitialData.from_boxes([{"x": [1.0, -1.0], "y": [0.0, 1.0]}])
    with pytest.raises(ValueError):
        InitialData.from_boxes([], [{"x": [0.0, 1.0], "height": -1.0}])
    with pytest.raises(ValueError):
        DataSpec.model_validate({"v0_boxes": [], "colour": "red"})


def test_data_spec_tabulates_boxes():
    spec = DataSpec.model_validate(
        {"v0_boxes": [{"x": [0.0, 1.0], "y": [0.0, 0.5], "height": 3.0}], "u0_intervals": [], "cell": 0.25}
    )
    data = spec.to_initial_data()
    assert data.sup == 3.0
    assert data.v0.values.shape == (4, 2)
    assert data.v0.values.sum() * 0.25**2 == pytest.approx(1.5, rel=1e-14)
    assert data.key() == spec.to_initial_data().key()


def test_sampling_on_nodes_preserves_mass():
    data = InitialData.from_boxes(
        [
            {"x": [-4.0, -2.0], "y": [0.0, 1.0]},
            {"x": [1.0, 3.5], "y": [0.5, 4.0], "height": 2.0},
        ],
        [{"x": [-4.0, 0.0], "height": 0.5}],
        0.5,
    )
    h = 0.5
    x_nodes = np.linspace(-4.0, 4.0, 17)
    y_nodes = np.linspace(0.0, 4.0, 9)
    v, u = data.sample_on_nodes(x_nodes, y_nodes, h)
    wx = np.ones(x_nodes.size)
    wx[[0, -1]] = 0.5
    wy = np.ones(y_nodes.size)
    wy[[0, -1]] = 0.5
    assert h * h * (wx @ v @ wy) == pytest.approx(2.0 + 2.0 * 8.75, rel=1e-13)
    assert h * (wx @ u) == pytest.approx(2.0, rel=1e-13)
    assert v[0, 0] == 1.0


@pytest.mark.slow
def test_explicit_solution_agrees_with_finite_differences():
    params = make_params(D=2.0)
    regime = classify_regime(params)
    t = 2.0
    data = InitialData.from_boxes([{"x": [-1.0, 1.0], "y": [0.0, 1.0]}], [{"x": [-1.0, 1.0]}], 0.25)
    config = SimConfig(params=params, M=10.0, h=0.25, t_end=t, record_every=t, data=data)
    _, final = simulate(config)

    xs = np.array([-2.0, 0.0, 0.5, 3.0])
    i = np.round((xs + 2 * config.M) / config.h).astype(int)
    for y in (0.0, 1.0):
        v = solve_v_many(t, xs, y, data, params, regime)
        fd = final.v.values[i, round(y / config.h)]
        assert np.max(np.abs(v - fd)) <= 3e-2 * np.max(np.abs(fd))
    u = solve_u_many(t, xs, data, params, regime, cache=None)
    assert np.max(np.abs(u - final.u.values[i])) <= 3e-2 * np.max(np.abs(final.u.values))


@pytest.mark.slow
@pytest.mark.parametrize("D", [0.1, 100.0])
@pytest.mark.parametrize("t", [5.0, 20.0, 50.0])
def test_desk_cross_check_with_finite_differences(D, t):
    params = ModelParams(d=1.0, D=D, mu=1.0, nu=1.0)
    regime = classify_regime(params)
    data = InitialData.from_boxes([{"x": [-5.0, 5.0], "y": [0.0, 5.0]}], [], 1.0)
    config = SimConfig(params=params, M=100.0, h=1.0, t_end=t, record_every=t, data=data)
    _, final = simulate(config)

    xs = np.arange(-18.0, 19.0, 4.0)
    ys = (0.0, 1.0, 3.0, 6.0, 10.0)
    probes = [(x, y) for y in ys for x in xs]
    assert len(probes) == 50
    v, u = evaluate_probes(t, probes, data, params, regime)

    i = np.round((xs + 2 * config.M) / config.h).astype(int)
    v_fd = np.concatenate([final.v.values[i, round(y / config.h)] for y in ys])
    u_fd = final.u.values[np.tile(i, len(ys))]
    assert np.max(np.abs(v - v_fd)) <= 2e-2 * np.max(np.abs(v_fd))
    assert np.max(np.abs(u - u_fd)) <= 2e-2 * np.max(np.abs(u_fd))
