#!/usr/bin/env python
# type: ignore

"""Tests for the compensated Phi evaluation."""

import math
import warnings

import mpmath
import numpy as np
import pytest
from pydantic import ValidationError

from fieldroad.cubic import (
    ModelParams,
    RootKind,
    RootTriple,
    classify_regime,
    cubic_coefficients,
    partial_fraction_coeffs,
    solve_p_delta,
)
from fieldroad.exceptions import DomainError, RealnessWarning
from fieldroad.phi_kernel import (
    PhiBranch,
    PhiEvalPoint,
    phi_bullet,
    phi_compensated,
    phi_values,
    select_branch,
    sup_phi_scan,
)
from fieldroad.special_functions import erfc_ratio

# Frozen constant of the uniform bound S(t) sqrt(1 + t) <= PHI_BOUND.
PHI_BOUND = 50.0

mpmath.mp.dps = 50


def naive_phi(t, y, d, roots):
    a, b, c = partial_fraction_coeffs(roots)
    return sum(
        coeff * lam * phi_bullet(t, y, d, lam)
        for coeff, lam in zip((a, b, c), roots.as_array())
    )


def mp_naive_phi(t, y, params, delta):
    """
    Partial-fraction evaluation of Phi in extended precision, with the roots
    recomputed by mpmath.
    """
    b, c, e = cubic_coefficients(params, delta)
    roots = mpmath.polyroots([1, mpmath.mpf(b), mpmath.mpf(c), mpmath.mpf(e)], maxsteps=200, extraprec=200)
    t, y, d = mpmath.mpf(t), mpmath.mpf(y), mpmath.mpf(params.d)
    total = mpmath.mpc(0)
    for i, lam in enumerate(roots):
        others = [roots[j] for j in range(3) if j != i]
        coeff = 1 / ((lam - others[0]) * (lam - others[1]))
        z = (-2 * lam * mpmath.sqrt(d) * t + y) / (2 * mpmath.sqrt(d * t))
        total += coeff * lam * mpmath.exp(z * z) * mpmath.erfc(z)
    return complex(total)


def test_phi_bullet_examples():
    assert phi_bullet(2.0, 0.0, 1.5, 0.0) == 1.0
    t, d = 3.0, 2.0
    assert phi_bullet(t, 2 * math.sqrt(d * t), d, 0.0) == pytest.approx(erfc_ratio(1.0), rel=1e-15)
    expected = float(mpmath.e * mpmath.erfc(1))
    assert phi_bullet(1.0, 0.0, 1.0, -1.0) == pytest.approx(expected, rel=1e-13)


def test_phi_bullet_domain():
    with pytest.raises(DomainError):
        phi_bullet(0.0, 0.0, 1.0, -1.0)
    with pytest.raises(DomainError):
        phi_bullet(1.0, -0.1, 1.0, -1.0)
    with pytest.raises(DomainError):
        phi_bullet(1.0, 0.0, 1.0, 1.0)


def test_eval_point_validation():
    with pytest.raises(ValidationError):
        PhiEvalPoint(t=0.0, y=0.0, delta=1.0)
    with pytest.raises(ValidationError):
        PhiEvalPoint(t=1.0, y=-1.0, delta=1.0)
    with pytest.raises(ValidationError):
        PhiEvalPoint(t=1.0, y=0.0, delta=math.nan)


@pytest.mark.parametrize("delta", [0.5, 5.0, 50.0])
@pytest.mark.parametrize("t, y", [(0.1, 0.0), (1.0, 0.5), (30.0, 3.0)])
def test_generic_delta_matches_naive(simple_params, delta, t, y):
    params, regime = simple_params
    roots = solve_p_delta(params, delta)
    assert select_branch(roots, regime) is PhiBranch.DIRECT
    got = phi_compensated(PhiEvalPoint(t=t, y=y, delta=delta), params, regime)
    expected = naive_phi(t, y, params.d, roots)
    assert abs(expected.imag) <= 1e-10 * (1 + abs(expected))
    assert got == pytest.approx(expected.real, rel=1e-10, abs=1e-14)


@pytest.mark.parametrize("offset", [-1e-6, 1e-6])
@pytest.mark.parametrize("t, y", [(0.5, 0.0), (1.0, 1.0), (10.0, 0.0), (10.0, 4.0)])
def test_triple_branch_matches_extended_precision(triple_params, offset, t, y):
    params, regime = triple_params
    delta = regime.singular_deltas[0] + offset
    assert regime.in_guard(delta)
    got = phi_compensated(PhiEvalPoint(t=t, y=y, delta=delta), params, regime)
    expected = mp_naive_phi(t, y, params, delta)
    assert abs(expected.imag) <= 1e-20 + 1e-12 * abs(expected)
    assert got == pytest.approx(expected.real, rel=1e-6)


def test_exact_triple_root_uses_cluster_expansion(triple_params):
    params, regime = triple_params
    delta = regime.singular_deltas[0]
    roots = solve_p_delta(params, delta)
    assert roots.kind is RootKind.TRIPLE_ROOT
    assert select_branch(roots) is PhiBranch.TRIPLE
    at = phi_compensated(PhiEvalPoint(t=2.0, y=0.5, delta=delta), params, regime)
    near = phi_compensated(PhiEvalPoint(t=2.0, y=0.5, delta=delta * (1 + 1e-9)), params, regime)
    assert at == pytest.approx(near, rel=1e-5)


def guard_edges(regime):
    """
    Outer edges of the guard intervals on delta > 0, as (inside, outside)
    points 1e-12 (relative) either side of the edge.
    """
    edges = []
    for guard in regime.guards:
        for side in (-1.0, 1.0):
            edge = guard.center + side * guard.radius
            shared = [
                g for g in regime.guards
                if g is not guard and abs(edge - g.center) <= g.radius * (1 + 1e-9)
            ]
            if edge > 0 and not shared:
                edges.append((edge * (1 - side * 1e-12), edge * (1 + side * 1e-12)))
    return edges


@pytest.mark.parametrize("t, y", [(0.5, 0.0), (5.0, 1.0), (100.0, 0.0)])
def test_branch_continuity_at_guard_edges(regime_params, t, y):
    _, params, regime = regime_params
    for inside, outside in guard_edges(regime):
        assert regime.in_guard(inside)
        assert not regime.in_guard(outside)
        a = phi_compensated(PhiEvalPoint(t=t, y=y, delta=inside), params, regime)
        b = phi_compensated(PhiEvalPoint(t=t, y=y, delta=outside), params, regime)
        assert abs(a - b) <= 1e-8 * max(abs(a), abs(b), 1e-300)


def test_realness_everywhere_on_default_grid(regime_params):
    _, params, _ = regime_params
    with warnings.catch_warnings():
        warnings.simplefilter("error", RealnessWarning)
        for t in (0.01, 1.0, 100.0):
            assert math.isfinite(sup_phi_scan(t, params))


def test_realness_warning_for_non_conjugate_roots():
    roots = RootTriple(-1.0 + 0j, -2.0 + 1.0j, -3.0 - 0.5j, RootKind.ONE_REAL_CONJUGATE_PAIR, 1.0)
    with pytest.warns(RealnessWarning):
        phi_values(1.0, 0.0, roots, 1.0, PhiBranch.DIRECT)


def test_phi_values_domain():
    roots = solve_p_delta(ModelParams(d=1.0, D=2.0, mu=1.0, nu=1.0), 1.0)
    with pytest.raises(DomainError):
        phi_values([1.0, 0.0], 0.0, roots, 1.0)
    with pytest.raises(DomainError):
        phi_values(1.0, -1.0, roots, 1.0)


def test_phi_values_broadcast():
    roots = solve_p_delta(ModelParams(d=1.0, D=2.0, mu=1.0, nu=1.0), 1.0)
    values = phi_values(np.array([[0.5], [1.0]]), np.array([0.0, 1.0, 2.0]), roots, 1.0)
    assert values.shape == (2, 3)
    assert values[1, 2] == pytest.approx(phi_values(1.0, 2.0, roots, 1.0))


@pytest.mark.parametrize("mu", [1.0, 8 / 27, 0.27, 0.2])
def test_uniform_bound(mu):
    params = ModelParams(d=1.0, D=2.0, mu=mu, nu=1.0)
    for t in np.geomspace(1e-2, 1e4, 7):
        assert sup_phi_scan(float(t), params) * math.sqrt(1 + t) <= PHI_BOUND


def test_bound_at_t_100(simple_params):
    params, _ = simple_params
    assert sup_phi_scan(100.0, params) <= PHI_BOUND / math.sqrt(101)


def test_scan_decays_in_time(simple_params):
    params, _ = simple_params
    times = np.array([1.0, 4.0, 16.0, 64.0, 256.0])
    sups = [sup_phi_scan(float(t), params) for t in times]
    slope, _ = np.polyfit(np.log(times), np.log(sups), 1)
    assert slope <= -0.4


def test_single_point_scan(triple_params):
    params, regime = triple_params
    delta, t, y = 0.05, 3.0, 0.7
    expected = abs(phi_compensated(PhiEvalPoint(t=t, y=y, delta=delta), params, regime))
    assert sup_phi_scan(t, params, [delta], [y]) == pytest.approx(expected, rel=1e-15)


def test_scan_needs_nonempty_grids(simple_params):
    params, _ = simple_params
    with pytest.raises(DomainError):
        sup_phi_scan(1.0, params, [], [0.0])


def test_slow_road_is_real_and_finite():
    params = ModelParams(d=1.0, D=0.5, mu=1.0, nu=1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", RealnessWarning)
        for t in (0.5, 2.0):
            value = sup_phi_scan(t, params, -np.linspace(0.0, 5.0, 41), np.linspace(0.0, 10.0, 11))
            assert math.isfinite(value)
