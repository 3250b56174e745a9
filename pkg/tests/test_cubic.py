#!/usr/bin/env python
# type: ignore

"""Tests for the delta-indexed cubic and the regime classification."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from fieldroad.cubic import (
    ModelParams,
    RegimeKind,
    RootKind,
    RootTriple,
    classify_regime,
    cubic_coefficients,
    discriminant,
    evaluate_p_delta,
    measure_merge_ratio,
    partial_fraction_coeffs,
    solve_p_delta,
)
from fieldroad.exceptions import AmbiguousRegime, DomainError, MergeTooClose


def params_for(mu, d=1.0, nu=1.0, D=2.0):
    return ModelParams(d=d, D=D, mu=mu, nu=nu)


def random_samples(count, seed=0):
    """
    Log-uniform (d, nu, mu) with D = 2 d and delta in [0, 100 A^2 d].
    """
    rng = np.random.default_rng(seed)
    for _ in range(count):
        d, nu, mu = 10.0 ** rng.uniform(-1.5, 1.5, 3)
        params = ModelParams(d=d, D=2 * d, mu=mu, nu=nu)
        delta = float(rng.uniform(0, 100) * params.s**2)
        yield params, delta


def test_model_params_validation():
    with pytest.raises(ValidationError) as excinfo:
        ModelParams(d=1.0, D=1.0, mu=-1.0, nu=1.0)
    assert "mu" in str(excinfo.value)

    with pytest.raises(ValidationError):
        ModelParams(d=1.0, D=1.0, mu=1.0, nu=1.0, rho=2.0)

    with pytest.raises(ValidationError):
        ModelParams(d=1.0, D=1.0, mu=1.0, nu=1.0, dim=1)

    # D = d with a double root for every xi
    with pytest.raises(ValidationError) as excinfo:
        ModelParams(d=1.0, D=1.0, mu=0.25, nu=1.0)
    assert "mu = nu^2/(4 d) = 0.25" in str(excinfo.value)
    assert ModelParams(d=1.0, D=1.0, mu=0.3, nu=1.0).D == 1.0

    params = ModelParams(d=4.0, D=1.0, mu=2.0, nu=3.0)
    assert params.A == pytest.approx(0.75)
    assert params.B == pytest.approx(0.5)
    assert params.theta == pytest.approx(0.75)
    assert params.s == pytest.approx(1.5)


def test_discriminant_vanishes_at_triple_root():
    assert discriminant(params_for(8 / 27), 1 / 27) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("mu", [0.1, 0.5, 1.0, 3.0])
def test_discriminant_at_zero(mu):
    params = params_for(mu, d=2.0, nu=1.5)
    k = params.s**2
    assert discriminant(params, 0.0) == pytest.approx(mu**2 * (k - 4 * mu), rel=1e-12)


@pytest.mark.parametrize("delta", [0.0, 1.0, 10.0])
def test_discriminant_sign_for_simple_only(delta):
    # mu = 1 > 8/27: one real root and a conjugate pair for every delta
    params = params_for(1.0)
    assert discriminant(params, delta) < 0


@pytest.mark.parametrize("delta", [0.0, 0.3, 1.0, 5.0, 40.0])
def test_discriminant_matches_resultant(delta):
    # Disc = -Res(P, P') for a monic cubic
    params = params_for(0.2)
    b, c, e = cubic_coefficients(params, delta)
    p = np.array([1.0, b, c, e])
    dp = np.polyder(p)
    sylvester = np.array(
        [
            [p[0], p[1], p[2], p[3], 0],
            [0, p[0], p[1], p[2], p[3]],
            [dp[0], dp[1], dp[2], 0, 0],
            [0, dp[0], dp[1], dp[2], 0],
            [0, 0, dp[0], dp[1], dp[2]],
        ]
    )
    assert discriminant(params, delta) == pytest.approx(-np.linalg.det(sylvester), rel=1e-9, abs=1e-12)


def test_zero_is_a_root_at_delta_zero():
    for mu in (1.0, 8 / 27, 0.27, 0.2):
        roots = solve_p_delta(params_for(mu), 0.0)
        assert roots.alpha == 0.0


def test_triple_root():
    roots = solve_p_delta(params_for(8 / 27), 1 / 27)
    assert roots.kind is RootKind.TRIPLE_ROOT
    for root in roots.as_array():
        assert abs(root - (-1 / 3)) <= 1e-9


def test_double_root_at_quarter_threshold():
    roots = solve_p_delta(params_for(0.25), 0.0)
    assert roots.kind is RootKind.DOUBLE_ROOT
    assert roots.beta == roots.gamma == -0.5


def test_simple_roots_against_companion_matrix():
    params = params_for(1.0)
    roots = solve_p_delta(params, 5.0)
    b, c, e = cubic_coefficients(params, 5.0)
    oracle = np.roots([1.0, b, c, e])
    for root in roots.as_array():
        assert np.min(np.abs(oracle - root)) <= 1e-9


def test_root_triple_ordering():
    three = solve_p_delta(params_for(0.2), 0.001)
    assert three.kind is RootKind.THREE_REAL_SIMPLE
    assert three.alpha.real > three.beta.real > three.gamma.real

    pair = solve_p_delta(params_for(1.0), 5.0)
    assert pair.kind is RootKind.ONE_REAL_CONJUGATE_PAIR
    assert pair.alpha.imag == 0.0
    assert pair.beta.imag > 0
    assert pair.gamma == pair.beta.conjugate()


def test_root_algebra_on_random_samples():
    """
    Residuals, Vieta relations, the real-part bound and agreement of the
    discriminant sign with the detected multiplicity.
    """
    for params, delta in random_samples(10_000):
        roots = solve_p_delta(params, delta)
        values = roots.as_array()
        b, c, e = cubic_coefficients(params, delta)

        residual = np.abs(evaluate_p_delta(params, delta, values))
        assert np.all(residual <= 1e-10 * (1 + np.abs(values) ** 3))

        largest = float(np.max(np.abs(values)))
        assert abs(values.sum() + b) <= 1e-10 * max(1.0, largest)
        pairs = values[0] * values[1] + values[0] * values[2] + values[1] * values[2]
        assert abs(pairs - c) <= 1e-10 * max(1.0, abs(c), largest**2)
        assert abs(np.prod(values) + e) <= 1e-10 * max(1.0, abs(e), largest**3)

        assert np.all(values.real <= 1e-12 * (1 + params.s))
        assert np.all(values.real > -params.s)

        oracle = np.roots([1.0, b, c, e])
        for root in values:
            assert np.min(np.abs(oracle - root)) <= 1e-9 * (1 + np.max(np.abs(oracle)))

        disc = discriminant(params, delta)
        k, m = params.s**2, params.mu + delta
        disc_scale = 18 * k * m * delta + 4 * k**2 * delta + k * m**2 + 4 * m**3 + 27 * k * delta**2
        if abs(disc) <= 1e-9 * disc_scale:
            continue
        if roots.kind is RootKind.THREE_REAL_SIMPLE:
            assert disc > 0
        else:
            assert roots.kind is RootKind.ONE_REAL_CONJUGATE_PAIR
            assert disc < 0


def test_large_delta_behaviour():
    params = params_for(1.0)
    deltas = np.geomspace(1e2, 1e8, 7)
    roots = [solve_p_delta(params, float(delta)) for delta in deltas]
    real = np.array([r.alpha.real for r in roots])
    beta_re = np.array([abs(r.beta.real) for r in roots])
    beta_im = np.array([r.beta.imag for r in roots])
    assert abs(real[-1] + params.s) < 1e-6
    assert np.all(np.diff(beta_re) < 0)
    assert beta_re[-1] < 1e-6
    assert np.all(np.diff(beta_im) > 0)


def test_solve_rejects_non_finite_delta():
    with pytest.raises((DomainError, ValidationError)):
        solve_p_delta(params_for(1.0), math.inf)


@pytest.mark.parametrize(
    "mu, kind, singular",
    [
        (1.0, RegimeKind.SIMPLE_ONLY, ()),
        (8 / 27, RegimeKind.TRIPLE_AT, (1 / 27,)),
        (0.27, RegimeKind.DOUBLE_TWICE, None),
        (0.25, RegimeKind.DOUBLE_TWICE, None),
        (0.2, RegimeKind.DOUBLE_ONCE, None),
    ],
)
def test_classify_regime(mu, kind, singular):
    params = params_for(mu)
    regime = classify_regime(params)
    assert regime.kind is kind
    if singular is not None:
        assert regime.singular_deltas == pytest.approx(singular, rel=1e-10)
    for delta in regime.singular_deltas:
        assert abs(discriminant(params, delta)) <= 1e-10
        assert regime.in_guard(delta)


def test_classify_guard_radii():
    assert classify_regime(params_for(8 / 27)).guard_radius == pytest.approx(1 / 54, rel=1e-10)

    twice = classify_regime(params_for(0.27))
    first, second = twice.singular_deltas
    assert 0 < first < second
    assert twice.guard_radius == pytest.approx((second - first) / 2)

    once = classify_regime(params_for(0.2))
    (only,) = once.singular_deltas
    assert only > 0
    assert once.guard_radius == pytest.approx(only / 2)
    # the unique positive root of the discriminant brackets a sign change
    params = params_for(0.2)
    assert discriminant(params, only * 0.99) * discriminant(params, only * 1.01) < 0

    quarter = classify_regime(params_for(0.25))
    assert quarter.singular_deltas[0] == 0.0

    assert classify_regime(params_for(1.0)).guard_radius == 0.0


def test_classify_separation_is_positive_outside_guards():
    for mu in (1.0, 8 / 27, 0.27, 0.2):
        assert classify_regime(params_for(mu)).separation > 0


@pytest.mark.parametrize("offset", [1e-10, -1e-9, 5e-9])
def test_ambiguous_regime(offset):
    with pytest.raises(AmbiguousRegime):
        classify_regime(params_for(8 / 27 * (1 + offset)))
    with pytest.raises(AmbiguousRegime):
        classify_regime(params_for(0.25 * (1 + offset)))


def test_negative_deltas_for_slow_road():
    params = ModelParams(d=1.0, D=0.5, mu=0.2, nu=1.0)
    regime = classify_regime(params)
    assert len(regime.negative_singular_deltas) == len(regime.negative_guard_radii)
    for delta, radius in zip(regime.negative_singular_deltas, regime.negative_guard_radii):
        assert delta < 0
        assert radius > 0
        assert abs(discriminant(params, delta)) <= 1e-10


def test_partial_fractions_synthetic():
    roots = RootTriple(1.0, 2.0, 3.0, RootKind.THREE_REAL_SIMPLE)
    a, b, c = partial_fraction_coeffs(roots)
    assert (a, b, c) == pytest.approx((0.5, -1.0, 0.5))


def test_partial_fraction_sum_rules_on_random_triples():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        alpha, beta, gamma = rng.normal(size=3) + 1j * rng.normal(size=3)
        roots = RootTriple(alpha, beta, gamma, RootKind.THREE_REAL_SIMPLE)
        if roots.min_separation < 1e-2:
            continue
        a, b, c = partial_fraction_coeffs(roots)
        scale = max(abs(a), abs(b), abs(c))
        assert abs(a + b + c) <= 1e-10 * scale
        assert abs(a * alpha + b * beta + c * gamma) <= 1e-10 * scale * roots.scale
        assert abs(a * alpha**2 + b * beta**2 + c * gamma**2 - 1) <= 1e-10 * max(1.0, scale * roots.scale**2)


def test_partial_fractions_conjugate_pair():
    roots = solve_p_delta(params_for(1.0), 5.0)
    a, b, c = partial_fraction_coeffs(roots)
    assert abs(a.imag) <= 1e-14 * abs(a)
    assert abs(b - c.conjugate()) <= 1e-14 * abs(b)


def test_partial_fractions_merge_too_close():
    roots = solve_p_delta(params_for(8 / 27), 1 / 27)
    with pytest.raises(MergeTooClose):
        partial_fraction_coeffs(roots)
    with pytest.raises(MergeTooClose):
        partial_fraction_coeffs(RootTriple(1.0, 2.0, 3.0, RootKind.THREE_REAL_SIMPLE), merge_threshold=1.5)


def test_merge_ratio_tends_to_inverse_sqrt3():
    params = params_for(8 / 27)
    rows = measure_merge_ratio(params, classify_regime(params))
    assert [row["delta"] for row in rows] == sorted(row["delta"] for row in rows)[::-1]
    assert rows[-1]["ratio"] == pytest.approx(1 / math.sqrt(3), abs=2e-2)
    assert all(row["eps_I"] > 0 for row in rows)


def test_merge_ratio_needs_triple_regime():
    params = params_for(1.0)
    with pytest.raises(DomainError):
        measure_merge_ratio(params, classify_regime(params))
