"""
Copyright 2022 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
SPDX-License-Identifier: Apache-2.0

The delta-indexed cubic

    P_delta(sigma) = sigma^3 + s sigma^2 + (mu + delta) sigma + s delta,   s = nu / sqrt(d),

its roots, its discriminant, the classification of the parameter point into
root regimes and the partial fraction coefficients built from the roots.
"""

import enum
import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Annotated, Any

import numpy as np
import pydantic
from scipy import optimize

from .exceptions import AmbiguousRegime, DomainError, MergeTooClose
from .utils import CUBIC_TOLERANCES

logger = logging.getLogger(__name__)

PositiveFinite = Annotated[float, pydantic.Field(gt=0, allow_inf_nan=False)]

MERGE_TOLERANCE: float = CUBIC_TOLERANCES["merge_tolerance"]
MULTIPLICITY_RTOL: float = CUBIC_TOLERANCES["multiplicity_rtol"]
THRESHOLD_EXACT_RTOL: float = CUBIC_TOLERANCES["threshold_exact_rtol"]
THRESHOLD_AMBIGUOUS_RTOL: float = CUBIC_TOLERANCES["threshold_ambiguous_rtol"]


class ModelParams(pydantic.BaseModel):
    """
    Physical constants of the field-road system.

    d and D are the field and road diffusivities, mu the road to field exchange
    rate, nu the field to road exchange rate and dim the ambient dimension N.
    """

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    d: PositiveFinite
    D: PositiveFinite
    mu: PositiveFinite
    nu: PositiveFinite
    dim: int = pydantic.Field(default=2, ge=2)

    @pydantic.model_validator(mode="after")
    def _reject_degenerate_equal_diffusivities(self) -> "ModelParams":
        # With D = d every xi gives delta = 0, and P_0 has a double root for all
        # xi exactly when mu = nu^2 / (4 d).
        if self.D == self.d and math.isclose(
            self.mu, self.nu**2 / (4.0 * self.d), rel_tol=THRESHOLD_EXACT_RTOL
        ):
            raise ValueError(
                f"D = d = {self.d!r} is only excluded at mu = nu^2/(4 d) = {self.nu**2 / (4.0 * self.d)!r}, "
                "where every xi gives a double root; any other mu is supported"
            )
        return self

    @property
    def A(self) -> float:
        return self.nu / self.d

    @property
    def B(self) -> float:
        return self.mu / self.d

    @property
    def theta(self) -> float:
        return self.nu / (1.0 + self.nu)

    @property
    def s(self) -> float:
        """A sqrt(d) = nu / sqrt(d), the quadratic coefficient of P_delta."""
        return self.nu / math.sqrt(self.d)


class RootKind(str, enum.Enum):
    THREE_REAL_SIMPLE = "ThreeRealSimple"
    ONE_REAL_CONJUGATE_PAIR = "OneRealConjugatePair"
    DOUBLE_ROOT = "DoubleRoot"
    TRIPLE_ROOT = "TripleRoot"


class RegimeKind(str, enum.Enum):
    SIMPLE_ONLY = "SimpleOnly"
    TRIPLE_AT = "TripleAt"
    DOUBLE_TWICE = "DoubleTwice"
    DOUBLE_ONCE = "DoubleOnce"


@dataclass(frozen=True)
class RootTriple:
    """
    The three roots of P_delta.

    Ordering: ThreeRealSimple stores the roots in decreasing order,
    OneRealConjugatePair stores the real root in alpha and the root with
    positive imaginary part in beta (gamma = conj(beta)), DoubleRoot stores the
    simple root in alpha and the double root in beta and gamma.
    """

    alpha: complex
    beta: complex
    gamma: complex
    kind: RootKind
    delta: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.gamma], dtype=np.complex128)

    @property
    def centroid(self) -> complex:
        return (self.alpha + self.beta + self.gamma) / 3.0

    @property
    def scale(self) -> float:
        return max(abs(self.alpha), abs(self.beta), abs(self.gamma))

    def pair_distances(self) -> tuple[float, float, float]:
        """|alpha - beta|, |alpha - gamma|, |beta - gamma|."""
        return (
            abs(self.alpha - self.beta),
            abs(self.alpha - self.gamma),
            abs(self.beta - self.gamma),
        )

    @property
    def min_separation(self) -> float:
        return min(self.pair_distances())


@dataclass(frozen=True)
class GuardInterval:
    center: float
    radius: float
    triple: bool

    def __contains__(self, delta: float) -> bool:
        return abs(delta - self.center) < self.radius


@dataclass(frozen=True)
class Regime:
    """
    Root regime of a parameter point.

    `singular_deltas` are the nonnegative delta values where P_delta has a
    multiple root, `guard_radius` the half-width of the compensated-evaluation
    interval around each of them and `separation` the smallest root distance
    measured on the complement of the guard intervals. Negative singular
    values (only reached when D < d) carry their own radii.
    """

    kind: RegimeKind
    singular_deltas: tuple[float, ...]
    guard_radius: float
    separation: float
    negative_singular_deltas: tuple[float, ...] = ()
    negative_guard_radii: tuple[float, ...] = ()
    guards: tuple[GuardInterval, ...] = field(default=(), repr=False)

    def guard_interval_for(self, delta: float) -> GuardInterval | None:
        for guard in self.guards:
            if delta in guard:
                return guard
        return None

    def in_guard(self, delta: float) -> bool:
        return self.guard_interval_for(delta) is not None


def cubic_coefficients(params: ModelParams, delta: float) -> tuple[float, float, float]:
    """
    Coefficients (b, c, e) of the monic cubic sigma^3 + b sigma^2 + c sigma + e.
    """
    s = params.s
    return s, params.mu + delta, s * delta


def evaluate_p_delta(params: ModelParams, delta: float, sigma: Any) -> Any:
    b, c, e = cubic_coefficients(params, delta)
    return ((sigma + b) * sigma + c) * sigma + e


def _discriminant_polynomial(params: ModelParams) -> np.ndarray:
    """
    Coefficients (highest power first) of the discriminant as a cubic in delta.
    """
    k = params.s**2
    mu = params.mu
    return np.array(
        [
            -4.0,
            -8.0 * k - 12.0 * mu,
            20.0 * k * mu - 4.0 * k**2 - 12.0 * mu**2,
            mu**2 * (k - 4.0 * mu),
        ]
    )


@pydantic.validate_call
def discriminant(params: ModelParams, delta: float) -> float:
    """
    Discriminant of P_delta,

        18 A^2 d (mu+delta) delta - 4 A^4 d^2 delta + A^2 d (mu+delta)^2
            - 4 (mu+delta)^3 - 27 A^2 d delta^2.

    Zero exactly when P_delta has a multiple root, positive for three distinct
    real roots and negative for one real root and a conjugate pair.
    """
    k = params.s**2
    m = params.mu + delta
    return (
        18.0 * k * m * delta
        - 4.0 * k**2 * delta
        + k * m**2
        - 4.0 * m**3
        - 27.0 * k * delta**2
    )


def _polish(params: ModelParams, delta: float, root: complex) -> complex:
    b, c, _ = cubic_coefficients(params, delta)
    slope = (3.0 * root + 2.0 * b) * root + c
    if abs(slope) <= 1e-300:
        return root
    return root - evaluate_p_delta(params, delta, root) / slope


def _roots_at_zero(params: ModelParams) -> RootTriple:
    # P_0(sigma) = sigma (sigma^2 + s sigma + mu)
    s, mu = params.s, params.mu
    q = s * s - 4.0 * mu
    if abs(q) <= MULTIPLICITY_RTOL * s * s:
        return RootTriple(0.0 + 0j, complex(-s / 2), complex(-s / 2), RootKind.DOUBLE_ROOT, 0.0)
    if q > 0:
        root_q = math.sqrt(q)
        # -s/2 - root_q/2 computed directly, its partner from the product mu
        low = -(s + root_q) / 2.0
        high = mu / low
        return RootTriple(0.0 + 0j, complex(high), complex(low), RootKind.THREE_REAL_SIMPLE, 0.0)
    beta = complex(-s / 2.0, math.sqrt(-q) / 2.0)
    return RootTriple(0.0 + 0j, beta, beta.conjugate(), RootKind.ONE_REAL_CONJUGATE_PAIR, 0.0)


@pydantic.validate_call
def solve_p_delta(params: ModelParams, delta: float) -> RootTriple:
    """
    Roots of P_delta.

    Closed form on the depressed cubic (trigonometric branch for three real
    roots), followed by one Newton step per simple root. Multiple roots are
    detected on the depressed coefficients with a relative tolerance and
    returned exactly merged.

    Parameters
    ----------
    params : ModelParams
        Physical constants.
    delta : float
        Index of the cubic, delta = (D - d) |xi|^2. Negative values are
        accepted for the D < d case.

    Returns
    -------
    RootTriple
    """
    if not math.isfinite(delta):
        raise DomainError(f"delta must be finite, got {delta}")
    if delta == 0.0:
        return _roots_at_zero(params)

    b, c, e = cubic_coefficients(params, delta)
    shift = -b / 3.0
    p = c - b * b / 3.0
    q = 2.0 * b**3 / 27.0 - b * c / 3.0 + e
    p_scale = b * b + abs(c)
    q_scale = b**3 + b * abs(c) + abs(e)

    if abs(p) <= MULTIPLICITY_RTOL * p_scale and abs(q) <= MULTIPLICITY_RTOL * q_scale:
        lam = complex(shift)
        return RootTriple(lam, lam, lam, RootKind.TRIPLE_ROOT, delta)

    half_q = q / 2.0
    third_p = p / 3.0
    disc = half_q * half_q + third_p**3
    disc_scale = max(half_q * half_q, abs(third_p) ** 3)

    if abs(disc) <= MULTIPLICITY_RTOL * disc_scale and p < 0:
        simple = 3.0 * q / p + shift
        double = -1.5 * q / p + shift
        simple = _polish(params, delta, complex(simple)).real
        return RootTriple(
            complex(simple), complex(double), complex(double), RootKind.DOUBLE_ROOT, delta
        )

    if disc < 0:
        radius = 2.0 * math.sqrt(-third_p)
        cos_arg = (3.0 * q / (2.0 * p)) * math.sqrt(-3.0 / p)
        phi = math.acos(min(1.0, max(-1.0, cos_arg)))
        real_roots = [
            radius * math.cos(phi / 3.0 - 2.0 * math.pi * j / 3.0) + shift for j in range(3)
        ]
        polished = sorted(
            (_polish(params, delta, complex(r)).real for r in real_roots), reverse=True
        )
        return RootTriple(
            complex(polished[0]),
            complex(polished[1]),
            complex(polished[2]),
            RootKind.THREE_REAL_SIMPLE,
            delta,
        )

    root_disc = math.sqrt(disc)
    big = -math.copysign(1.0, q) * np.cbrt(abs(half_q) + root_disc)
    small = -third_p / big if big != 0.0 else 0.0
    real = _polish(params, delta, complex(big + small + shift)).real
    beta = complex(-(big + small) / 2.0 + shift, math.sqrt(3.0) / 2.0 * abs(big - small))
    beta = _polish(params, delta, beta)
    beta = complex(beta.real, abs(beta.imag))
    return RootTriple(
        complex(real), beta, beta.conjugate(), RootKind.ONE_REAL_CONJUGATE_PAIR, delta
    )


def _real_roots_of_discriminant(params: ModelParams) -> list[float]:
    """
    Real roots of the discriminant as a cubic in delta: bracket on the monotone
    pieces between its critical points, then Brent bisection.
    """
    coeffs = _discriminant_polynomial(params)
    poly = np.poly1d(coeffs)
    bound = 1.0 + float(np.max(np.abs(coeffs[1:] / coeffs[0])))
    critical = sorted(
        float(r.real) for r in np.roots(np.polyder(coeffs)) if abs(r.imag) < 1e-12 * bound
    )
    knots = [-bound] + [c for c in critical if -bound < c < bound] + [bound]

    roots = []
    for left, right in zip(knots[:-1], knots[1:]):
        f_left, f_right = poly(left), poly(right)
        if f_left == 0.0:
            roots.append(left)
        elif f_left * f_right < 0:
            roots.append(
                optimize.brentq(poly, left, right, xtol=1e-14 * bound, maxiter=500)
            )
    if poly(knots[-1]) == 0.0:
        roots.append(knots[-1])
    return sorted(set(roots))


def _scan_separation(params: ModelParams, guards: tuple[GuardInterval, ...], top: float) -> float:
    grid = np.unique(
        np.concatenate([np.linspace(0.0, top, 201), np.geomspace(top * 1e-6, top, 200)])
    )
    separations = [
        solve_p_delta(params, float(delta)).min_separation
        for delta in grid
        if not any(float(delta) in g for g in guards)
    ]
    return float(min(separations)) if separations else 0.0


def _negative_guards(
    negatives: list[float], anchors: list[float]
) -> tuple[tuple[float, ...], tuple[float, ...]]:
    radii = []
    for value in negatives:
        others = [abs(value - other) for other in negatives + anchors if other != value]
        radii.append(min([abs(value)] + others) / 2.0)
    return tuple(negatives), tuple(radii)


@functools.lru_cache(maxsize=64)
def classify_regime(params: ModelParams) -> Regime:
    """
    Classify (mu, nu, d) against the thresholds 8 A^2 d / 27 and A^2 d / 4.

    Parameters
    ----------
    params : ModelParams
        Physical constants.

    Returns
    -------
    Regime
        Kind, singular delta values (nonnegative roots of the discriminant),
        guard radius and measured separation.

    Raises
    ------
    AmbiguousRegime
        If mu is close to a threshold but not close enough to be treated as
        lying on it.
    """
    k = params.s**2
    mu = params.mu
    triple_threshold = 8.0 * k / 27.0
    double_threshold = k / 4.0
    rel_triple = abs(mu - triple_threshold) / triple_threshold
    rel_double = abs(mu - double_threshold) / double_threshold

    for rel, name in ((rel_triple, "8A^2d/27"), (rel_double, "A^2d/4")):
        if THRESHOLD_EXACT_RTOL < rel <= THRESHOLD_AMBIGUOUS_RTOL:
            raise AmbiguousRegime(
                f"mu = {mu!r} is within {rel:.2e} (relative) of the threshold {name}; "
                "perturb mu"
            )

    all_roots = _real_roots_of_discriminant(params)
    negatives = [r for r in all_roots if r < 0 and not math.isclose(r, 0.0, abs_tol=1e-14 * k)]

    if rel_triple <= THRESHOLD_EXACT_RTOL:
        kind = RegimeKind.TRIPLE_AT
        singular: tuple[float, ...] = (k / 27.0,)
        radius = singular[0] / 2.0
    elif rel_double <= THRESHOLD_EXACT_RTOL or double_threshold < mu < triple_threshold:
        kind = RegimeKind.DOUBLE_TWICE
        positives = [r for r in all_roots if r >= 0]
        if rel_double <= THRESHOLD_EXACT_RTOL:
            positives = [0.0] + [r for r in positives if r > 1e-12 * k]
        if len(positives) != 2:
            raise AmbiguousRegime(
                f"Expected two singular deltas for mu = {mu!r}, found {positives}"
            )
        singular = (positives[0], positives[1])
        radius = (singular[1] - singular[0]) / 2.0
    elif mu < double_threshold:
        kind = RegimeKind.DOUBLE_ONCE
        positives = [r for r in all_roots if r > 0]
        if len(positives) != 1:
            raise AmbiguousRegime(
                f"Expected one singular delta for mu = {mu!r}, found {positives}"
            )
        singular = (positives[0],)
        radius = singular[0] / 2.0
    else:
        kind = RegimeKind.SIMPLE_ONLY
        singular = ()
        radius = 0.0

    neg_values, neg_radii = _negative_guards(negatives, list(singular) + [0.0])
    guards = tuple(
        GuardInterval(center, radius, kind is RegimeKind.TRIPLE_AT) for center in singular
    ) + tuple(GuardInterval(c, r, False) for c, r in zip(neg_values, neg_radii))

    top = 10.0 * max([k, mu] + list(singular))
    separation = _scan_separation(params, guards, top)

    logger.debug(
        "Regime %s for %s: singular deltas %s, guard radius %.3g, separation %.3g",
        kind.value,
        params,
        singular,
        radius,
        separation,
    )
    return Regime(
        kind=kind,
        singular_deltas=singular,
        guard_radius=radius,
        separation=separation,
        negative_singular_deltas=neg_values,
        negative_guard_radii=neg_radii,
        guards=guards,
    )


def partial_fraction_coeffs(
    roots: RootTriple, merge_threshold: float | None = None
) -> tuple[complex, complex, complex]:
    """
    a = 1/((alpha-beta)(alpha-gamma)) and its cyclic permutations b, c.

    Parameters
    ----------
    roots : RootTriple
        Roots of P_delta (or any triple of distinct numbers).
    merge_threshold : float, optional
        Smallest admissible pairwise distance. Defaults to
        MERGE_TOLERANCE * (1 + largest root magnitude).

    Raises
    ------
    MergeTooClose
        If two roots are closer than the threshold; evaluate Phi through the
        compensated branches instead.
    """
    if merge_threshold is None:
        merge_threshold = MERGE_TOLERANCE * (1.0 + roots.scale)
    if roots.min_separation <= merge_threshold:
        raise MergeTooClose(
            f"Roots {roots.alpha}, {roots.beta}, {roots.gamma} are closer than "
            f"{merge_threshold:.3g}"
        )
    alpha, beta, gamma = roots.alpha, roots.beta, roots.gamma
    a = 1.0 / ((alpha - beta) * (alpha - gamma))
    b = 1.0 / ((beta - alpha) * (beta - gamma))
    c = 1.0 / ((gamma - alpha) * (gamma - beta))
    return a, b, c


def measure_merge_ratio(
    params: ModelParams,
    regime: Regime,
    offsets: tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6),
) -> list[dict[str, float]]:
    """
    Measure |eps_R| / |eps_I| as delta approaches the triple root value from
    above, where alpha = lambda_0 - 2 eps_R and beta = lambda_0 + eps_R + i eps_I.
    """
    if regime.kind is not RegimeKind.TRIPLE_AT:
        raise DomainError("The merge ratio is only defined in the TripleAt regime")
    delta0 = regime.singular_deltas[0]
    lambda0 = -params.s / 3.0
    rows = []
    for offset in offsets:
        delta = delta0 * (1.0 + offset)
        roots = solve_p_delta(params, delta)
        eps_r = roots.beta.real - lambda0
        eps_i = abs(roots.beta.imag)
        rows.append(
            {
                "delta": delta,
                "eps_R": eps_r,
                "eps_I": eps_i,
                "ratio": abs(eps_r) / eps_i if eps_i > 0 else math.inf,
            }
        )
    return rows
