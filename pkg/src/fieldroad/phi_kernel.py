"""
Copyright 2022 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
SPDX-License-Identifier: Apache-2.0

The compensated combination

    Phi(t, xi, y) = a alpha Phi_alpha + b beta Phi_beta + c gamma Phi_gamma,
    Phi_lambda   = R((-2 lambda sqrt(d) t + y) / (2 sqrt(d t))),

which is the second divided difference f[alpha, beta, gamma] of
f(lambda) = lambda Phi_lambda. Its apparent singularities where roots merge
cancel; the double and triple branches below evaluate it without forming the
partial fraction coefficients.
"""

import enum
import logging
import math
import warnings
from typing import Annotated, Any

import numpy as np
import numpy.typing as npt
import pydantic

from .cubic import ModelParams, Regime, RootKind, RootTriple, classify_regime, solve_p_delta
from .exceptions import DomainError, RealnessWarning
from .special_functions import erfc_ratio, erfc_ratio_taylor
from .utils import PHI_TOLERANCES

logger = logging.getLogger(__name__)

TAYLOR_SEPARATION: float = PHI_TOLERANCES["taylor_separation"]
CLUSTER_SEPARATION: float = PHI_TOLERANCES["cluster_separation"]
REALNESS_TOL: float = PHI_TOLERANCES["realness_tol"]

TAYLOR_ORDER = 5


class PhiBranch(str, enum.Enum):
    DIRECT = "direct"
    DOUBLE = "double"
    TRIPLE = "triple"


class PhiEvalPoint(pydantic.BaseModel):
    """
    Arguments of Phi. `delta` is (D - d) |xi|^2 and may be negative when D < d.
    """

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    t: Annotated[float, pydantic.Field(gt=0, allow_inf_nan=False)]
    y: Annotated[float, pydantic.Field(ge=0, allow_inf_nan=False)]
    delta: Annotated[float, pydantic.Field(allow_inf_nan=False)]


def _argument(t: Any, y: Any, d: float, lam: complex) -> npt.NDArray[np.complex128]:
    sqrt_t = np.sqrt(t)
    return y / (2.0 * np.sqrt(d) * sqrt_t) - lam * sqrt_t


def phi_bullet(t: float, y: float, d: float, lam: complex) -> complex:
    """
    Phi_lambda(t, y) = R(z) with z = (-2 lambda sqrt(d) t + y) / (2 sqrt(d t)).

    Raises
    ------
    DomainError
        If t <= 0, y < 0, or Re z < 0 (a root with positive real part).
    """
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    if y < 0:
        raise DomainError(f"y must be nonnegative, got {y}")
    return erfc_ratio(_argument(t, y, d, lam))


def _p_derivatives(
    t: npt.NDArray[np.float64],
    y: npt.NDArray[np.float64],
    d: float,
    lam: complex,
    order: int,
) -> npt.NDArray[np.complex128]:
    """
    Derivatives in lambda of p(lambda) = R(z(lambda)). dz/dlambda = -sqrt(t),
    so p^(n) = (-sqrt(t))^n R^(n)(z).
    """
    z = _argument(t, y, d, lam)
    r_derivs = erfc_ratio_taylor(z, order, reflect=True)
    if not np.all(np.isfinite(r_derivs)):
        raise DomainError(
            f"Phi overflows at lambda = {lam}: the root has a large positive real part "
            "for these times"
        )
    scale = -np.sqrt(t)
    p = np.empty_like(r_derivs)
    factor = np.ones_like(z)
    for n in range(order + 1):
        p[n] = factor * r_derivs[n]
        factor = factor * scale
    return p


def _f_derivatives(
    t: npt.NDArray[np.float64],
    y: npt.NDArray[np.float64],
    d: float,
    lam: complex,
    order: int,
) -> npt.NDArray[np.complex128]:
    """
    Derivatives of f(lambda) = lambda p(lambda): f^(n) = lambda p^(n) + n p^(n-1).
    """
    p = _p_derivatives(t, y, d, lam, order)
    f = np.empty_like(p)
    f[0] = lam * p[0]
    for n in range(1, order + 1):
        f[n] = lam * p[n] + n * p[n - 1]
    return f


def _p_values(t: npt.NDArray[np.float64], y: Any, d: float, lam: complex) -> Any:
    return _p_derivatives(t, y, d, lam, 0)[0]


def _f_values(t: npt.NDArray[np.float64], y: Any, d: float, lam: complex) -> Any:
    return _f_derivatives(t, y, d, lam, 0)[0]


def _scaled_separation(
    separation: float, t: npt.NDArray[np.float64], y: Any, d: float, center: complex
) -> npt.NDArray[np.float64]:
    z = _argument(t, y, d, center)
    return separation * np.sqrt(t) / np.maximum(1.0, np.abs(z))


def _pair_difference(
    t: npt.NDArray[np.float64], y: Any, d: float, first: complex, second: complex
) -> npt.NDArray[np.complex128]:
    """
    f[first, second], by a midpoint Taylor expansion once the pair is close.
    """
    center = (first + second) / 2.0
    half = (first - second) / 2.0
    close = _scaled_separation(abs(first - second), t, y, d, center) < TAYLOR_SEPARATION

    result = np.empty(np.broadcast(t, y).shape, dtype=np.complex128)
    if np.any(close):
        derivs = _f_derivatives(t, y, d, center, TAYLOR_ORDER)
        series = derivs[1] + derivs[3] * half**2 / 6.0 + derivs[5] * half**4 / 120.0
        result = np.where(close, series, result)
    if np.any(~close):
        gap = first - second if first != second else 1.0
        direct = (_f_values(t, y, d, first) - _f_values(t, y, d, second)) / gap
        result = np.where(close, result, direct)
    return result


def _cluster_taylor(
    t: npt.NDArray[np.float64], y: Any, d: float, roots: RootTriple
) -> npt.NDArray[np.complex128]:
    """
    f[alpha, beta, gamma] expanded at the centroid m. With e_i the offsets from m
    (summing to zero) and p_k their power sums, the complete symmetric
    polynomials reduce to h_2 = p_2 / 2 and h_3 = p_3 / 3.
    """
    center = roots.centroid
    offsets = roots.as_array() - center
    p2 = np.sum(offsets**2)
    p3 = np.sum(offsets**3)
    derivs = _f_derivatives(t, y, d, center, TAYLOR_ORDER)
    return derivs[2] / 2.0 + derivs[4] * p2 / 48.0 + derivs[5] * p3 / 360.0


def _phi_direct(
    t: npt.NDArray[np.float64], y: Any, d: float, roots: RootTriple
) -> npt.NDArray[np.complex128]:
    alpha, beta, gamma = roots.alpha, roots.beta, roots.gamma
    a = 1.0 / ((alpha - beta) * (alpha - gamma))
    b = 1.0 / ((beta - alpha) * (beta - gamma))
    c = 1.0 / ((gamma - alpha) * (gamma - beta))
    return (
        a * _f_values(t, y, d, alpha)
        + b * _f_values(t, y, d, beta)
        + c * _f_values(t, y, d, gamma)
    )


def _phi_double(
    t: npt.NDArray[np.float64], y: Any, d: float, roots: RootTriple
) -> npt.NDArray[np.complex128]:
    """
    f[l1, l2, r] = (f[l1, l2] - f[l2, r]) / (l1 - r) with (l1, l2) the closest pair.
    This is the psi rearrangement: the remote root only ever appears in
    differences against a root it is well separated from.
    """
    values = roots.as_array()
    pairs = [(0, 1, 2), (0, 2, 1), (1, 2, 0)]
    first, second, remote = min(pairs, key=lambda ijk: abs(values[ijk[0]] - values[ijk[1]]))
    l1, l2, r = values[first], values[second], values[remote]
    if l1 == r:
        return _cluster_taylor(t, y, d, roots)
    inner = _pair_difference(t, y, d, complex(l1), complex(l2))
    outer = (_f_values(t, y, d, l2) - _f_values(t, y, d, r)) / (l2 - r)
    return (inner - outer) / (l1 - r)


def _phi_triple(
    t: npt.NDArray[np.float64], y: Any, d: float, roots: RootTriple
) -> npt.NDArray[np.complex128]:
    """
    Near a triple root. With alpha real and gamma = conj(beta),

        Phi = Re Q + (Re beta / Im beta) Im Q,   Q = (p(beta) - p(alpha)) / (beta - alpha),

    where p(lambda) = Phi_lambda. Three real roots use nested divided
    differences. Once the cluster is tight on the scale of z, the centroid
    Taylor expansion takes over.
    """
    shape = np.broadcast(t, y).shape
    if roots.kind is RootKind.TRIPLE_ROOT:
        return np.broadcast_to(_cluster_taylor(t, y, d, roots), shape)

    spread = max(roots.pair_distances())
    tight = _scaled_separation(spread, t, y, d, roots.centroid) < TAYLOR_SEPARATION
    result = np.zeros(shape, dtype=np.complex128)
    if np.any(tight):
        result = np.where(tight, _cluster_taylor(t, y, d, roots), result)
    if np.all(tight):
        return result

    if roots.kind is RootKind.ONE_REAL_CONJUGATE_PAIR:
        alpha, beta = roots.alpha, roots.beta
        p_alpha = _p_values(t, y, d, alpha)
        p_beta = _p_values(t, y, d, beta)
        quotient = (p_beta - p_alpha) / (beta - alpha)
        split = quotient.real + (beta.real / beta.imag) * quotient.imag
        loose = split.astype(np.complex128)
    else:
        loose = _phi_double(t, y, d, roots)
    return np.where(tight, result, loose)


def select_branch(roots: RootTriple, regime: Regime | None = None) -> PhiBranch:
    """
    Choose the evaluation branch for a root triple.

    Guard intervals of the regime take precedence. Outside them, the roots
    themselves decide: a pair closer than CLUSTER_SEPARATION (relative to the
    root scale) selects the double branch, two such pairs the triple branch.
    """
    if roots.kind is RootKind.TRIPLE_ROOT:
        return PhiBranch.TRIPLE
    if regime is not None:
        guard = regime.guard_interval_for(roots.delta)
        if guard is not None:
            return PhiBranch.TRIPLE if guard.triple else PhiBranch.DOUBLE
    if roots.kind is RootKind.DOUBLE_ROOT:
        return PhiBranch.DOUBLE

    limit = CLUSTER_SEPARATION * (1.0 + roots.scale)
    close = sum(distance <= limit for distance in roots.pair_distances())
    if close >= 2:
        return PhiBranch.TRIPLE
    if close == 1:
        return PhiBranch.DOUBLE
    return PhiBranch.DIRECT


_BRANCHES = {
    PhiBranch.DIRECT: _phi_direct,
    PhiBranch.DOUBLE: _phi_double,
    PhiBranch.TRIPLE: _phi_triple,
}


def phi_values(
    t: npt.ArrayLike,
    y: npt.ArrayLike,
    roots: RootTriple,
    d: float,
    branch: PhiBranch | str | None = None,
) -> npt.NDArray[np.float64]:
    """
    Phi for one root triple at many (t, y).

    Parameters
    ----------
    t : array_like
        Positive times.
    y : array_like
        Nonnegative depths, broadcast against t.
    roots : RootTriple
        Roots of P_delta.
    d : float
        Field diffusivity.
    branch : PhiBranch or str, optional
        Evaluation branch. Chosen from the roots alone when omitted.

    Returns
    -------
    ndarray
        Real values of Phi with the broadcast shape of (t, y). A RealnessWarning
        is issued when the imaginary residue exceeds
        REALNESS_TOL * (1 + |Phi|) before projection.
    """
    t_arr = np.asarray(t, dtype=np.float64)
    y_arr = np.asarray(y, dtype=np.float64)
    if np.any(t_arr <= 0) or not np.all(np.isfinite(t_arr)):
        raise DomainError("Phi needs finite positive times")
    if np.any(y_arr < 0):
        raise DomainError("Phi needs nonnegative depths")

    chosen = PhiBranch(branch) if branch is not None else select_branch(roots)
    values = np.broadcast_to(_BRANCHES[chosen](t_arr, y_arr, d, roots), np.broadcast(t_arr, y_arr).shape)

    residue = np.abs(values.imag)
    bound = REALNESS_TOL * (1.0 + np.abs(values.real))
    if np.any(residue > bound):
        worst = float(np.max(residue - bound))
        warnings.warn(
            f"Phi kept an imaginary residue {worst:.3g} above its bound at delta = "
            f"{roots.delta!r} ({chosen.value} branch)",
            category=RealnessWarning,
            stacklevel=2,
        )
    return np.array(values.real)


def phi_compensated(pt: PhiEvalPoint, params: ModelParams, regime: Regime) -> float:
    """
    Phi(t, xi, y) at a single point, with the branch chosen from the regime's
    guard intervals.

    Parameters
    ----------
    pt : PhiEvalPoint
        Time, depth and delta.
    params : ModelParams
        Physical constants.
    regime : Regime
        Regime of `params`, from `classify_regime`.

    Returns
    -------
    float
    """
    roots = solve_p_delta(params, pt.delta)
    branch = select_branch(roots, regime)
    return float(phi_values(pt.t, pt.y, roots, params.d, branch))


def default_delta_grid(params: ModelParams, regime: Regime) -> npt.NDArray[np.float64]:
    """
    Log grid over [0, 10 * delta_inf] plus points within 1e-6 of every singular
    delta, where delta_inf is the largest singular value or, if there is none,
    A^2 d.
    """
    top = max(list(regime.singular_deltas) + [params.s**2])
    grid = [0.0, *np.geomspace(top * 1e-6, 10.0 * top, 120)]
    for delta in regime.singular_deltas:
        grid.extend([delta - 1e-6, delta, delta + 1e-6])
    return np.unique(np.array([g for g in grid if g >= 0.0]))


def sup_phi_scan(
    t: float,
    params: ModelParams,
    delta_grid: npt.ArrayLike | None = None,
    y_grid: npt.ArrayLike | None = None,
) -> float:
    """
    Empirical S(t): the maximum of |Phi| over a (delta, y) grid.

    Parameters
    ----------
    t : float
        Time.
    params : ModelParams
        Physical constants.
    delta_grid, y_grid : array_like, optional
        Nonempty grids. Default to `default_delta_grid` and 26 depths in [0, 50].

    Returns
    -------
    float
    """
    regime = classify_regime(params)
    deltas = default_delta_grid(params, regime) if delta_grid is None else np.asarray(delta_grid)
    ys = np.linspace(0.0, 50.0, 26) if y_grid is None else np.asarray(y_grid, dtype=np.float64)
    if deltas.size == 0 or ys.size == 0:
        raise DomainError("sup_phi_scan needs nonempty grids")

    times = np.full(ys.shape, float(t))
    best = 0.0
    for delta in deltas:
        roots = solve_p_delta(params, float(delta))
        branch = select_branch(roots, regime)
        best = max(best, float(np.max(np.abs(phi_values(times, ys, roots, params.d, branch)))))
    logger.debug("S(%g) = %.6g over %d deltas and %d depths", t, best, deltas.size, ys.size)
    return best if math.isfinite(best) else math.inf
