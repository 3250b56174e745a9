"""
Copyright 2022 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
SPDX-License-Identifier: Apache-2.0

Heat kernels: the Gaussian, the half-space kernels with Neumann, Dirichlet and
Robin boundary conditions, and the migration kernel Lambda (N = 2) obtained by
Fourier inversion of Phi.
"""

import logging
import math
from dataclasses import dataclass
from typing import Annotated, Any

import numpy as np
import numpy.typing as npt
import pydantic

from .cubic import ModelParams, Regime, solve_p_delta
from .exceptions import DomainError, QuadratureNotConverged
from .phi_kernel import phi_values, select_branch
from .special_functions import erfc_ratio
from .utils import QUADRATURE_DEFAULTS

logger = logging.getLogger(__name__)

# e^{-36.84} ~ 1e-16
GAUSSIAN_CUTOFF_EXPONENT = 36.84
SMALL_TIME = 1e-3


class HalfSpacePoint(pydantic.BaseModel):
    """
    A point (x, y) of the half-space: x holds the N - 1 tangential coordinates.
    """

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    x: tuple[float, ...]
    y: Annotated[float, pydantic.Field(ge=0, allow_inf_nan=False)]

    @pydantic.field_validator("x", mode="before")
    @classmethod
    def _scalar_to_tuple(cls, value: Any) -> Any:
        if isinstance(value, int | float):
            return (float(value),)
        return value


class QuadratureConfig(pydantic.BaseModel):
    """
    Settings of the xi quadrature behind Lambda and of the Duhamel time mesh.
    """

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    xi_max: Annotated[float, pydantic.Field(gt=0, allow_inf_nan=False)] | None = QUADRATURE_DEFAULTS["xi_max"]
    panels: Annotated[int, pydantic.Field(gt=0)] = QUADRATURE_DEFAULTS["panels"]
    nodes_per_panel: Annotated[int, pydantic.Field(gt=0)] = QUADRATURE_DEFAULTS["nodes_per_panel"]
    tol: Annotated[float, pydantic.Field(gt=0, le=1e-2)] = QUADRATURE_DEFAULTS["tol"]
    graded_time_exponent: Annotated[float, pydantic.Field(ge=1, allow_inf_nan=False)] = QUADRATURE_DEFAULTS["graded_time_exponent"]
    time_nodes: Annotated[int, pydantic.Field(gt=0)] = QUADRATURE_DEFAULTS["time_nodes"]
    max_panels: Annotated[int, pydantic.Field(gt=0)] = QUADRATURE_DEFAULTS["max_panels"]


def gauss_kernel(t: float, x: npt.ArrayLike, diffusivity: float, dim: int) -> Any:
    """
    (4 pi diffusivity t)^(-dim/2) exp(-|x|^2 / (4 diffusivity t)).

    For dim = 1 every entry of `x` is a point; for dim >= 2 the last axis of
    `x` holds the coordinates.
    """
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    if dim < 1:
        raise DomainError(f"dim must be at least 1, got {dim}")
    arr = np.asarray(x, dtype=np.float64)
    squared = arr**2 if dim == 1 else np.sum(arr**2, axis=-1)
    value = (4.0 * math.pi * diffusivity * t) ** (-dim / 2.0) * np.exp(
        -squared / (4.0 * diffusivity * t)
    )
    return float(value) if np.ndim(value) == 0 else value


def robin_kernel_1d(
    theta: float, t: float, y: npt.ArrayLike, omega: npt.ArrayLike, d: float
) -> Any:
    """
    Heat kernel of the half-line with theta u - (1 - theta) d u_y = 0 at y = 0.

    theta = 0 is the Neumann image sum, theta = 1 the Dirichlet image
    difference. In between, with A = theta / (d (1 - theta)),

        H = g(y - omega) + g(y + omega)
            - A exp(-(y + omega)^2 / (4 d t)) R((2 A d t + y + omega) / (2 sqrt(d t))).
    """
    if not 0.0 <= theta <= 1.0:
        raise DomainError(f"theta must lie in [0, 1], got {theta}")
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    y_arr = np.asarray(y, dtype=np.float64)
    omega_arr = np.asarray(omega, dtype=np.float64)
    direct = gauss_kernel(t, y_arr - omega_arr, d, 1)
    image = gauss_kernel(t, y_arr + omega_arr, d, 1)

    if theta == 0.0:
        value = direct + image
    elif theta == 1.0:
        value = direct - image
    else:
        robin = theta / (d * (1.0 - theta))
        reach = y_arr + omega_arr
        argument = (2.0 * robin * d * t + reach) / (2.0 * math.sqrt(d * t))
        correction = robin * np.exp(-(reach**2) / (4.0 * d * t)) * np.real(erfc_ratio(argument))
        value = direct + image - correction
    return float(value) if np.ndim(value) == 0 else value


def half_space_kernel(
    theta: float,
    t: float,
    X: HalfSpacePoint,
    Z: HalfSpacePoint,
    d: float,
    dim: int,
) -> float:
    """
    H_theta(t, X, Z): the tangential Gaussian in dimension N - 1 times the
    half-line kernel of `robin_kernel_1d`.
    """
    if len(X.x) != dim - 1 or len(Z.x) != dim - 1:
        raise DomainError(f"Tangential coordinates must have length {dim - 1}")
    offset = np.subtract(X.x, Z.x)
    tangential = gauss_kernel(t, offset, d, dim - 1) if dim > 1 else 1.0
    return float(tangential * robin_kernel_1d(theta, t, X.y, Z.y, d))


def xi_max_for(t: float, params: ModelParams, quad: QuadratureConfig) -> float:
    """
    Fourier truncation: quad.xi_max when set, otherwise the xi where
    exp(-min(d, D) t xi^2) drops to 1e-16.

    Raises
    ------
    QuadratureNotConverged
        For t < 1e-3 without an explicit xi_max.
    """
    if quad.xi_max is not None:
        return quad.xi_max
    if t < SMALL_TIME:
        raise QuadratureNotConverged(
            f"t = {t!r} is below {SMALL_TIME}; the xi support grows like t^(-1/2). "
            "Set quad.xi_max explicitly"
        )
    return math.sqrt(GAUSSIAN_CUTOFF_EXPONENT / (min(params.d, params.D) * t))


def _breakpoints(params: ModelParams, regime: Regime, upper: float) -> list[float]:
    gap = params.D - params.d
    if gap == 0.0:
        return []
    deltas = regime.singular_deltas if gap > 0 else regime.negative_singular_deltas
    points = [math.sqrt(delta / gap) for delta in deltas if delta / gap > 0]
    return sorted(p for p in points if 0.0 < p < upper)


def xi_nodes(
    t: float,
    params: ModelParams,
    regime: Regime,
    quad: QuadratureConfig,
    panels: int | None = None,
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """
    Composite Gauss-Legendre nodes and weights on [0, xi_max].

    The interval is cut into `panels` equal panels (quad.panels by default),
    with extra cuts at the xi values mapped to singular deltas,
    xi_i = sqrt(delta_i / (D - d)).
    """
    upper = xi_max_for(t, params, quad)
    count = quad.panels if panels is None else panels
    cuts = np.union1d(np.linspace(0.0, upper, count + 1), _breakpoints(params, regime, upper))
    reference, reference_weights = np.polynomial.legendre.leggauss(quad.nodes_per_panel)

    left, right = cuts[:-1, None], cuts[1:, None]
    half = 0.5 * (right - left)
    nodes = (left + half * (reference[None, :] + 1.0)).ravel()
    weights = (half * reference_weights[None, :]).ravel()
    return nodes, weights


def phi_on_nodes(
    times: npt.ArrayLike,
    y: npt.ArrayLike,
    nodes: npt.NDArray[np.float64],
    params: ModelParams,
    regime: Regime,
) -> npt.NDArray[np.float64]:
    """
    Phi(t, xi, y) for every xi node (rows) and every (t, y) pair (columns).
    Roots are solved once per node.
    """
    gap = params.D - params.d
    t_arr, y_arr = (
        np.ravel(arr)
        for arr in np.broadcast_arrays(
            np.atleast_1d(np.asarray(times, dtype=np.float64)), np.asarray(y, dtype=np.float64)
        )
    )
    out = np.empty((nodes.size, t_arr.size))
    for k, xi in enumerate(nodes):
        roots = solve_p_delta(params, gap * float(xi) ** 2)
        branch = select_branch(roots, regime)
        out[k] = phi_values(t_arr, y_arr, roots, params.d, branch)
    return out


@dataclass(frozen=True)
class LambdaProfile:
    """
    Lambda(t, x, y) on a set of x values, with the refinement error estimate.
    """

    xs: npt.NDArray[np.float64]
    values: npt.NDArray[np.float64]
    error_estimate: float
    panels: int


def _integrate(
    t: float,
    xs: npt.NDArray[np.float64],
    y: float,
    params: ModelParams,
    regime: Regime,
    quad: QuadratureConfig,
    panels: int,
) -> tuple[npt.NDArray[np.float64], float]:
    nodes, weights = xi_nodes(t, params, regime, quad, panels)
    phi = phi_on_nodes(t, y, nodes, params, regime)[:, 0]
    integrand = weights * phi * np.exp(-params.d * t * nodes**2)
    values = np.cos(np.outer(xs, nodes)) @ integrand
    return values, float(np.sum(np.abs(integrand)))


def lambda_kernel_profile(
    t: float,
    xs: npt.ArrayLike,
    y: float,
    params: ModelParams,
    regime: Regime,
    quad: QuadratureConfig | None = None,
) -> LambdaProfile:
    """
    Lambda(t, x, y) for many x at once,

        Lambda = (1/pi) exp(-y^2 / (4 d t)) int_0^xi_max Phi(t, xi, y) exp(-d t xi^2) cos(xi x) dxi.

    The panel count doubles until successive estimates differ by at most
    quad.tol times max(|Lambda|, the L1 norm of the integrand).

    Raises
    ------
    DomainError
        If params.dim != 2.
    QuadratureNotConverged
        If quad.max_panels is reached first.
    """
    quad = quad or QuadratureConfig()
    if params.dim != 2:
        raise DomainError("Lambda is only available for N = 2")
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    if y < 0:
        raise DomainError(f"y must be nonnegative, got {y}")
    x_arr = np.atleast_1d(np.asarray(xs, dtype=np.float64))

    panels = quad.panels
    error = math.inf
    previous, _ = _integrate(t, x_arr, y, params, regime, quad, panels)
    while True:
        panels *= 2
        if panels > quad.max_panels:
            raise QuadratureNotConverged(
                f"Lambda quadrature at t = {t!r}, y = {y!r} did not reach tol = {quad.tol} "
                f"within {quad.max_panels} panels (last change {error:.3g})",
                achieved_error=error,
            )
        current, l1 = _integrate(t, x_arr, y, params, regime, quad, panels)
        error = float(np.max(np.abs(current - previous)))
        scale = max(float(np.max(np.abs(current))), l1)
        logger.debug("Lambda at t=%g, y=%g: %d panels, change %.3g", t, y, panels, error)
        if error <= quad.tol * scale:
            break
        previous = current

    prefactor = math.exp(-(y**2) / (4.0 * params.d * t)) / math.pi
    return LambdaProfile(
        xs=x_arr, values=prefactor * current, error_estimate=prefactor * error, panels=panels
    )


def lambda_kernel(
    t: float,
    x: float,
    y: float,
    params: ModelParams,
    regime: Regime,
    quad: QuadratureConfig | None = None,
) -> float:
    """
    Migration kernel Lambda(t, x, y) for N = 2.

    Parameters
    ----------
    t : float
        Time, t > 0 (t >= 1e-3 unless quad.xi_max is set).
    x : float
        Road coordinate.
    y : float
        Depth, y >= 0.
    params : ModelParams
        Physical constants with dim = 2.
    regime : Regime
        Regime of `params`.
    quad : QuadratureConfig, optional
        Quadrature settings.

    Returns
    -------
    float
    """
    return float(lambda_kernel_profile(t, [x], y, params, regime, quad).values[0])
