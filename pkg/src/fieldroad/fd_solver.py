"""
Copyright 2022 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
SPDX-License-Identifier: Apache-2.0

Explicit finite-difference solver for the field-road system on the box
(-2M, 2M) x (0, M) with zero-flux artificial boundaries:

    v_t = d Lap v                   in the field,
    -d v_y = mu u - nu v            on the road y = 0,
    u_t = D u_xx + nu v - mu u      on the road.

Nodes are x_i = -2M + i h and y_j = j h. The exchange condition enters through
the ghost value v_{i,-1} = v_{i,1} + (2h/d)(mu u_i - nu v_{i,0}); every other
boundary is mirrored. With trapezoidal weights the discrete mass is conserved
exactly.
"""

import logging
import math
import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Annotated

import numpy as np
import numpy.typing as npt
import pydantic
from scipy import signal

from .cubic import ModelParams
from .exceptions import BoundaryReachWarning, DomainError, InstabilityError
from .semi_analytic import InitialData, RoadProfile, ScalarField2D
from .utils import SIMULATION_DEFAULTS

logger = logging.getLogger(__name__)

BLOW_UP_FACTOR = 1e6
SIGN_FLOOR = 1e-10
BUMP_PROMINENCE = 0.05

PositiveFinite = Annotated[float, pydantic.Field(gt=0, allow_inf_nan=False)]


class SimConfig(pydantic.BaseModel):
    """
    A finite-difference run.

    M is the box half-scale, h the grid spacing (same in x and y), t_end the
    final time and record_every the diagnostic sampling period.
    """

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)

    params: ModelParams
    M: PositiveFinite
    h: PositiveFinite
    t_end: PositiveFinite
    cfl_safety: Annotated[float, pydantic.Field(gt=0, le=1)] = SIMULATION_DEFAULTS["cfl_safety"]
    record_every: PositiveFinite = SIMULATION_DEFAULTS["record_every"]
    data: InitialData

    @pydantic.model_validator(mode="after")
    def _check_grid(self) -> "SimConfig":
        ratio = self.M / self.h
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValueError(f"M / h must be an integer, got {ratio!r}")
        v0, u0 = self.data.v0, self.data.u0
        if v0.values.size:
            hx, hy = v0.spacing
            if (
                v0.x[0] - hx / 2 < -2 * self.M
                or v0.x[-1] + hx / 2 > 2 * self.M
                or v0.y[-1] + hy / 2 > self.M
            ):
                raise ValueError("The support of v0 must lie inside the box")
        if u0.values.size and (
            u0.x[0] - u0.spacing / 2 < -2 * self.M or u0.x[-1] + u0.spacing / 2 > 2 * self.M
        ):
            raise ValueError("The support of u0 must lie inside the road segment")
        return self

    @property
    def x(self) -> npt.NDArray[np.float64]:
        return -2.0 * self.M + self.h * np.arange(round(4 * self.M / self.h) + 1)

    @property
    def y(self) -> npt.NDArray[np.float64]:
        return self.h * np.arange(round(self.M / self.h) + 1)

    @property
    def dt(self) -> float:
        """
        Field step: the diffusive bound h^2/(4d) and the positivity bound of
        the road row, 1/(4d/h^2 + 2nu/h), scaled by cfl_safety.
        """
        d, nu, h = self.params.d, self.params.nu, self.h
        return self.cfl_safety * min(h * h / (4.0 * d), 1.0 / (4.0 * d / h**2 + 2.0 * nu / h))

    @property
    def road_substeps(self) -> int:
        """
        Number of road sub-steps per field step, so that each one respects
        1/(2D/h^2 + mu).
        """
        bound = self.cfl_safety / (2.0 * self.params.D / self.h**2 + self.params.mu)
        return max(1, math.ceil(self.dt / bound - 1e-12))


@dataclass(frozen=True)
class SimState:
    """
    Field density v on the box, road density u on the segment, at time t.
    """

    v: ScalarField2D
    u: RoadProfile
    t: float = 0.0


@dataclass(frozen=True)
class TimeSeriesRecord:
    t: float
    sup_v: float
    sup_u: float
    total_mass: float
    flux: RoadProfile
    x0: float | None

    def flux_at(self, x: float = 0.0) -> float:
        return float(np.interp(x, self.flux.x, self.flux.values))


def _trapezoid_weights(n: int, lower_edge: bool = True) -> npt.NDArray[np.float64]:
    weights = np.ones(n)
    if lower_edge:
        weights[0] = 0.5
    weights[-1] = 0.5
    return weights


def initial_state(config: SimConfig) -> SimState:
    """
    Control-volume averages of the initial data on the grid of `config`.
    """
    v, u = config.data.sample_on_nodes(config.x, config.y, config.h)
    origin = (-2.0 * config.M, 0.0)
    return SimState(
        ScalarField2D(v, origin, (config.h, config.h)),
        RoadProfile(u, -2.0 * config.M, config.h),
        0.0,
    )


def _mass(v: npt.NDArray[np.float64], u: npt.NDArray[np.float64], h: float) -> float:
    wx = _trapezoid_weights(v.shape[0])
    wy = _trapezoid_weights(v.shape[1])
    return float(h * h * (wx @ v @ wy) + h * (wx @ u))


def total_mass(state: SimState, config: SimConfig) -> float:
    """
    h^2 sum w_ij v_ij + h sum w_i u_i with trapezoidal weights (one half on
    the edges of the box and on the road row).
    """
    return _mass(state.v.values, state.u.values, config.h)


def _advance(
    v: npt.NDArray[np.float64],
    u: npt.NDArray[np.float64],
    config: SimConfig,
    dt: float,
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    params, h = config.params, config.h
    d, D, mu, nu = params.d, params.D, params.mu, params.nu
    trace = v[:, 0].copy()

    substeps = config.road_substeps
    tau = dt / substeps
    u_sum = np.zeros_like(u)
    for _ in range(substeps):
        u_sum += u
        padded = np.pad(u, 1, mode="reflect")
        lap_u = (padded[2:] - 2.0 * u + padded[:-2]) / h**2
        u = u + tau * (D * lap_u + nu * trace - mu * u)
    u_mean = u_sum / substeps

    padded = np.pad(v, 1, mode="reflect")
    padded[1:-1, 0] = v[:, 1] + (2.0 * h / d) * (mu * u_mean - nu * trace)
    lap_v = (
        padded[2:, 1:-1] + padded[:-2, 1:-1] + padded[1:-1, 2:] + padded[1:-1, :-2] - 4.0 * v
    ) / h**2
    return v + dt * d * lap_v, u


def _check_stability(
    v: npt.NDArray[np.float64], u: npt.NDArray[np.float64], limit: float, t: float
) -> None:
    largest = max(float(np.max(np.abs(v))), float(np.max(np.abs(u))))
    if not math.isfinite(largest) or largest > limit:
        raise InstabilityError(
            f"Finite-difference solution blew up at t = {t:.6g} (max |value| = {largest:.3g})"
        )


def _blow_up_limit(config: SimConfig) -> float:
    return BLOW_UP_FACTOR * max(config.data.sup, 1.0)


def step(state: SimState, config: SimConfig) -> SimState:
    """
    One explicit Euler step of length config.dt.

    The road is advanced first with config.road_substeps sub-steps against the
    frozen road-row trace of v; the field then sees the mean of the road
    values the sub-steps used.

    Raises
    ------
    InstabilityError
        If a value is not finite or exceeds 1e6 times the initial sup.
    """
    v, u = _advance(state.v.values, state.u.values, config, config.dt)
    t = state.t + config.dt
    _check_stability(v, u, _blow_up_limit(config), t)
    return SimState(
        ScalarField2D(v, state.v.origin, state.v.spacing),
        RoadProfile(u, state.u.origin, state.u.spacing),
        t,
    )


def flux_profile(state: SimState, params: ModelParams) -> RoadProfile:
    """
    F(t, x) = mu u - nu v|_{y=0}, the flux entering the field.
    """
    values = params.mu * state.u.values - params.nu * state.v.values[:, 0]
    return RoadProfile(values, state.u.origin, state.u.spacing)


def rightmost_sign_change(profile: RoadProfile, floor: float = SIGN_FLOOR) -> float | None:
    """
    Largest x where the profile changes sign, by linear interpolation between
    the bracketing nodes. Values below floor * max |F| are ignored. None when
    the profile keeps one sign.
    """
    values = profile.values
    if not values.size:
        return None
    significant = np.flatnonzero(np.abs(values) > floor * np.max(np.abs(values)))
    if significant.size < 2:
        return None
    signs = np.sign(values[significant])
    changes = np.flatnonzero(signs[1:] != signs[:-1])
    if not changes.size:
        return None
    left, right = significant[changes[-1]], significant[changes[-1] + 1]
    x = profile.x
    f_left, f_right = values[left], values[right]
    return float(x[left] - f_left * (x[right] - x[left]) / (f_right - f_left))


def fit_decay_rate(series: Sequence[tuple[float, float]]) -> tuple[float, float, float]:
    """
    Least-squares line through (ln t, ln value).

    Parameters
    ----------
    series : sequence of (t, value)
        At least 8 samples with t > 0 and value > 0.

    Returns
    -------
    (slope, intercept, max_residual)
    """
    data = np.asarray(series, dtype=np.float64).reshape(-1, 2)
    if data.shape[0] < 8:
        raise DomainError(f"fit_decay_rate needs at least 8 samples, got {data.shape[0]}")
    if np.any(data[:, 0] <= 0) or np.any(data[:, 1] <= 0):
        raise DomainError("fit_decay_rate needs positive times and values")
    log_t, log_value = np.log(data[:, 0]), np.log(data[:, 1])
    slope, intercept = np.polyfit(log_t, log_value, 1)
    residual = log_value - (slope * log_t + intercept)
    return float(slope), float(intercept), float(np.max(np.abs(residual)))


def count_flux_bumps(
    profile: RoadProfile, window: float | None = None, prominence: float = BUMP_PROMINENCE
) -> int:
    """
    Number of bumps of F in |x| <= window: local maxima whose prominence is at
    least `prominence` times max |F| on the window.
    """
    x, values = profile.x, profile.values
    if window is not None:
        keep = np.abs(x) <= window
        values = values[keep]
    if not values.size:
        return 0
    scale = float(np.max(np.abs(values)))
    if scale == 0.0:
        return 0
    peaks, _ = signal.find_peaks(values, prominence=prominence * scale)
    return int(peaks.size)


def _record(
    v: npt.NDArray[np.float64], u: npt.NDArray[np.float64], t: float, config: SimConfig
) -> TimeSeriesRecord:
    flux = RoadProfile(
        config.params.mu * u - config.params.nu * v[:, 0], -2.0 * config.M, config.h
    )
    return TimeSeriesRecord(
        t=t,
        sup_v=float(np.max(np.abs(v))),
        sup_u=float(np.max(np.abs(u))),
        total_mass=_mass(v, u, config.h),
        flux=flux,
        x0=rightmost_sign_change(flux),
    )


def simulate(
    config: SimConfig, progress: Callable[[TimeSeriesRecord], None] | None = None
) -> tuple[list[TimeSeriesRecord], SimState]:
    """
    Step from t = 0 to t_end, recording diagnostics at t = 0 and then every
    record_every. The step is shortened uniformly so that t_end is hit exactly.

    Returns
    -------
    (records, final_state)
    """
    params = config.params
    reach = math.sqrt(4.0 * max(params.d, params.D) * config.t_end)
    if reach > 1.5 * config.M:
        warnings.warn(
            f"Diffusive reach {reach:.3g} exceeds 1.5 M = {1.5 * config.M:.3g}; "
            "the artificial boundary will influence the solution",
            category=BoundaryReachWarning,
            stacklevel=2,
        )

    state = initial_state(config)
    v, u = state.v.values, state.u.values
    n_steps = max(1, math.ceil(config.t_end / config.dt - 1e-12))
    dt = config.t_end / n_steps
    limit = _blow_up_limit(config)
    logger.info(
        "Running %d steps of %.4g (%d road sub-steps) on a %dx%d grid",
        n_steps,
        dt,
        config.road_substeps,
        v.shape[0],
        v.shape[1],
    )

    records = [_record(v, u, 0.0, config)]
    next_record = config.record_every
    for n in range(1, n_steps + 1):
        v, u = _advance(v, u, config, dt)
        t = n * dt
        if t >= next_record - 1e-9 * config.record_every or n == n_steps:
            _check_stability(v, u, limit, t)
            records.append(_record(v, u, t, config))
            if progress:
                progress(records[-1])
            while next_record <= t + 1e-9 * config.record_every:
                next_record += config.record_every

    _check_stability(v, u, limit, config.t_end)
    final = SimState(
        ScalarField2D(v, state.v.origin, state.v.spacing),
        RoadProfile(u, state.u.origin, state.u.spacing),
        config.t_end,
    )
    return records, final


def run(config: SimConfig) -> list[TimeSeriesRecord]:
    """
    Records of a full run; the last one is at t_end.
    """
    return simulate(config)[0]
