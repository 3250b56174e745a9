"""
Copyright 2022 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
SPDX-License-Identifier: Apache-2.0

Random-walk estimates of the Robin half-line kernel.

A free walk X with variance 2 d dt per step is turned into the reflected walk
Y = X + L, where L = max(0, -min X) is the boundary local time in the
Skorokhod normalization. The running minimum of each step is drawn exactly
from the Brownian bridge between its endpoints. Weighting a path by
exp(-A L_t), with A = theta / (d (1 - theta)), yields the semigroup of
u_t = d u_yy with u_y = A u at y = 0, so the estimates carry no time-step bias.
"""

import logging
import math
from collections.abc import Sequence
from typing import Annotated, NamedTuple

import numpy as np
import numpy.typing as npt
import pydantic

from .exceptions import DomainError

logger = logging.getLogger(__name__)

Positive = Annotated[float, pydantic.Field(gt=0, allow_inf_nan=False)]
Depth = Annotated[float, pydantic.Field(ge=0, allow_inf_nan=False)]
Fraction = Annotated[float, pydantic.Field(ge=0, le=1)]
Count = Annotated[int, pydantic.Field(ge=1)]


class WalkEstimate(NamedTuple):
    value: float
    standard_error: float


class WalkDensity(NamedTuple):
    edges: npt.NDArray[np.float64]
    values: npt.NDArray[np.float64]
    standard_error: npt.NDArray[np.float64]


def _weights(
    theta: float, t: float, omega: float, d: float, paths: int, steps: int, seed: int | None
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """
    Final reflected positions and their survival weights.
    """
    rng = np.random.default_rng(seed)
    variance = 2.0 * d * t / steps
    position = np.full(paths, omega, dtype=np.float64)
    running_min = position.copy()
    for _ in range(steps):
        end = position + math.sqrt(variance) * rng.standard_normal(paths)
        uniform = 1.0 - rng.random(paths)
        bridge_min = 0.5 * (position + end - np.sqrt((end - position) ** 2 - 2.0 * variance * np.log(uniform)))
        np.minimum(running_min, bridge_min, out=running_min)
        position = end
    local_time = np.maximum(0.0, -running_min)

    if theta == 0.0:
        weights = np.ones(paths)
    elif theta == 1.0:
        weights = (local_time == 0.0).astype(np.float64)
    else:
        robin = theta / (d * (1.0 - theta))
        weights = np.exp(-robin * local_time)
    logger.debug(
        "Walked %d paths in %d steps; %.3g%% touched the boundary",
        paths,
        steps,
        100.0 * np.mean(local_time > 0.0),
    )
    return position + local_time, weights


@pydantic.validate_call
def robin_walk_survival(
    theta: Fraction,
    t: Positive,
    omega: Depth,
    d: Positive,
    paths: Count = 100_000,
    steps: Count = 1,
    seed: int | None = None,
) -> WalkEstimate:
    """
    Estimate of the mass integral_0^inf H_theta(t, y, omega) dy left at time t
    by a unit mass released at depth omega.
    """
    _, weights = _weights(theta, t, omega, d, paths, steps, seed)
    return WalkEstimate(float(np.mean(weights)), float(np.std(weights) / math.sqrt(paths)))


@pydantic.validate_call(config={"arbitrary_types_allowed": True})
def robin_walk_density(
    theta: Fraction,
    t: Positive,
    omega: Depth,
    d: Positive,
    y_edges: Sequence[float] | np.ndarray,
    paths: Count = 100_000,
    steps: Count = 1,
    seed: int | None = None,
) -> WalkDensity:
    """
    Histogram estimate of y -> H_theta(t, y, omega): the weighted fraction of
    paths ending in each bin divided by the bin width.
    """
    edges = np.asarray(y_edges, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0) or edges[0] < 0:
        raise DomainError("y_edges must be an increasing sequence of nonnegative depths")
    final, weights = _weights(theta, t, omega, d, paths, steps, seed)
    widths = np.diff(edges)
    sums, _ = np.histogram(final, bins=edges, weights=weights)
    squares, _ = np.histogram(final, bins=edges, weights=weights**2)
    mean = sums / paths
    variance = np.maximum(squares / paths - mean**2, 0.0)
    return WalkDensity(edges, mean / widths, np.sqrt(variance / paths) / widths)
