"""
Copyright 2022 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
SPDX-License-Identifier: Apache-2.0

Evaluation of the explicit solution (v, u) of the field-road system for N = 2:

    v = V + (mu / sqrt(d)) Lambda(t) *_x u0
          + (mu nu / sqrt(d)) int_0^t Lambda(s) *_x V|_{y=0}(t - s) ds,
    u = exp(-mu t) U + nu int_0^t exp(-mu (t - s)) G_D(t - s) *_x v|_{y=0}(s) ds.

Initial data are piecewise constant on uniform cells (values are cell values,
the grid origin is the centre of the first cell). Every x-convolution is done
in the Fourier variable that defines Lambda: the data enter through their
exact cell transforms, and the depth integrals against the Robin kernel are
taken in closed form.
"""

import logging
import math
import threading
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Annotated, Any

import numpy as np
import numpy.typing as npt
import pydantic
from scipy import special

from .cubic import ModelParams, Regime
from .exceptions import DomainError
from .kernels import HalfSpacePoint, QuadratureConfig, phi_on_nodes, xi_nodes
from .special_functions import erfc_ratio
from .utils import fingerprint

logger = logging.getLogger(__name__)

NonNegative = Annotated[float, pydantic.Field(ge=0, allow_inf_nan=False)]
Finite = Annotated[float, pydantic.Field(allow_inf_nan=False)]


@dataclass(frozen=True)
class ScalarField2D:
    """
    Samples of a field on a uniform grid. values[i, j] sits at
    (origin[0] + i spacing[0], origin[1] + j spacing[1]).
    """

    values: npt.NDArray[np.float64]
    origin: tuple[float, float]
    spacing: tuple[float, float]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DomainError(f"ScalarField2D needs a 2-D array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainError("ScalarField2D values must be finite")
        if min(self.spacing) <= 0:
            raise DomainError(f"Grid spacing must be positive, got {self.spacing}")
        object.__setattr__(self, "values", values)

    @property
    def x(self) -> npt.NDArray[np.float64]:
        return self.origin[0] + self.spacing[0] * np.arange(self.values.shape[0])

    @property
    def y(self) -> npt.NDArray[np.float64]:
        return self.origin[1] + self.spacing[1] * np.arange(self.values.shape[1])


@dataclass(frozen=True)
class RoadProfile:
    """
    Samples of a function of x on a uniform grid: values[i] sits at
    origin + i spacing.
    """

    values: npt.NDArray[np.float64]
    origin: float
    spacing: float

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise DomainError(f"RoadProfile needs a 1-D array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainError("RoadProfile values must be finite")
        if self.spacing <= 0:
            raise DomainError(f"Grid spacing must be positive, got {self.spacing}")
        object.__setattr__(self, "values", values)

    @property
    def x(self) -> npt.NDArray[np.float64]:
        return self.origin + self.spacing * np.arange(self.values.size)


class Box(pydantic.BaseModel):
    """
    height * indicator of [x0, x1] x [y0, y1].
    """

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    x: tuple[Finite, Finite]
    y: tuple[NonNegative, NonNegative]
    height: NonNegative = 1.0

    @pydantic.model_validator(mode="after")
    def _check_order(self) -> "Box":
        if self.x[1] <= self.x[0] or self.y[1] <= self.y[0]:
            raise ValueError("Box corners must be given as [low, high] with low < high")
        return self


class Interval(pydantic.BaseModel):
    """
    height * indicator of [x0, x1] on the road.
    """

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    x: tuple[Finite, Finite]
    height: NonNegative = 1.0

    @pydantic.model_validator(mode="after")
    def _check_order(self) -> "Interval":
        if self.x[1] <= self.x[0]:
            raise ValueError("Interval ends must be given as [low, high] with low < high")
        return self


class DataSpec(pydantic.BaseModel):
    """
    Declarative initial data: unions of boxes for v0 and intervals for u0.
    `cell` is the cell size used to tabulate them.
    """

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    v0_boxes: tuple[Box, ...] = ()
    u0_intervals: tuple[Interval, ...] = ()
    cell: Annotated[float, pydantic.Field(gt=0, allow_inf_nan=False)] = 1.0

    def to_initial_data(self) -> "InitialData":
        return InitialData.from_boxes(self.v0_boxes, self.u0_intervals, self.cell)


def _overlap(
    low: npt.NDArray[np.float64],
    high: npt.NDArray[np.float64],
    start: float,
    stop: float,
) -> npt.NDArray[np.float64]:
    return np.clip(np.minimum(high, stop) - np.maximum(low, start), 0.0, None)


def _cover(lo: float, hi: float, spacing: float) -> tuple[float, int]:
    first = math.floor(lo / spacing + 1e-9)
    last = math.ceil(hi / spacing - 1e-9)
    return (first + 0.5) * spacing, max(last - first, 1)


def box_field(boxes: Sequence[Box], spacing: float) -> ScalarField2D:
    """
    Tabulate a union of boxes as cell values: each cell holds the mean of the
    data over it, so boxes aligned with the cells are reproduced exactly.
    An empty union gives an empty field.
    """
    if not boxes:
        return ScalarField2D(np.zeros((0, 0)), (0.0, 0.0), (spacing, spacing))
    x0, nx = _cover(min(b.x[0] for b in boxes), max(b.x[1] for b in boxes), spacing)
    y_lo = max(0.0, min(b.y[0] for b in boxes))
    y0, ny = _cover(y_lo, max(b.y[1] for b in boxes), spacing)
    xc = x0 + spacing * np.arange(nx)
    yc = y0 + spacing * np.arange(ny)
    values = np.zeros((nx, ny))
    for box in boxes:
        wx = _overlap(xc - spacing / 2, xc + spacing / 2, *box.x) / spacing
        wy = _overlap(yc - spacing / 2, yc + spacing / 2, *box.y) / spacing
        values += box.height * np.outer(wx, wy)
    return ScalarField2D(values, (float(x0), float(y0)), (spacing, spacing))


def interval_profile(intervals: Sequence[Interval], spacing: float) -> RoadProfile:
    """
    Tabulate a union of intervals as cell values (see `box_field`).
    """
    if not intervals:
        return RoadProfile(np.zeros(0), 0.0, spacing)
    x0, nx = _cover(min(i.x[0] for i in intervals), max(i.x[1] for i in intervals), spacing)
    xc = x0 + spacing * np.arange(nx)
    values = np.zeros(nx)
    for interval in intervals:
        values += interval.height * _overlap(xc - spacing / 2, xc + spacing / 2, *interval.x) / spacing
    return RoadProfile(values, float(x0), spacing)


@dataclass(frozen=True)
class InitialData:
    """
    Nonnegative, compactly supported initial data (v0, u0), piecewise constant
    on the cells of their grids.
    """

    v0: ScalarField2D
    u0: RoadProfile

    def __post_init__(self) -> None:
        if np.any(self.v0.values < 0) or np.any(self.u0.values < 0):
            raise DomainError("Initial data must be nonnegative")
        if self.v0.values.size and self.v0.origin[1] - self.v0.spacing[1] / 2 < -1e-12:
            raise DomainError("v0 cells must lie in the half-plane y >= 0")

    @classmethod
    def from_boxes(
        cls,
        v0_boxes: Sequence[Box | dict[str, Any]] = (),
        u0_intervals: Sequence[Interval | dict[str, Any]] = (),
        spacing: float = 1.0,
    ) -> "InitialData":
        boxes = [b if isinstance(b, Box) else Box(**b) for b in v0_boxes]
        intervals = [i if isinstance(i, Interval) else Interval(**i) for i in u0_intervals]
        return cls(box_field(boxes, spacing), interval_profile(intervals, spacing))

    @property
    def sup(self) -> float:
        return float(max(np.max(self.v0.values, initial=0.0), np.max(self.u0.values, initial=0.0)))

    def key(self) -> str:
        return fingerprint(
            self.v0.values, self.v0.origin, self.v0.spacing,
            self.u0.values, self.u0.origin, self.u0.spacing,
        )

    def field_cell_edges(self) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
        hx, hy = self.v0.spacing
        return self.v0.x - hx / 2, self.v0.y - hy / 2

    def sample_on_nodes(
        self, x_nodes: npt.NDArray[np.float64], y_nodes: npt.NDArray[np.float64], h: float
    ) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
        """
        Averages of (v0, u0) over the control volumes of a node grid with
        spacing h. Control volumes are clipped to the node range, so the
        trapezoidal mass of the samples equals the mass of the data.
        """
        def averages(nodes: npt.NDArray[np.float64], centers: npt.NDArray[np.float64],
                     spacing: float) -> npt.NDArray[np.float64]:
            low = np.maximum(nodes - h / 2, nodes[0])
            high = np.minimum(nodes + h / 2, nodes[-1])
            width = high - low
            cells_lo = centers - spacing / 2
            cells_hi = centers + spacing / 2
            overlap = np.clip(
                np.minimum(high[:, None], cells_hi[None, :]) - np.maximum(low[:, None], cells_lo[None, :]),
                0.0,
                None,
            )
            return overlap / width[:, None]

        if self.v0.values.size:
            wx = averages(x_nodes, self.v0.x, self.v0.spacing[0])
            wy = averages(y_nodes, self.v0.y, self.v0.spacing[1])
            v = wx @ self.v0.values @ wy.T
        else:
            v = np.zeros((x_nodes.size, y_nodes.size))
        if self.u0.values.size:
            u = averages(x_nodes, self.u0.x, self.u0.spacing) @ self.u0.values
        else:
            u = np.zeros(x_nodes.size)
        return v, u


def graded_time_mesh(
    t: float, nodes: int, exponent: float = 2.0
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """
    Quadrature on [0, t] graded towards both ends.

    Each half of the interval carries Gauss-Legendre nodes in tau mapped by
    s = (t/2) tau^exponent from its outer end, which turns the sqrt-type
    endpoint behaviour of the Duhamel integrands into smooth integrands.

    Returns
    -------
    (s, weights)
        Increasing nodes in (0, t) and their weights.
    """
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    half = max(1, (nodes + 1) // 2)
    tau, w = np.polynomial.legendre.leggauss(half)
    tau = 0.5 * (tau + 1.0)
    w = 0.5 * w
    offsets = 0.5 * t * tau**exponent
    weights = 0.5 * t * w * exponent * tau ** (exponent - 1.0)
    s = np.concatenate([offsets, t - offsets[::-1]])
    return s, np.concatenate([weights, weights[::-1]])


def _erf_cells(
    points: npt.NDArray[np.float64], edges_lo: npt.NDArray[np.float64],
    edges_hi: npt.NDArray[np.float64], scale: npt.NDArray[np.float64],
) -> npt.NDArray[np.float64]:
    """
    int over [lo, hi] of the Gaussian g(p - q) dq, for broadcastable arrays.
    """
    return 0.5 * (special.erf((points - edges_lo) / scale) - special.erf((points - edges_hi) / scale))


def _robin_tail(reach: npt.NDArray[np.float64], r: npt.NDArray[np.float64], d: float, robin: float) -> npt.NDArray[np.float64]:
    """
    E(Y) = exp(-Y^2 / (4 d r)) R((Y + 2 A d r) / (2 sqrt(d r))); the Robin
    correction of the half-line kernel integrates to differences of E.
    """
    scale = 2.0 * np.sqrt(d * r)
    return np.exp(-(reach**2) / (4.0 * d * r)) * np.real(erfc_ratio((reach + 2.0 * robin * d * r) / scale))


def depth_weights(
    r: npt.ArrayLike, y: float, grid: ScalarField2D, params: ModelParams
) -> npt.NDArray[np.float64]:
    """
    Integrals of the Robin half-line kernel (theta = nu / (1 + nu)) over each
    depth cell of `grid`, at times r (rows) and depth y:

        int_cell H(r, y, omega) domega
            = int_cell [g(y - omega) - g(y + omega)] domega + E(y + omega_lo) - E(y + omega_hi).
    """
    r_arr = np.atleast_1d(np.asarray(r, dtype=np.float64))[:, None]
    hy = grid.spacing[1]
    lo = (grid.y - hy / 2)[None, :]
    hi = (grid.y + hy / 2)[None, :]
    scale = 2.0 * np.sqrt(params.d * r_arr)
    dirichlet = _erf_cells(y, lo, hi, scale) - _erf_cells(-y, lo, hi, scale)
    robin = params.A
    return dirichlet + _robin_tail(y + lo, r_arr, params.d, robin) - _robin_tail(y + hi, r_arr, params.d, robin)


def _tangential_weights(
    t: float, xs: npt.NDArray[np.float64], centers: npt.NDArray[np.float64],
    spacing: float, diffusivity: float,
) -> npt.NDArray[np.float64]:
    scale = 2.0 * math.sqrt(diffusivity * t)
    return _erf_cells(xs[:, None], (centers - spacing / 2)[None, :], (centers + spacing / 2)[None, :], scale)


def _cell_spectrum(xi: npt.NDArray[np.float64], centers: npt.NDArray[np.float64], spacing: float) -> npt.NDArray[np.complex128]:
    """
    Fourier transforms int_cell exp(-i xi x) dx of every cell (columns) at xi (rows).
    """
    sinc = spacing * np.sinc(xi * spacing / (2.0 * math.pi))
    return sinc[:, None] * np.exp(-1j * np.outer(xi, centers))


def solve_V_many(t: float, xs: npt.ArrayLike, y: float, data: InitialData, params: ModelParams) -> npt.NDArray[np.float64]:
    """
    V(t, x, y) for many x: v0 propagated by the Robin half-plane kernel alone.
    """
    x_arr = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    grid = data.v0
    if not grid.values.size:
        return np.zeros(x_arr.size)
    along = _tangential_weights(t, x_arr, grid.x, grid.spacing[0], params.d)
    across = depth_weights(t, y, grid, params)[0]
    return along @ grid.values @ across


def solve_V(t: float, X: HalfSpacePoint, data: InitialData, params: ModelParams) -> float:
    """
    Solution of the Robin problem nu V - d V_y = 0 at y = 0 started from v0.

    Parameters
    ----------
    t : float
        Time, t > 0.
    X : HalfSpacePoint
        Evaluation point.
    data : InitialData
        Initial data.
    params : ModelParams
        Physical constants.
    """
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    return float(solve_V_many(t, [X.x[0]], X.y, data, params)[0])


def solve_U_many(t: float, xs: npt.ArrayLike, data: InitialData, params: ModelParams) -> npt.NDArray[np.float64]:
    x_arr = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    road = data.u0
    if not road.values.size:
        return np.zeros(x_arr.size)
    return _tangential_weights(t, x_arr, road.x, road.spacing, params.D) @ road.values


def solve_U(t: float, x: float, data: InitialData, params: ModelParams) -> float:
    """
    Free heat flow of u0 on the road with diffusivity D.
    """
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    return float(solve_U_many(t, [x], data, params)[0])


class TraceCache:
    """
    Spectra of the road trace v|_{y=0}(s, xi), one entry per time node, keyed
    by a fingerprint of (data, params, quadrature, xi nodes, s). Reads are
    shared; each entry is written once.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._store: dict[str, npt.NDArray[np.complex128]] = {}
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self._store)

    def __contains__(self, key: str) -> bool:
        return key in self._store

    def get(self, key: str) -> npt.NDArray[np.complex128] | None:
        with self._lock:
            found = self._store.get(key)
            if found is None:
                self.misses += 1
            else:
                self.hits += 1
            return found

    def put(self, key: str, value: npt.NDArray[np.complex128]) -> npt.NDArray[np.complex128]:
        value.setflags(write=False)
        with self._lock:
            return self._store.setdefault(key, value)

    def clear(self) -> None:
        with self._lock:
            self._store.clear()
            self.hits = self.misses = 0


TRACE_CACHE = TraceCache()


@dataclass
class _Spectral:
    """
    Everything the Fourier representation needs at one target time t.
    """

    t: float
    data: InitialData
    params: ModelParams
    regime: Regime
    quad: QuadratureConfig
    nodes: npt.NDArray[np.float64] = field(init=False)
    weights: npt.NDArray[np.float64] = field(init=False)
    road_hat: npt.NDArray[np.complex128] = field(init=False)
    field_hat: npt.NDArray[np.complex128] = field(init=False)

    def __post_init__(self) -> None:
        self.nodes, self.weights = xi_nodes(self.t, self.params, self.regime, self.quad)
        road = self.data.u0
        if road.values.size:
            self.road_hat = _cell_spectrum(self.nodes, road.x, road.spacing) @ road.values
        else:
            self.road_hat = np.zeros(self.nodes.size, dtype=np.complex128)
        v0 = self.data.v0
        if v0.values.size:
            self.field_hat = _cell_spectrum(self.nodes, v0.x, v0.spacing[0]) @ v0.values
        else:
            self.field_hat = np.zeros((self.nodes.size, 0), dtype=np.complex128)

    @property
    def exchange(self) -> float:
        return self.params.mu / math.sqrt(self.params.d)

    def key(self) -> str:
        return fingerprint(
            self.data.key(),
            self.params.model_dump(),
            self.quad.model_dump(),
            self.nodes,
        )

    def v_hat(self, r: npt.NDArray[np.float64], y: float) -> npt.NDArray[np.complex128]:
        """
        x-transform of V(r, ., y): columns are times.
        """
        if not self.field_hat.shape[1]:
            return np.zeros((self.nodes.size, r.size), dtype=np.complex128)
        across = depth_weights(r, y, self.data.v0, self.params)
        damping = np.exp(-self.params.d * np.outer(self.nodes**2, r))
        return damping * (self.field_hat @ across.T)

    def lambda_hat(self, times: npt.NDArray[np.float64], y: float) -> npt.NDArray[np.float64]:
        """
        exp(-y^2 / (4 d s)) Phi(s, xi, y) exp(-d s xi^2): columns are times.
        """
        d = self.params.d
        phi = phi_on_nodes(times, y, self.nodes, self.params, self.regime)
        return phi * np.exp(-(y**2) / (4.0 * d * times))[None, :] * np.exp(-d * np.outer(self.nodes**2, times))

    def duhamel_hat(self, times: npt.NDArray[np.float64], y: float) -> npt.NDArray[np.complex128]:
        """
        Q(s, xi, y) = int_0^s Lambda(sigma) V|_{y=0}(s - sigma) dsigma for each s in `times`.
        """
        inner = [graded_time_mesh(float(s), self.quad.time_nodes, self.quad.graded_time_exponent) for s in times]
        sigma = np.concatenate([mesh[0] for mesh in inner])
        w = np.concatenate([mesh[1] for mesh in inner])
        lag = np.repeat(times, [mesh[0].size for mesh in inner]) - sigma
        products = self.lambda_hat(sigma, y) * self.v_hat(lag, 0.0) * w[None, :]
        return products.reshape(self.nodes.size, times.size, -1).sum(axis=2)

    def field_correction_hat(self, times: npt.NDArray[np.float64], y: float) -> npt.NDArray[np.complex128]:
        """
        x-transform of v - V at depth y.
        """
        direct = self.exchange * self.lambda_hat(times, y) * self.road_hat[:, None]
        return direct + self.exchange * self.params.nu * self.duhamel_hat(times, y)

    def trace_hat(self, times: npt.NDArray[np.float64], cache: TraceCache | None) -> npt.NDArray[np.complex128]:
        """
        x-transform of v(s, ., 0) for each s in `times`, through the cache.
        """
        base = self.key()
        keys = [fingerprint(base, float(s)) for s in times]
        # TraceCache defines __len__, so an empty cache is falsy
        columns: list[npt.NDArray[np.complex128] | None] = [
            cache.get(k) if cache is not None else None for k in keys
        ]
        missing = [i for i, col in enumerate(columns) if col is None]
        if missing:
            sub = times[missing]
            fresh = self.v_hat(sub, 0.0) + self.field_correction_hat(sub, 0.0)
            for j, i in enumerate(missing):
                column = np.ascontiguousarray(fresh[:, j])
                columns[i] = cache.put(keys[i], column) if cache is not None else column
            logger.debug("Computed %d trace spectra (%d cached)", len(missing), len(times) - len(missing))
        return np.stack(columns, axis=1)  # type: ignore[arg-type]

    def invert(self, spectrum: npt.NDArray[np.complex128], xs: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        """
        (1/pi) int_0^xi_max Re[exp(i xi x) spectrum(xi)] dxi.
        """
        phases = np.exp(1j * np.outer(xs, self.nodes))
        return np.real(phases @ (self.weights * spectrum)) / math.pi


def _prepare(
    t: float, params: ModelParams, regime: Regime, quad: QuadratureConfig | None, data: InitialData
) -> _Spectral:
    if params.dim != 2:
        raise DomainError("The explicit solution is only implemented for N = 2")
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    return _Spectral(t, data, params, regime, quad or QuadratureConfig())


def solve_v_many(
    t: float,
    xs: npt.ArrayLike,
    y: float,
    data: InitialData,
    params: ModelParams,
    regime: Regime,
    quad: QuadratureConfig | None = None,
) -> npt.NDArray[np.float64]:
    """
    Field density v(t, x, y) at many x for a fixed (t, y).

    Parameters
    ----------
    t : float
        Time, t > 0.
    xs : array_like
        Road coordinates.
    y : float
        Depth, y >= 0.
    data : InitialData
        Initial data.
    params : ModelParams
        Physical constants with dim = 2.
    regime : Regime
        Regime of `params`.
    quad : QuadratureConfig, optional
        xi quadrature and Duhamel time mesh, used as given: unlike Lambda there
        is no panel doubling here. `solve_with_estimate` reports the change on
        a mesh twice as fine.

    Returns
    -------
    ndarray
    """
    if y < 0:
        raise DomainError(f"y must be nonnegative, got {y}")
    ctx = _prepare(t, params, regime, quad, data)
    x_arr = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    correction = ctx.field_correction_hat(np.array([t]), y)[:, 0]
    return solve_V_many(t, x_arr, y, data, params) + ctx.invert(correction, x_arr)


def solve_v(
    t: float,
    X: HalfSpacePoint,
    data: InitialData,
    params: ModelParams,
    regime: Regime,
    quad: QuadratureConfig | None = None,
) -> float:
    """
    Field density v(t, X) of the explicit solution.
    """
    return float(solve_v_many(t, [X.x[0]], X.y, data, params, regime, quad)[0])


def solve_u_many(
    t: float,
    xs: npt.ArrayLike,
    data: InitialData,
    params: ModelParams,
    regime: Regime,
    quad: QuadratureConfig | None = None,
    cache: TraceCache | None = TRACE_CACHE,
) -> npt.NDArray[np.float64]:
    """
    Road density u(t, x) at many x.

    The trace spectra of v|_{y=0} at the Duhamel time nodes come from `cache`
    when present (pass None to bypass it). The mesh is used as given, as in
    `solve_v_many`.
    """
    ctx = _prepare(t, params, regime, quad, data)
    x_arr = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    s, w = graded_time_mesh(t, ctx.quad.time_nodes, ctx.quad.graded_time_exponent)
    traces = ctx.trace_hat(s, cache)
    decay = np.exp(-np.outer(params.mu + params.D * ctx.nodes**2, t - s))
    spectrum = (decay * traces) @ w
    free = math.exp(-params.mu * t) * solve_U_many(t, x_arr, data, params)
    return free + params.nu * ctx.invert(spectrum, x_arr)


def solve_u(
    t: float,
    x: float,
    data: InitialData,
    params: ModelParams,
    regime: Regime,
    quad: QuadratureConfig | None = None,
    cache: TraceCache | None = TRACE_CACHE,
) -> float:
    """
    Road density u(t, x) of the explicit solution.
    """
    return float(solve_u_many(t, [x], data, params, regime, quad, cache)[0])


def evaluate_probes(
    t: float,
    probes: Sequence[tuple[float, float]],
    data: InitialData,
    params: ModelParams,
    regime: Regime,
    quad: QuadratureConfig | None = None,
    progress: Callable[[str], None] | None = None,
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """
    v at (x, y) probes (grouped by depth) and u at the probe abscissae.
    """
    probe_arr = np.asarray(probes, dtype=np.float64).reshape(-1, 2)
    v = np.empty(len(probe_arr))
    for depth in np.unique(probe_arr[:, 1]):
        mask = probe_arr[:, 1] == depth
        v[mask] = solve_v_many(t, probe_arr[mask, 0], float(depth), data, params, regime, quad)
        if progress:
            progress(f"v at t={t:g}, y={depth:g}")
    u = solve_u_many(t, probe_arr[:, 0], data, params, regime, quad)
    return v, u


@dataclass(frozen=True)
class SolutionEstimate:
    """
    v at one depth and u on the road, with the change seen when the xi panels
    and the Duhamel time nodes are both doubled.
    """

    xs: npt.NDArray[np.float64]
    v: npt.NDArray[np.float64]
    u: npt.NDArray[np.float64]
    v_error: float
    u_error: float


def refined_quadrature(quad: QuadratureConfig) -> QuadratureConfig:
    """
    The same settings with twice the xi panels and twice the time nodes.
    """
    return quad.model_copy(
        update={
            "panels": 2 * quad.panels,
            "time_nodes": 2 * quad.time_nodes,
            "max_panels": max(quad.max_panels, 2 * quad.panels),
        }
    )


def solve_with_estimate(
    t: float,
    xs: npt.ArrayLike,
    y: float,
    data: InitialData,
    params: ModelParams,
    regime: Regime,
    quad: QuadratureConfig | None = None,
    cache: TraceCache | None = TRACE_CACHE,
) -> SolutionEstimate:
    """
    v(t, xs, y) and u(t, xs) on the mesh twice as fine as `quad`, with the
    maximum change from `quad` as error estimate.

    solve_v_many and solve_u_many use the mesh they are given as is; this is
    how to tell whether that mesh is fine enough.
    """
    quad = quad or QuadratureConfig()
    finer = refined_quadrature(quad)
    x_arr = np.atleast_1d(np.asarray(xs, dtype=np.float64))
    v_coarse = solve_v_many(t, x_arr, y, data, params, regime, quad)
    u_coarse = solve_u_many(t, x_arr, data, params, regime, quad, cache)
    v = solve_v_many(t, x_arr, y, data, params, regime, finer)
    u = solve_u_many(t, x_arr, data, params, regime, finer, cache)
    estimate = SolutionEstimate(
        xs=x_arr,
        v=v,
        u=u,
        v_error=float(np.max(np.abs(v - v_coarse))),
        u_error=float(np.max(np.abs(u - u_coarse))),
    )
    logger.debug(
        "Mesh change at t=%g, y=%g: v %.3g, u %.3g", t, y, estimate.v_error, estimate.u_error
    )
    return estimate
