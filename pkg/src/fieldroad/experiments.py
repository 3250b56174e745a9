"""
Copyright 2022 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
SPDX-License-Identifier: Apache-2.0

Experiment documents and their execution: every command turns a validated
ExperimentSpec into one or more CSV tables plus a JSON sidecar holding the
resolved spec, the library version and a summary of the run.
"""

import csv
import enum
import json
import logging
import math
import os
import tempfile
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Annotated, Any, Literal

import numpy as np
import pydantic
import yaml
from scipy import integrate, interpolate

from .cubic import ModelParams, RegimeKind, classify_regime, discriminant, measure_merge_ratio, solve_p_delta
from .exceptions import FieldRoadError
from .fd_solver import (
    SimConfig,
    TimeSeriesRecord,
    count_flux_bumps,
    fit_decay_rate,
    simulate,
)
from .kernels import QuadratureConfig, lambda_kernel_profile, robin_kernel_1d
from .monte_carlo import robin_walk_survival
from .phi_kernel import default_delta_grid, sup_phi_scan
from .semi_analytic import DataSpec, evaluate_probes
from .utils import SIMULATION_DEFAULTS, deep_merge, preset

logger = logging.getLogger(__name__)

PositiveFinite = Annotated[float, pydantic.Field(gt=0, allow_inf_nan=False)]
NonNegative = Annotated[float, pydantic.Field(ge=0, allow_inf_nan=False)]
Finite = Annotated[float, pydantic.Field(allow_inf_nan=False)]

CONFIG_ERROR_STATUS = 2
RUN_ERROR_STATUS = 1


class Command(str, enum.Enum):
    KERNEL_EVAL = "kernel-eval"
    PHI_SCAN = "phi-scan"
    ROOTS = "roots"
    SIMULATE_FD = "simulate-fd"
    SIMULATE_ANALYTIC = "simulate-analytic"
    COMPARE = "compare"
    DECAY = "decay"
    FLUX = "flux"


class SimSettings(pydantic.BaseModel):
    """
    Grid and time settings of a finite-difference run. The physical constants
    and the initial data come from the enclosing ExperimentSpec.
    """

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    M: PositiveFinite
    h: PositiveFinite
    t_end: PositiveFinite
    cfl_safety: Annotated[float, pydantic.Field(gt=0, le=1)] = SIMULATION_DEFAULTS["cfl_safety"]
    record_every: PositiveFinite = SIMULATION_DEFAULTS["record_every"]


_NEEDS_SIM = {Command.SIMULATE_FD, Command.COMPARE, Command.DECAY, Command.FLUX}
_NEEDS_TIMES = {Command.KERNEL_EVAL, Command.PHI_SCAN, Command.SIMULATE_ANALYTIC, Command.COMPARE}
_NEEDS_PROBES = {Command.SIMULATE_ANALYTIC, Command.COMPARE}


class ExperimentSpec(pydantic.BaseModel):
    """
    A fully resolved experiment document.

    Only the fields used by `command` matter; the others keep their defaults.
    """

    model_config = pydantic.ConfigDict(frozen=True, extra="forbid")

    command: Command
    params: ModelParams
    data_spec: DataSpec = DataSpec()
    quad: QuadratureConfig = QuadratureConfig()
    sim: SimSettings | None = None
    output_path: str = "fieldroad.csv"
    seed: int = 0

    t_values: tuple[PositiveFinite, ...] = ()
    xs: tuple[Finite, ...] = (0.0,)
    ys: tuple[NonNegative, ...] = (0.0,)
    probes: tuple[tuple[Finite, NonNegative], ...] = ()
    deltas: tuple[Finite, ...] = ()
    D_values: tuple[PositiveFinite, ...] = ()

    kernel: Literal["lambda", "robin"] = "lambda"
    theta: Annotated[float, pydantic.Field(ge=0, le=1)] = 0.5
    omega: NonNegative = 0.0
    walk_paths: Annotated[int, pydantic.Field(ge=0)] = 0

    fit_fraction: Annotated[float, pydantic.Field(gt=0, lt=1)] = 0.75
    bump_window: PositiveFinite | None = None

    @pydantic.model_validator(mode="after")
    def _check_command_fields(self) -> "ExperimentSpec":
        if self.command in _NEEDS_SIM and self.sim is None:
            raise ValueError(f"Command '{self.command.value}' needs a 'sim' section")
        if self.command in _NEEDS_TIMES and not self.t_values:
            raise ValueError(f"Command '{self.command.value}' needs 't_values'")
        if self.command in _NEEDS_PROBES and not self.probes:
            raise ValueError(f"Command '{self.command.value}' needs 'probes'")
        return self

    def sim_config(self, t_end: float | None = None, params: ModelParams | None = None) -> SimConfig:
        if self.sim is None:
            raise ValueError(f"Command '{self.command.value}' needs a 'sim' section")
        settings = self.sim.model_dump()
        if t_end is not None:
            settings["t_end"] = t_end
        return SimConfig(
            params=params or self.params, data=self.data_spec.to_initial_data(), **settings
        )


def load_document(text: str) -> dict[str, Any]:
    """
    Read an experiment document, JSON first and YAML otherwise.
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError:
        try:
            document = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ValueError(f"Experiment document is neither JSON nor YAML: {e}") from e
    if not isinstance(document, dict):
        raise ValueError("An experiment document must be a mapping")
    return document


def parse_config(text: str | dict[str, Any]) -> ExperimentSpec:
    """
    Parse an experiment document (JSON, or YAML) into a validated spec.

    A top-level "preset" key names a packaged desk preset whose keys are used
    as defaults for the rest of the document.

    Raises
    ------
    pydantic.ValidationError
        On unknown keys or out-of-range values; the error location names the key.
    ValueError
        If the document is not a mapping or names an unknown preset.
    """
    document = dict(load_document(text) if isinstance(text, str) else text)

    name = document.pop("preset", None)
    if name is not None:
        try:
            base = preset(name)
        except KeyError as e:
            raise ValueError(str(e)) from e
        # D_values only applies to the flux sweep.
        if document.get("command") != Command.FLUX.value:
            base.pop("D_values", None)
        document = deep_merge(base, document)
    return ExperimentSpec.model_validate(document)


@dataclass
class Table:
    header: tuple[str, ...]
    rows: list[tuple[Any, ...]] = field(default_factory=list)


@dataclass
class Outcome:
    """
    Tables keyed by file suffix ("" is the main CSV) and the summary that goes
    into the sidecar.
    """

    tables: dict[str, Table]
    summary: dict[str, Any]


def _format(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int | np.integer):
        return str(int(value))
    if isinstance(value, float | np.floating):
        return f"{float(value):.17g}"
    if isinstance(value, enum.Enum):
        return str(value.value)
    return str(value)


def _tail(series: Sequence[tuple[float, float]], start: float) -> list[tuple[float, float]]:
    return [(t, value) for t, value in series if t >= start and t > 0 and value > 0]


def _kernel_eval(spec: ExperimentSpec) -> Outcome:
    params = spec.params
    if spec.kernel == "robin":
        table = Table(("t", "y", "value"))
        survival = []
        for t in spec.t_values:
            values = np.atleast_1d(robin_kernel_1d(spec.theta, t, np.array(spec.ys), spec.omega, params.d))
            table.rows.extend((t, y, value) for y, value in zip(spec.ys, values))
            entry: dict[str, Any] = {"t": t}
            entry["survival"], _ = integrate.quad(
                lambda y: robin_kernel_1d(spec.theta, t, y, spec.omega, params.d), 0.0, math.inf
            )
            if spec.walk_paths:
                walk = robin_walk_survival(
                    spec.theta, t, spec.omega, params.d, paths=spec.walk_paths, seed=spec.seed
                )
                entry["walk_survival"], entry["walk_standard_error"] = walk.value, walk.standard_error
            survival.append(entry)
        return Outcome({"": table}, {"survival": survival})

    regime = classify_regime(params)
    table = Table(("t", "x", "y", "value", "error_estimate"))
    panels = 0
    for t in spec.t_values:
        for y in spec.ys:
            profile = lambda_kernel_profile(t, spec.xs, y, params, regime, spec.quad)
            panels = max(panels, profile.panels)
            table.rows.extend((t, x, y, value, profile.error_estimate) for x, value in zip(profile.xs, profile.values))
    return Outcome({"": table}, {"regime": regime.kind.value, "max_panels": panels})


def _phi_scan(spec: ExperimentSpec) -> Outcome:
    table = Table(("t", "sup_phi", "scaled_sup_phi"))
    for t in spec.t_values:
        sup = sup_phi_scan(t, spec.params)
        table.rows.append((t, sup, sup * math.sqrt(1.0 + t)))
    regime = classify_regime(spec.params)
    return Outcome(
        {"": table},
        {"regime": regime.kind.value, "max_scaled_sup_phi": max(row[2] for row in table.rows)},
    )


def _roots(spec: ExperimentSpec) -> Outcome:
    params = spec.params
    regime = classify_regime(params)
    deltas = spec.deltas or tuple(float(d) for d in default_delta_grid(params, regime))
    table = Table(
        (
            "delta",
            "alpha_re",
            "alpha_im",
            "beta_re",
            "beta_im",
            "gamma_re",
            "gamma_im",
            "discriminant",
            "kind",
            "in_guard",
        )
    )
    for delta in deltas:
        roots = solve_p_delta(params, delta)
        table.rows.append(
            (
                delta,
                roots.alpha.real,
                roots.alpha.imag,
                roots.beta.real,
                roots.beta.imag,
                roots.gamma.real,
                roots.gamma.imag,
                discriminant(params, delta),
                roots.kind,
                regime.in_guard(delta),
            )
        )
    summary: dict[str, Any] = {
        "regime": regime.kind.value,
        "singular_deltas": list(regime.singular_deltas),
        "negative_singular_deltas": list(regime.negative_singular_deltas),
        "guard_radius": regime.guard_radius,
        "separation": regime.separation,
    }
    if regime.kind is RegimeKind.TRIPLE_AT:
        summary["merge_ratio"] = measure_merge_ratio(params, regime)
    return Outcome({"": table}, summary)


def _series_row(record: TimeSeriesRecord) -> tuple[Any, ...]:
    return (record.t, record.sup_v, record.sup_u, record.total_mass, record.flux_at(0.0), record.x0)


def _simulate_fd(spec: ExperimentSpec) -> Outcome:
    config = spec.sim_config()
    records, final = simulate(config, progress=_log_record)
    series = Table(("t", "sup_v", "sup_u", "total_mass", "flux_0", "x0"), [_series_row(r) for r in records])
    snapshot = Table(("x", "y", "v"))
    xs, ys = final.v.x, final.v.y
    for i, x in enumerate(xs):
        snapshot.rows.extend((x, y, value) for y, value in zip(ys, final.v.values[i]))
    initial_mass = records[0].total_mass
    return Outcome(
        {"": series, "_field": snapshot},
        {
            "steps_dt": config.dt,
            "road_substeps": config.road_substeps,
            "relative_mass_drift": abs(records[-1].total_mass - initial_mass) / initial_mass if initial_mass else 0.0,
            "min_v": float(np.min(final.v.values)),
            "min_u": float(np.min(final.u.values)) if final.u.values.size else 0.0,
        },
    )


def _simulate_analytic(spec: ExperimentSpec) -> Outcome:
    regime = classify_regime(spec.params)
    data = spec.data_spec.to_initial_data()
    table = Table(("t", "x", "y", "v", "u"))
    for t in spec.t_values:
        v, u = evaluate_probes(t, spec.probes, data, spec.params, regime, spec.quad, progress=logger.info)
        table.rows.extend((t, x, y, vi, ui) for (x, y), vi, ui in zip(spec.probes, v, u))
    return Outcome({"": table}, {"regime": regime.kind.value})


def _compare(spec: ExperimentSpec) -> Outcome:
    regime = classify_regime(spec.params)
    data = spec.data_spec.to_initial_data()
    probes = np.asarray(spec.probes, dtype=np.float64)
    table = Table(
        ("t", "x", "y", "v_analytic", "v_fd", "v_abs_diff", "u_analytic", "u_fd", "u_abs_diff")
    )
    relative = []
    for t in spec.t_values:
        v_exact, u_exact = evaluate_probes(t, spec.probes, data, spec.params, regime, spec.quad)
        _, final = simulate(spec.sim_config(t_end=t))
        field_interp = interpolate.RegularGridInterpolator((final.v.x, final.v.y), final.v.values)
        v_fd = field_interp(probes)
        u_fd = np.interp(probes[:, 0], final.u.x, final.u.values)
        dv, du = np.abs(v_exact - v_fd), np.abs(u_exact - u_fd)
        table.rows.extend(
            (t, x, y, a, b, c, e, f, g)
            for (x, y), a, b, c, e, f, g in zip(spec.probes, v_exact, v_fd, dv, u_exact, u_fd, du)
        )
        scale_v = max(float(np.max(np.abs(v_fd))), 1e-300)
        scale_u = max(float(np.max(np.abs(u_fd))), 1e-300)
        relative.append(
            {
                "t": t,
                "v_relative_sup": float(np.max(dv)) / scale_v,
                "u_relative_sup": float(np.max(du)) / scale_u,
            }
        )
    return Outcome(
        {"": table},
        {
            "relative_sup": relative,
            "max_relative_sup": max(max(r["v_relative_sup"], r["u_relative_sup"]) for r in relative),
        },
    )


def _decay(spec: ExperimentSpec) -> Outcome:
    config = spec.sim_config()
    records, _ = simulate(config, progress=_log_record)
    table = Table(("t", "sup_v", "sup_u"), [(r.t, r.sup_v, r.sup_u) for r in records])
    start = config.t_end * (1.0 - spec.fit_fraction)
    slope_v, _, residual_v = fit_decay_rate(_tail([(r.t, r.sup_v) for r in records], start))
    slope_u, _, residual_u = fit_decay_rate(_tail([(r.t, r.sup_u) for r in records], start))
    return Outcome(
        {"": table},
        {
            "fit_start": start,
            "slope_sup_v": slope_v,
            "slope_sup_u": slope_u,
            "max_residual_sup_v": residual_v,
            "max_residual_sup_u": residual_u,
        },
    )


def _flux(spec: ExperimentSpec) -> Outcome:
    series = Table(("D", "t", "flux_0", "x0"))
    profiles = Table(("D", "x", "flux"))
    per_d = []
    for D in spec.D_values or (spec.params.D,):
        params = ModelParams(**{**spec.params.model_dump(), "D": D})
        config = spec.sim_config(params=params)
        records, _ = simulate(config, progress=_log_record)
        series.rows.extend((D, r.t, r.flux_at(0.0), r.x0) for r in records)
        final = records[-1]
        profiles.rows.extend((D, x, value) for x, value in zip(final.flux.x, final.flux.values))

        start = config.t_end * (1.0 - spec.fit_fraction)
        flux_0 = final.flux_at(0.0)
        entry: dict[str, Any] = {
            "D": D,
            "flux_0_sign": int(np.sign(flux_0)),
            "flux_0": flux_0,
            "x0": final.x0,
            "bumps": count_flux_bumps(final.flux, window=spec.bump_window),
        }
        flux_tail = _tail([(r.t, abs(r.flux_at(0.0))) for r in records], start)
        entry["slope_abs_flux_0"] = fit_decay_rate(flux_tail)[0] if len(flux_tail) >= 8 else None
        x0_tail = _tail([(r.t, r.x0) for r in records if r.x0 is not None], start)
        entry["slope_x0"] = fit_decay_rate(x0_tail)[0] if len(x0_tail) >= 8 else None
        per_d.append(entry)
    return Outcome({"": series, "_profile": profiles}, {"runs": per_d})


def _log_record(record: TimeSeriesRecord) -> None:
    logger.debug("t = %.6g, sup v = %.6g, mass = %.12g", record.t, record.sup_v, record.total_mass)


HANDLERS: dict[Command, Callable[[ExperimentSpec], Outcome]] = {
    Command.KERNEL_EVAL: _kernel_eval,
    Command.PHI_SCAN: _phi_scan,
    Command.ROOTS: _roots,
    Command.SIMULATE_FD: _simulate_fd,
    Command.SIMULATE_ANALYTIC: _simulate_analytic,
    Command.COMPARE: _compare,
    Command.DECAY: _decay,
    Command.FLUX: _flux,
}


def _table_path(output: Path, suffix: str) -> Path:
    return output if not suffix else output.with_name(f"{output.stem}{suffix}{output.suffix or '.csv'}")


def sidecar_path(output: str | Path) -> Path:
    return Path(output).with_suffix(".json")


def error_path(output: str | Path) -> Path:
    return Path(output).with_suffix(".error.json")


def _atomic_write(path: Path, write: Callable[[Any], None]) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as f:
            write(f)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _write_table(path: Path, table: Table) -> None:
    def write(f: Any) -> None:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(table.header)
        writer.writerows([_format(value) for value in row] for row in table.rows)

    _atomic_write(path, write)


def _write_json(path: Path, document: dict[str, Any]) -> None:
    _atomic_write(path, lambda f: f.write(json.dumps(document, indent=2, sort_keys=True, default=_format) + "\n"))


def write_error(output: str | Path, err: BaseException) -> Path:
    """
    Machine-readable error report next to the requested output.
    """
    path = error_path(output)
    code = err.code if isinstance(err, FieldRoadError) else type(err).__name__
    document = {"error": code, "type": type(err).__name__, "message": str(err)}
    achieved = getattr(err, "achieved_error", None)
    if achieved is not None:
        document["achieved_error"] = achieved
    _write_json(path, document)
    return path


def execute(spec: ExperimentSpec) -> int:
    """
    Run `spec` and write its CSV tables and JSON sidecar.

    Nothing is written until every table is computed; each file is written to
    a temporary name and renamed into place. On a library error the only file
    written is the error JSON.

    Returns
    -------
    int
        0 on success, nonzero on failure.
    """
    from ._version import get_versions

    output = Path(spec.output_path)
    try:
        if not output.parent.exists():
            raise FileNotFoundError(f"Output directory {output.parent} does not exist")
        logger.info("Running '%s' into %s", spec.command.value, output)
        outcome = HANDLERS[spec.command](spec)
        written = []
        for suffix, table in outcome.tables.items():
            path = _table_path(output, suffix)
            _write_table(path, table)
            written.append(path.name)
        _write_json(
            sidecar_path(output),
            {
                "spec": spec.model_dump(mode="json"),
                "version": get_versions()["version"],
                "files": written,
                "summary": outcome.summary,
            },
        )
    except (FieldRoadError, OSError) as e:
        logger.error("'%s' failed: %s", spec.command.value, e)
        try:
            write_error(output, e)
        except OSError:
            logger.error("Could not write the error report for %s", output)
        return RUN_ERROR_STATUS
    logger.info("Wrote %s", ", ".join(written))
    return 0
