"""
Copyright 2022 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
SPDX-License-Identifier: Apache-2.0

Top-level package for fieldroad: explicit and finite-difference solutions of
the field-road diffusion system.
"""

from . import _version
from .cubic import ModelParams, Regime, RegimeKind, RootKind, RootTriple, classify_regime, solve_p_delta
from .exceptions import (
    AmbiguousRegime,
    BoundaryReachWarning,
    DomainError,
    FieldRoadError,
    FieldRoadWarning,
    InstabilityError,
    MergeTooClose,
    QuadratureNotConverged,
    RealnessWarning,
)
from .experiments import ExperimentSpec, execute, parse_config
from .fd_solver import SimConfig, SimState, TimeSeriesRecord, run, step, total_mass
from .kernels import HalfSpacePoint, QuadratureConfig, half_space_kernel, lambda_kernel
from .phi_kernel import PhiEvalPoint, phi_compensated, sup_phi_scan
from .semi_analytic import DataSpec, InitialData, solve_u, solve_U, solve_v, solve_V
from .special_functions import erfc, erfc_ratio, erfc_ratio_derivs

__all__ = [
    "AmbiguousRegime",
    "BoundaryReachWarning",
    "DataSpec",
    "DomainError",
    "ExperimentSpec",
    "FieldRoadError",
    "FieldRoadWarning",
    "HalfSpacePoint",
    "InitialData",
    "InstabilityError",
    "MergeTooClose",
    "ModelParams",
    "PhiEvalPoint",
    "QuadratureConfig",
    "QuadratureNotConverged",
    "RealnessWarning",
    "Regime",
    "RegimeKind",
    "RootKind",
    "RootTriple",
    "SimConfig",
    "SimState",
    "TimeSeriesRecord",
    "classify_regime",
    "erfc",
    "erfc_ratio",
    "erfc_ratio_derivs",
    "execute",
    "half_space_kernel",
    "lambda_kernel",
    "parse_config",
    "phi_compensated",
    "run",
    "solve_U",
    "solve_V",
    "solve_p_delta",
    "solve_u",
    "solve_v",
    "step",
    "sup_phi_scan",
    "total_mass",
]

__version__ = _version.get_versions()["version"]
