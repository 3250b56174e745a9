"""
Copyright 2022 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
SPDX-License-Identifier: Apache-2.0

Exceptions and warnings raised by fieldroad.
"""


class FieldRoadError(Exception):
    """
    Base class for all fieldroad errors. `code` is the short identifier written
    to the error JSON by the command line front end.
    """

    code = "fieldroad_error"


class DomainError(FieldRoadError, ValueError):
    """
    An argument lies outside the region where an operation is defined or accurate.
    """

    code = "domain_error"


class MergeTooClose(FieldRoadError):
    """
    Two roots of the cubic are too close for the partial fraction coefficients
    to be formed. Callers should switch to the compensated evaluation of Phi.
    """

    code = "merge_too_close"


class AmbiguousRegime(FieldRoadError):
    """
    The exchange rate mu sits so close to a regime threshold that the singular
    values of delta cannot be resolved. Perturb mu.
    """

    code = "ambiguous_regime"


class QuadratureNotConverged(FieldRoadError):
    """
    The adaptive quadrature reached max_panels without converging.

    Parameters
    ----------
    message : str
        Human readable description.
    achieved_error : float
        Error estimate of the last refinement.
    """

    code = "quadrature_not_converged"

    def __init__(self, message: str, achieved_error: float = float("nan")) -> None:
        super().__init__(message)
        self.achieved_error = achieved_error


class InstabilityError(FieldRoadError):
    """
    The explicit scheme blew up (time step above the stability bound, or a bug).
    """

    code = "instability"


class FieldRoadWarning(UserWarning):
    """
    Custom warning class for recoverable numerical anomalies.
    """

    pass


class RealnessWarning(FieldRoadWarning):
    """
    The compensated combination Phi kept an imaginary residue above its bound.
    """

    pass


class BoundaryReachWarning(FieldRoadWarning):
    """
    A simulation runs long enough for diffusion to feel the artificial boundary.
    """

    pass
