"""
Copyright 2022 ACCESS-NRI and contributors. See the top-level COPYRIGHT file for details.
SPDX-License-Identifier: Apache-2.0

Complex complementary error function and the scaled ratio

    R(z) = Erfc(z) / exp(-z**2) = exp(z**2) * Erfc(z)

together with its derivatives. All functions accept scalars or numpy arrays
and return complex results of the same shape (0-d inputs give Python complex).
"""

import logging
import math
from typing import Any

import numpy as np
import numpy.typing as npt
from scipy import special

from .exceptions import DomainError

logger = logging.getLogger(__name__)

SQRT_PI = math.sqrt(math.pi)
TWO_OVER_SQRT_PI = 2.0 / SQRT_PI

# Empirical bounds over Re z >= 0, z != 0:
#   |z| |R(z)| <= RATIO_BOUND, |z|^2 |R'(z)| <= DERIV1_BOUND, |z|^3 |R''(z)| <= DERIV2_BOUND
RATIO_BOUND = 1.0
DERIV1_BOUND = 3.0
DERIV2_BOUND = 8.0

SERIES_RADIUS = 1.5
ASYMPTOTIC_RADIUS = 8.0
SERIES_RTOL = 1e-18
SERIES_MAX_TERMS = 200
ASYMPTOTIC_MAX_TERMS = 60

ComplexLike = complex | float | npt.ArrayLike


def _as_complex_array(z: Any) -> npt.NDArray[np.complex128]:
    arr = np.asarray(z, dtype=np.complex128)
    if not np.all(np.isfinite(arr)):
        raise DomainError("Erfc arguments must be finite (no NaN or Inf)")
    return arr


def _unwrap(arr: npt.NDArray[Any], shape: tuple[int, ...] | None = None) -> Any:
    if shape is not None:
        arr = arr.reshape(shape)
    if arr.ndim == 0:
        return complex(arr)
    return arr


def _upper_half(
    arr: npt.NDArray[np.complex128],
) -> tuple[npt.NDArray[np.complex128], npt.NDArray[np.bool_]]:
    """
    Map to Im z >= 0. Results on the lower half-plane are obtained by conjugation,
    which keeps conjugate symmetry exact.
    """
    flip = arr.imag < 0
    return np.where(flip, np.conj(arr), arr), flip


def erfc_series(
    z: ComplexLike, rtol: float = SERIES_RTOL, max_terms: int = SERIES_MAX_TERMS
) -> Any:
    """
    Holomorphic continuation of Erfc by its power series

        Erfc(z) = 1 - 2/sqrt(pi) * sum_k (-1)^k z^(2k+1) / ((2k+1) k!)

    Parameters
    ----------
    z : complex or array_like
        Finite arguments.
    rtol : float
        Summation stops once every term magnitude is below rtol times the
        magnitude of the partial sum.
    max_terms : int
        Cap on the number of terms.

    Returns
    -------
    complex or ndarray
        Erfc(z).

    Raises
    ------
    DomainError
        If the series has not converged after `max_terms` terms.
    """
    arr = _as_complex_array(z)
    w, flip = _upper_half(arr)
    z2 = w * w
    power = w.copy()  # (-1)^k z^(2k+1) / k!
    total = np.zeros_like(w)

    for k in range(max_terms):
        term = power / (2 * k + 1)
        total = total + term
        if np.all(np.abs(term) <= rtol * np.abs(total)):
            break
        power = -power * z2 / (k + 1)
    else:
        raise DomainError(
            f"Erfc series did not converge in {max_terms} terms "
            f"(max |z| = {float(np.max(np.abs(arr))):.3g})"
        )

    result = 1.0 - TWO_OVER_SQRT_PI * total
    result = np.where(flip, np.conj(result), result)
    return _unwrap(result)


def erfc(z: ComplexLike) -> Any:
    """
    Complementary error function on the whole complex plane.

    The series is used for |z| <= SERIES_RADIUS. Beyond, on Re z >= 0,
    Erfc(z) = exp(-z**2) R(z) with R from `erfc_ratio`, which never forms
    exp(z**2). The left half-plane uses Erfc(z) = 2 - Erfc(-z).
    """
    arr = _as_complex_array(z)
    w, flip = _upper_half(arr.ravel())
    left = w.real < 0
    w = np.where(left, -w, w)

    result = np.empty_like(w)
    small = np.abs(w) <= SERIES_RADIUS
    if np.any(small):
        result[small] = erfc_series(w[small])
    if np.any(~small):
        big = w[~small]
        result[~small] = np.exp(-big * big) * special.erfcx(big)

    result = np.where(left, 2.0 - result, result)
    result = np.where(flip, np.conj(result), result)
    return _unwrap(result, arr.shape)


def erfc_ratio(z: ComplexLike) -> Any:
    """
    Scaled complementary error function R(z) = exp(z**2) Erfc(z) on Re z >= 0.

    Evaluated with the Faddeeva-based `scipy.special.erfcx`, which is accurate
    uniformly on the closed right half-plane and never overflows there.

    Raises
    ------
    DomainError
        If some argument has Re z < 0.
    """
    arr = _as_complex_array(z)
    if np.any(arr.real < 0):
        raise DomainError(
            "erfc_ratio is only defined here on Re z >= 0 "
            f"(got Re z = {float(np.min(arr.real)):.3g})"
        )
    w, flip = _upper_half(arr)
    result = special.erfcx(w)
    result = np.where(flip, np.conj(result), result)
    return _unwrap(result)


def erfc_ratio_asymptotic(z: ComplexLike, terms: int = 3) -> Any:
    """
    Large-|z| expansion sqrt(pi) R(z) ~ sum_k (-1)^k (2k-1)!! / (2^k z^(2k+1)),
    truncated after `terms` terms. The default three terms give
    1/z - 1/(2 z^3) + 3/(4 z^5).
    """
    arr = _as_complex_array(z)
    if np.any(arr == 0):
        raise DomainError("The asymptotic expansion of R is undefined at z = 0")
    inv2 = 1.0 / (arr * arr)
    term = 1.0 / arr
    total = np.zeros_like(arr)
    for k in range(terms):
        total = total + term
        term = -term * (2 * k + 1) * inv2 / 2.0
    return _unwrap(total / SQRT_PI)


def _asymptotic_derivatives(
    w: npt.NDArray[np.complex128], order: int
) -> npt.NDArray[np.complex128]:
    """
    Derivatives of R up to `order` from the differentiated asymptotic series,
    summed until the terms stop decreasing or fall below double precision.
    Only called for |w| > ASYMPTOTIC_RADIUS, where the smallest term is far
    below machine precision.
    """
    out = np.zeros((order + 1,) + w.shape, dtype=np.complex128)
    coeff = 1.0  # (-1)^k (2k-1)!! / 2^k
    for k in range(ASYMPTOTIC_MAX_TERMS):
        power = 2 * k + 1
        # n-th derivative of w^(-power) is (-1)^n power (power+1)...(power+n-1) w^(-power-n)
        falling = 1.0
        largest = 0.0
        for n in range(order + 1):
            contribution = coeff * falling * w ** (-(power + n))
            out[n] += contribution
            largest = max(largest, float(np.max(np.abs(contribution / out[n]))))
            falling *= -(power + n)
        if largest < 1e-17:
            break
        coeff *= -(2 * k + 1) / 2.0
    return out / SQRT_PI


def _recurrence_derivatives(
    w: npt.NDArray[np.complex128], order: int
) -> npt.NDArray[np.complex128]:
    """
    R^(n+2) = 2 (n+1) R^(n) + 2 w R^(n+1), started from R' = 2 w R - 2/sqrt(pi).
    """
    out = np.zeros((order + 1,) + w.shape, dtype=np.complex128)
    out[0] = special.erfcx(w)
    if order >= 1:
        out[1] = 2.0 * w * out[0] - TWO_OVER_SQRT_PI
    for n in range(order - 1):
        out[n + 2] = 2.0 * (n + 1) * out[n] + 2.0 * w * out[n + 1]
    return out


def _right_half_derivatives(
    w: npt.NDArray[np.complex128], order: int
) -> npt.NDArray[np.complex128]:
    """
    Derivatives on Re w >= 0. Recurrences near the origin, differentiated
    asymptotic series far from it. R itself always comes from erfcx.
    """
    w, flip = _upper_half(w)
    out = np.empty((order + 1, w.size), dtype=np.complex128)
    near = np.abs(w) <= ASYMPTOTIC_RADIUS
    if np.any(near):
        out[:, near] = _recurrence_derivatives(w[near], order)
    if np.any(~near):
        far = w[~near]
        out[:, ~near] = _asymptotic_derivatives(far, order)
        out[0, ~near] = special.erfcx(far)
    return np.where(flip, np.conj(out), out)


def erfc_ratio_taylor(z: ComplexLike, order: int, reflect: bool = False) -> Any:
    """
    R and its derivatives up to `order`.

    Parameters
    ----------
    z : complex or array_like
        Arguments.
    order : int
        Highest derivative returned.
    reflect : bool
        Allow Re z < 0 through R(z) = 2 exp(z**2) - R(-z). This grows like
        exp(Re z**2) and is only meant for the D < d path.

    Returns
    -------
    ndarray
        Array of shape (order + 1, *z.shape); row n holds R^(n)(z).
    """
    if order < 0:
        raise DomainError("Derivative order must be non-negative")
    arr = _as_complex_array(z)
    flat = arr.ravel()
    left = flat.real < 0
    if np.any(left) and not reflect:
        raise DomainError(
            "R derivatives are only defined here on Re z >= 0 "
            f"(got Re z = {float(np.min(flat.real)):.3g})"
        )

    out = np.empty((order + 1, flat.size), dtype=np.complex128)
    if np.any(~left):
        out[:, ~left] = _right_half_derivatives(flat[~left], order)
    if np.any(left):
        w = flat[left]
        mirrored = _right_half_derivatives(-w, order)
        # d^n/dw^n exp(w^2) = E_n with E_(n+1) = 2 w E_n + 2 n E_(n-1)
        gauss = np.exp(w * w)
        previous = np.zeros_like(w)
        for n in range(order + 1):
            out[n, left] = 2.0 * gauss - (-1) ** n * mirrored[n]
            gauss, previous = 2.0 * w * gauss + 2.0 * n * previous, gauss
    return out.reshape((order + 1,) + arr.shape)


def erfc_ratio_derivs(z: ComplexLike) -> tuple[Any, Any, Any]:
    """
    (R, R', R'') on Re z >= 0, with

        R'(z)  = 2 z R(z) - 2/sqrt(pi)
        R''(z) = 2 R(z) + 2 z R'(z)

    Raises
    ------
    DomainError
        If some argument has Re z < 0.
    """
    derivs = erfc_ratio_taylor(z, 2)
    return _unwrap(derivs[0]), _unwrap(derivs[1]), _unwrap(derivs[2])
