"""Integer-order cylinder functions of complex argument.

The production evaluators wrap the Amos routines shipped with
``scipy.special`` and add envelope checks, derivative recurrences and a
finiteness guard. An independent reference evaluator (power series in
extended precision, optionally combined with upward recurrence for the
second kind) is provided for validation.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np
from scipy import special as _sp

MAX_ORDER = 200
MAX_ABS_Z = 1.0e4


class SpecialFunctionDomainError(ValueError):
    """Raised for orders or arguments outside the supported envelope."""


def _check(order, z, allow_zero=True):
    order = np.asarray(order)
    z = np.asarray(z, dtype=complex)
    if not np.issubdtype(order.dtype, np.integer):
        if np.any(order != np.round(order)):
            raise SpecialFunctionDomainError("only integer orders are supported")
        order = order.astype(int)
    if np.any(order < 0) or np.any(order > MAX_ORDER):
        raise SpecialFunctionDomainError(f"order must lie in [0, {MAX_ORDER}]")
    if np.any(np.abs(z) > MAX_ABS_Z):
        raise SpecialFunctionDomainError(f"|z| must not exceed {MAX_ABS_Z:g}")
    if not allow_zero and np.any(z == 0):
        raise SpecialFunctionDomainError("Hankel functions are singular at z = 0")
    return order, z


def _finite(value):
    if not np.all(np.isfinite(value)):
        raise SpecialFunctionDomainError("non-finite cylinder-function value")
    return value[()] if np.ndim(value) == 0 else value


def bessel_j(order, z):
    """Bessel function of the first kind ``J_order(z)``.

    Parameters
    ----------
    order : int or array of int
        Non-negative integer order, at most ``MAX_ORDER``.
    z : complex or array
        Argument with ``|z| <= MAX_ABS_Z``.
    """
    order, z = _check(order, z)
    return _finite(_sp.jv(order, z))


def hankel1(order, z):
    """Hankel function of the first kind ``H^(1)_order(z) = J + iY``."""
    order, z = _check(order, z, allow_zero=False)
    return _finite(_sp.hankel1(order, z))


def bessel_j_prime(order, z):
    """Derivative ``J_order'(z)`` from ``(J_{m-1} - J_{m+1}) / 2``."""
    order, z = _check(order, z)
    return _finite(0.5 * (_sp.jv(order - 1, z) - _sp.jv(order + 1, z)))


def hankel1_prime(order, z):
    """Derivative ``H^(1)_order'(z)`` from ``(H_{m-1} - H_{m+1}) / 2``."""
    order, z = _check(order, z, allow_zero=False)
    return _finite(0.5 * (_sp.hankel1(order - 1, z) - _sp.hankel1(order + 1, z)))


def hankel1_signed(order, z):
    """``H^(1)_order(z)`` for any integer order, using ``H_{-n} = (-1)^n H_n``.

    Used by the addition theorem, where translated orders can be negative.
    """
    order = np.asarray(order)
    sign = np.where((order < 0) & (np.abs(order) % 2 == 1), -1.0, 1.0)
    return sign * hankel1(np.abs(order), z)


def bessel_j_signed(order, z):
    """``J_order(z)`` for any integer order, using ``J_{-n} = (-1)^n J_n``."""
    order = np.asarray(order)
    sign = np.where((order < 0) & (np.abs(order) % 2 == 1), -1.0, 1.0)
    return sign * bessel_j(np.abs(order), z)


# ---------------------------------------------------------------------------
# high-precision reference


def _working_dps(order, z):
    # series terms peak near exp(|z|); keep ~20 digits beyond the cancellation
    return 25 + int(abs(z) / math.log(10.0)) + int(order * 0.1)


def _series_j(n, z):
    half = z / 2
    q = -(half * half)
    term = half**n / mpmath.factorial(n)
    total = term
    k = 0
    eps = mpmath.mpf(10) ** (-mpmath.mp.dps + 3)
    while True:
        k += 1
        term = term * q / (k * (k + n))
        total += term
        if k > abs(z) and abs(term) <= eps * abs(total):
            return total


def _series_y(n, z, jn):
    half = z / 2
    q = -(half * half)
    finite = mpmath.mpf(0)
    if n > 0:
        # sum_{k<n} (n-k-1)!/k! (z^2/4)^k
        t = mpmath.factorial(n - 1)
        finite = t
        for k in range(1, n):
            t = t * (half * half) / (k * (n - k))
            finite += t
        finite = -finite * half ** (-n) / mpmath.pi
    psi_a = -mpmath.euler
    psi_b = -mpmath.euler + sum(mpmath.mpf(1) / j for j in range(1, n + 1))
    term = half**n / mpmath.factorial(n)
    total = (psi_a + psi_b) * term
    k = 0
    eps = mpmath.mpf(10) ** (-mpmath.mp.dps + 3)
    while True:
        k += 1
        term = term * q / (k * (k + n))
        psi_a += mpmath.mpf(1) / k
        psi_b += mpmath.mpf(1) / (k + n)
        piece = (psi_a + psi_b) * term
        total += piece
        if k > abs(z) and abs(piece) <= eps * (abs(total) + abs(jn)):
            break
    return finite + 2 / mpmath.pi * mpmath.log(half) * jn - total / mpmath.pi


def reference_bessel_j(order: int, z: complex) -> complex:
    """``J_order(z)`` from the ascending power series in extended precision."""
    order = int(order)
    if order < 0 or order > MAX_ORDER:
        raise SpecialFunctionDomainError(f"order must lie in [0, {MAX_ORDER}]")
    with mpmath.workdps(_working_dps(order, z)):
        return complex(_series_j(order, mpmath.mpc(z)))


def reference_hankel1(order: int, z: complex, method: str = "series") -> complex:
    """Reference ``H^(1)_order(z)`` in extended precision.

    Parameters
    ----------
    method : {"series", "recurrence"}
        ``"series"`` sums the ascending series for ``Y_order`` directly.
        ``"recurrence"`` sums the series for ``Y_0`` and ``Y_1`` only and
        climbs to ``order`` with ``Y_{m+1} = (2m/z) Y_m - Y_{m-1}``, which is
        stable for the second kind. Both paths share only the ``J`` series.
    """
    order = int(order)
    if order < 0 or order > MAX_ORDER:
        raise SpecialFunctionDomainError(f"order must lie in [0, {MAX_ORDER}]")
    if z == 0:
        raise SpecialFunctionDomainError("Hankel functions are singular at z = 0")
    with mpmath.workdps(_working_dps(order, z) + order // 2):
        zz = mpmath.mpc(z)
        jn = _series_j(order, zz)
        if method == "series":
            yn = _series_y(order, zz, jn)
        elif method == "recurrence":
            y_prev = _series_y(0, zz, _series_j(0, zz))
            y_cur = _series_y(1, zz, _series_j(1, zz))
            if order == 0:
                yn = y_prev
            else:
                for m in range(1, order):
                    y_prev, y_cur = y_cur, 2 * m / zz * y_cur - y_prev
                yn = y_cur
        else:
            raise ValueError(f"unknown method {method!r}")
        return complex(jn + 1j * yn)
