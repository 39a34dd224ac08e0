"""Two-mode Green-function expansions of the coupled disks.

All frequencies are internal (units of ``c/a``) and ``G`` is the scattered
``zz`` component in units of ``1/a^2``, normalized so the homogeneous
background has ``Im G_B(r, r) = omega^2 / 4``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .cqt import HybridPair, hybrid_fields_at

POLE_RTOL = 1e-3
BAND_HALF_WIDTH = 50.0  # in units of gamma_R


class PoleProximityWarning(RuntimeWarning):
    """Real frequency within ``1e-3 gamma`` of a hybrid pole."""


class OutOfBandWarning(RuntimeWarning):
    """Frequency outside the band where two modes describe the response."""


@dataclass(frozen=True)
class GreenSample:
    """One Green-function value; ``omega`` in rad/s, ``value`` in 1/m^2."""

    omega: float
    value: complex
    model_tag: str

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError("Green-function value must be finite")
        if self.model_tag not in ("cQNM", "cNM", "cNMI"):
            raise ValueError(f"unknown model tag {self.model_tag!r}")


def expansion_band(pair: HybridPair) -> tuple[float, float]:
    """``[omega_L - 50 gamma_R, omega_L + 50 gamma_R]`` in internal units."""
    wl = pair.mode_L.ka.real
    gr = -pair.mode_R.ka.imag
    return wl - BAND_HALF_WIDTH * gr, wl + BAND_HALF_WIDTH * gr


def _check_frequencies(pair: HybridPair, omega):
    omega = np.asarray(omega, dtype=float)
    lo, hi = expansion_band(pair)
    if np.any((omega < lo) | (omega > hi)):
        warnings.warn("frequency outside the two-mode expansion band", OutOfBandWarning, stacklevel=3)
    for w in pair.omegas:
        if np.any(np.abs(w - omega) < POLE_RTOL * abs(w.imag)):
            warnings.warn("frequency within 1e-3 gamma of a hybrid pole", PoleProximityWarning, stacklevel=3)
    return omega


def mode_amplitudes(pair: HybridPair, omega) -> np.ndarray:
    """``A_pm(omega) = omega / (2 (omega_pm - omega))``, shape ``(2, ...)``."""
    omega = np.asarray(omega, dtype=float)
    w = pair.omegas.reshape((2,) + (1,) * omega.ndim)
    return omega / (2.0 * (w - omega))


def _shaped(amp, weights):
    return np.tensordot(weights, amp, axes=(0, 0))


def green_qnm(pair: HybridPair, r, r_prime, omega):
    """``sum_pm A_pm(omega) f_pm(r) f_pm(r')`` with unconjugated products."""
    omega = _check_frequencies(pair, omega)
    f1, f2 = hybrid_fields_at(pair, r), hybrid_fields_at(pair, r_prime)
    return _shaped(mode_amplitudes(pair, omega), f1 * f2)


def green_nm(pair: HybridPair, r, r_prime, omega):
    """Phase-stripped form ``sum_pm A_pm(omega) f_pm(r)^* f_pm(r')``."""
    omega = _check_frequencies(pair, omega)
    f1, f2 = hybrid_fields_at(pair, r), hybrid_fields_at(pair, r_prime)
    return _shaped(mode_amplitudes(pair, omega), np.conj(f1) * f2)


def phase_factors(field) -> tuple[np.ndarray, np.ndarray]:
    """``(cos 2 phi, sin 2 phi)`` of a complex field from ``f^2 / |f|^2``."""
    field = np.asarray(field, dtype=complex)
    mag2 = np.abs(field) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(mag2 > 0, field**2 / mag2, 1.0 + 0j)
    return u.real, u.imag


def modified_lorentzian(omega, w_tilde: complex):
    """``L(omega) = omega gamma / (2 ((omega_r - omega)^2 + gamma^2))``."""
    omega = np.asarray(omega, dtype=float)
    wr, g = w_tilde.real, -w_tilde.imag
    return omega * g / (2.0 * ((wr - omega) ** 2 + g**2))


def im_g_phase_decomposition(pair: HybridPair, r0, omega):
    """Per-mode parts of ``Im G(r0, r0)`` written through the field phases.

    Returns
    -------
    term_plus, term_minus : ndarray
        ``[cos 2 phi + ((omega_pm - omega)/gamma_pm) sin 2 phi] |f_pm|^2 L_pm``.
    """
    omega = _check_frequencies(pair, omega)
    f = hybrid_fields_at(pair, r0)
    terms = []
    for fk, wk in zip(f, pair.omegas):
        c2, s2 = phase_factors(fk)
        g = -wk.imag
        terms.append((c2 + (wk.real - omega) / g * s2) * abs(fk) ** 2 * modified_lorentzian(omega, wk))
    return terms[0], terms[1]
