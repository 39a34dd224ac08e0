"""Improved normal-mode model of the coupled disks.

Bare fields are replaced by their real parts and the two coupling rates by
the real average ``kappa = Re(kappa_LR + kappa_RL) / 2``, while the complex
bare frequencies are kept. The classical Green function is the non-diagonal
resolvent form ``(omega / 2) f^T (Omega - omega)^{-1} f`` with
``Omega = [[w_L, -kappa], [-kappa, w_R]]``; the quantum model uses the same
matrix as the photon Hamiltonian with hopping ``-kappa``. Alternative
hopping conventions are available for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cqt import Geometry, HybridPair, sqrt_rotated_cut
from .disk import BareMode, eval_field

TERMS = ("LL", "LR", "RL", "RR")
HOPPING = {
    "minus": (-1.0, -1.0),
    "plus": (1.0, 1.0),
    "i": (1j, -1j),
    "-i": (-1j, 1j),
}
P_COND_MAX = 1e10


class DegenerateEigenbasisError(RuntimeError):
    """The eigenvector matrix of the photon Hamiltonian is numerically singular."""


@dataclass(frozen=True)
class NmiParams:
    """Parameters of the improved normal-mode model (internal units)."""

    kappa_nmi: float
    omega_plus: complex
    omega_minus: complex
    mode_L: BareMode
    mode_R: BareMode
    geometry: Geometry

    @property
    def omegas_nmi(self) -> np.ndarray:
        return np.array([self.omega_plus, self.omega_minus])

    @property
    def bare_omegas(self) -> np.ndarray:
        return np.array([self.mode_L.ka, self.mode_R.ka])

    def real_fields(self, r) -> np.ndarray:
        """``(Re f_L, Re f_R)`` at point ``r``."""
        x, y = r
        return np.array([eval_field(self.mode_L, x, y, self.geometry).real,
                         eval_field(self.mode_R, x, y, self.geometry).real])

    def omega_matrix(self, hopping: str = "minus") -> np.ndarray:
        """``[[w_L, s_LR kappa], [s_RL kappa, w_R]]`` for the chosen hopping."""
        s_lr, s_rl = HOPPING[hopping]
        wl, wr = self.bare_omegas
        return np.array([[wl, s_lr * self.kappa_nmi], [s_rl * self.kappa_nmi, wr]], dtype=complex)


def nmi_parameters(mode_L: BareMode, mode_R: BareMode, kappa_LR: complex, kappa_RL: complex,
                   geometry: Geometry, sqrt=sqrt_rotated_cut) -> NmiParams:
    """Real averaged coupling and the eigenfrequencies
    ``(w_L + w_R)/2 +- sqrt(4 kappa^2 + (w_L - w_R)^2) / 2``."""
    kappa = float(np.real(kappa_LR + kappa_RL) / 2)
    wl, wr = mode_L.ka, mode_R.ka
    disc = sqrt(4 * kappa**2 + (wl - wr) ** 2)
    mean = 0.5 * (wl + wr)
    return NmiParams(kappa, complex(mean + 0.5 * disc), complex(mean - 0.5 * disc), mode_L, mode_R, geometry)


def nmi_from_pair(pair: HybridPair) -> NmiParams:
    return nmi_parameters(pair.mode_L, pair.mode_R, pair.kappa_LR, pair.kappa_RL, pair.geometry)


def _resolvent(params: NmiParams, omega, hopping="minus"):
    """``(Omega - omega)^{-1}`` for each frequency, shape ``(..., 2, 2)``."""
    Om = params.omega_matrix(hopping)
    om = np.asarray(omega, dtype=float)
    A = Om - om[..., None, None] * np.eye(2)
    det = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    inv = np.empty_like(A)
    inv[..., 0, 0] = A[..., 1, 1]
    inv[..., 1, 1] = A[..., 0, 0]
    inv[..., 0, 1] = -A[..., 0, 1]
    inv[..., 1, 0] = -A[..., 1, 0]
    return inv / det[..., None, None]


def green_nmi(params: NmiParams, r, r_prime, omega, terms: bool = False):
    """Four-term improved-NM Green function.

    Returns the total, or with ``terms=True`` a dict of the ``LL, LR, RL, RR``
    parts ``(omega / 2) f_i(r) [(Omega - omega)^{-1}]_{ij} f_j(r')``.
    """
    fa, fb = params.real_fields(r), params.real_fields(r_prime)
    om = np.asarray(omega, dtype=float)
    R = _resolvent(params, om)
    parts = {}
    for i, a in enumerate("LR"):
        for j, b in enumerate("LR"):
            parts[a + b] = 0.5 * om * fa[i] * R[..., i, j] * fb[j]
    if terms:
        return parts
    return sum(parts.values())


def purcell_cnmi(params: NmiParams, r0, omega):
    """Classical improved-NM Purcell factor and its four-term partition.

    Returns
    -------
    total : ndarray
        ``1 + LL + LR + RL + RR``.
    parts : dict
        Per-term contributions ``Im G_ij / Im G_B``.
    """
    om = np.asarray(omega, dtype=float)
    gb = om**2 / 4.0
    parts = {k: np.imag(v) / gb for k, v in green_nmi(params, r0, r0, om, terms=True).items()}
    return 1.0 + sum(parts.values()), parts


def nmi_couplings(params: NmiParams, r0, omega0, dipole: float = 1.0):
    """Real couplings ``g_i = d sqrt(omega0 / 2) Re f_i(r0)``, shape ``(..., 2)``."""
    om = np.asarray(omega0, dtype=float)
    return dipole * np.sqrt(om / 2.0)[..., None] * params.real_fields(r0)


def eigenbasis(params: NmiParams, hopping: str = "minus"):
    """Eigenvalues and eigenvector matrix ``P`` of the photon Hamiltonian.

    Eigenvalues are ordered to match ``(omega_plus, omega_minus)``.
    """
    Om = params.omega_matrix(hopping)
    # closed-form eigenvalue separation; rounding keeps the numerical cond(P)
    # near 1/sqrt(eps) even at an exact exceptional point
    wl, wr = params.bare_omegas
    sep = abs(sqrt_rotated_cut(Om[0, 1] * Om[1, 0] * 4 + (wl - wr) ** 2))
    if sep * P_COND_MAX < 2 * abs(params.kappa_nmi) + abs(wl - wr):
        raise DegenerateEigenbasisError("photon Hamiltonian is at or near an exceptional point")
    lam, P = np.linalg.eig(Om)
    if abs(lam[0] - params.omega_plus) + abs(lam[1] - params.omega_minus) > \
            abs(lam[1] - params.omega_plus) + abs(lam[0] - params.omega_minus):
        lam, P = lam[::-1], P[:, ::-1]
    if np.linalg.cond(P) > P_COND_MAX:
        raise DegenerateEigenbasisError("photon Hamiltonian is at or near an exceptional point")
    return lam, P


def gamma_qnmi(params: NmiParams, r0, omega0, hopping: str = "minus", dipole: float = 1.0):
    """Emitter decay rate of the improved-NM quantum model.

    ``Gamma_ij = 2 g_i g_j Re{ sum_k P_ik i / (omega0 - Omega_k) (P^{-1})_kj }``.

    Returns
    -------
    total : ndarray
    parts : dict of the ``LL, LR, RL, RR`` terms
    """
    lam, P = eigenbasis(params, hopping)
    Pi = np.linalg.inv(P)
    om = np.asarray(omega0, dtype=float)
    g = nmi_couplings(params, r0, om, dipole)
    prop = 1j / (om[..., None] - lam)  # (..., k)
    parts = {}
    for i, a in enumerate("LR"):
        for j, b in enumerate("LR"):
            mat = np.sum(P[i, :] * prop * Pi[:, j], axis=-1)
            parts[a + b] = 2.0 * g[..., i] * g[..., j] * np.real(mat)
    return sum(parts.values()), parts


def purcell_qnmi(params: NmiParams, r0, omega0, hopping: str = "minus"):
    """``1 + Gamma / Gamma_0`` of the improved-NM quantum model, with its partition."""
    om = np.asarray(omega0, dtype=float)
    g0 = 0.5 * om**2
    total, parts = gamma_qnmi(params, r0, om, hopping)
    return 1.0 + total / g0, {k: v / g0 for k, v in parts.items()}
