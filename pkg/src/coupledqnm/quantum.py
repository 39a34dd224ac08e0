"""Quantized hybrid QNMs: overlap matrices, symmetrization and quantum rates.

Internal units with ``hbar = eps_0 = 1`` and unit dipole moment: couplings are
``g_mu = sqrt(omega_mu / 2) f_mu(r0)`` and the free-space rate is
``Gamma_0 = omega0^2 / 2``. The factor ``c / a`` converts rates to rad/s.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import special
from .cqt import HybridPair, disk_integral, hybrid_fields_at
from .disk import BareMode, eval_field, lommel_cross
from .units import C_LIGHT

HERMITIAN_TOL = 1e-10


class PositivityError(ValueError):
    """A matrix that must be positive (semi)definite is not."""


# ---------------------------------------------------------------------------
# overlap matrices


@dataclass(frozen=True)
class SMatrix:
    """Quantum overlap matrix on the ``(+, -)`` hybrid basis.

    ``provenance`` is ``"pole"`` or ``"full-frequency"``. Entries are
    Hermitian and positive definite, or identically zero when neither disk
    absorbs; a zero matrix is rejected later by :func:`matrix_sqrt_hpd`.
    """

    entries: np.ndarray
    provenance: str = "pole"

    def __post_init__(self):
        S = np.asarray(self.entries, dtype=complex)
        if S.shape != (2, 2):
            raise ValueError("S must be 2x2")
        scale = max(np.max(np.abs(S)), 1e-300)
        if np.max(np.abs(S - S.conj().T)) > HERMITIAN_TOL * scale:
            raise ValueError("S is not Hermitian")
        if np.any(S != 0) and np.min(np.linalg.eigvalsh(0.5 * (S + S.conj().T))) <= 0:
            raise PositivityError("S is not positive definite")
        object.__setattr__(self, "entries", S)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def _self_overlap_closed(mode: BareMode) -> float:
    """``int_disk |f|^2 dA`` over the mode's own disk."""
    alpha = mode.n * mode.ka
    radial = lommel_cross(mode.m, alpha, np.conj(alpha)) / abs(special.bessel_j(mode.m, alpha)) ** 2
    return float(np.real(abs(mode.norm_const) ** 2 * np.pi * radial))


def bare_gram(pair: HybridPair, nr: int = 64, nphi: int = 256, rtol: float = 1e-8) -> dict:
    """``B_d[a, b] = int_{disk d} f_a f_b^* dA`` for bare modes ``a, b`` in ``(L, R)``.

    The own-mode term on each disk uses the closed-form Lommel integral; the
    remaining entries use adaptive disk quadrature.
    """
    g = pair.geometry
    modes = (pair.mode_L, pair.mode_R)
    out = {}
    for d, own in (("L", 0), ("R", 1)):
        B = np.zeros((2, 2), dtype=complex)
        B[own, own] = _self_overlap_closed(modes[own])
        other = 1 - own

        def cross(X, Y, o=other, s=own):
            fs = eval_field(modes[s], X, Y, g)
            fo = eval_field(modes[o], X, Y, g)
            return np.stack([fo * np.conj(fo), fs * np.conj(fo)])

        vals = _disk_integral_vec(cross, g, d, nr, nphi, rtol)
        B[other, other] = vals[0].real
        B[own, other] = vals[1]
        B[other, own] = np.conj(vals[1])
        out[d] = B
    return out


def _disk_integral_vec(integrand, geometry, label, nr, nphi, rtol):
    res = [disk_integral(lambda X, Y, k=k: integrand(X, Y)[k], geometry, label, nr, nphi, rtol)
           for k in range(2)]
    return np.array(res)


def absorption_overlap(pair: HybridPair, gram: dict | None = None) -> np.ndarray:
    """``I[mu, eta] = sum_d Im(n_d^2) int_{disk d} f_mu f_eta^* dA``."""
    gram = bare_gram(pair) if gram is None else gram
    C = pair.coefficients
    g = pair.geometry
    I = np.zeros((2, 2), dtype=complex)
    for d in ("L", "R"):
        eps_i = (g.index(d) ** 2).imag
        I += eps_i * C @ gram[d] @ C.conj().T
    return I


def s_nrad_pole(pair: HybridPair, gram: dict | None = None) -> SMatrix:
    """Pole-approximated overlap matrix.

    ``S[mu, eta] = sqrt(w_mu w_eta) / (i (wt_mu - conj(wt_eta))) I[mu, eta]``.
    """
    I = absorption_overlap(pair, gram)
    w = pair.omegas
    wr = w.real
    S = np.sqrt(np.outer(wr, wr)) / (1j * (w[:, None] - np.conj(w)[None, :])) * I
    return SMatrix(_hermitize(S), "pole")


def _hermitize(S):
    # remove rounding-level anti-Hermitian residue from quadrature
    return 0.5 * (S + S.conj().T)


def s_density(pair: HybridPair, omega, I: np.ndarray | None = None) -> np.ndarray:
    """Frequency density ``S[mu, eta](omega)``; shape ``(..., 2, 2)``.

    ``omega^2 / ((wt_mu - omega)(conj(wt_eta) - omega)) I / (2 pi sqrt(w_mu w_eta))``.
    """
    I = absorption_overlap(pair) if I is None else I
    w = pair.omegas
    wr = w.real
    om = np.asarray(omega, dtype=float)[..., None, None]
    kern = om**2 / ((w[:, None] - om) * (np.conj(w)[None, :] - om))
    return kern * I / (2 * np.pi * np.sqrt(np.outer(wr, wr)))


def _graded_nodes(centres, width, lo, hi, order=32, ratio=2.0):
    """Gauss-Legendre nodes on panels that grow geometrically away from ``centres``."""
    bps = {lo, hi}
    for c in centres:
        h = width
        while c - h > lo or c + h < hi:
            for b in (c - h, c + h):
                if lo < b < hi:
                    bps.add(b)
            h *= ratio
    bps = np.array(sorted(bps))
    x, wq = np.polynomial.legendre.leggauss(order)
    a, b = bps[:-1, None], bps[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * wq[None, :]
    return nodes.ravel(), weights.ravel()


def full_frequency_cutoff(pair: HybridPair) -> float:
    """Upper limit ``omega_L + 1000 gamma_R`` of the frequency integral."""
    return pair.mode_L.ka.real + 1000.0 * (-pair.mode_R.ka.imag)


def s_nrad_full(pair: HybridPair, omega_max: float | None = None, order: int = 32,
                gram: dict | None = None, method: str = "quadrature") -> SMatrix:
    """Overlap matrix from the full positive-frequency integral of the density.

    Parameters
    ----------
    omega_max : float, optional
        Upper limit; defaults to :func:`full_frequency_cutoff`.
    method : {"quadrature", "closed"}
        Graded Gauss-Legendre panels about both poles, or the elementary
        antiderivative of the rational kernel.
    """
    I = absorption_overlap(pair, gram)
    W = full_frequency_cutoff(pair) if omega_max is None else float(omega_max)
    w = pair.omegas
    wr = w.real
    if method == "quadrature":
        gmin = float(np.min(-w.imag))
        nodes, weights = _graded_nodes(wr, gmin, 0.0, W, order)
        dens = s_density(pair, nodes, I)
        S = np.tensordot(weights, dens, axes=(0, 0))
    elif method == "closed":
        S = np.empty((2, 2), dtype=complex)
        for i in range(2):
            for j in range(2):
                S[i, j] = _rational_integral(w[i], np.conj(w[j]), W) * I[i, j] / (2 * np.pi * np.sqrt(wr[i] * wr[j]))
    else:
        raise ValueError(f"unknown method {method!r}")
    return SMatrix(_hermitize(S), "full-frequency")


def _rational_integral(a: complex, b: complex, W: float) -> complex:
    """``int_0^W omega^2 / ((omega - a)(omega - b)) d omega`` for ``Im a < 0 < Im b``."""
    la = np.log(W - a) - np.log(-a)
    lb = np.log(W - b) - np.log(-b)
    return complex(W + a * a / (a - b) * la + b * b / (b - a) * lb)


# ---------------------------------------------------------------------------
# symmetrization


def _check_hermitian(A, name):
    A = np.asarray(A, dtype=complex)
    scale = max(np.max(np.abs(A)), 1e-300)
    if np.max(np.abs(A - A.conj().T)) > HERMITIAN_TOL * scale:
        raise ValueError(f"{name} is not Hermitian")
    return 0.5 * (A + A.conj().T)


def matrix_sqrt_hpd(S, inverse: bool = False) -> np.ndarray:
    """Principal square root (or its inverse) of a Hermitian positive-definite matrix."""
    A = _check_hermitian(np.asarray(S), "S")
    lam, V = np.linalg.eigh(A)
    if np.min(lam) <= 0:
        raise PositivityError("matrix is not positive definite")
    p = -0.5 if inverse else 0.5
    return (V * lam**p) @ V.conj().T


def chi_matrices(S, omega_tilde) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian and dissipative parts of ``S^{-1/2} diag(wt) S^{1/2}``.

    Returns
    -------
    chi_plus : ``(chi + chi^dagger) / 2``
    chi_minus : ``i (chi - chi^dagger) / 2``, positive semidefinite
    """
    Sh = matrix_sqrt_hpd(S)
    Shi = matrix_sqrt_hpd(S, inverse=True)
    chi = Shi @ np.diag(np.asarray(omega_tilde, dtype=complex)) @ Sh
    cp = 0.5 * (chi + chi.conj().T)
    cm = 0.5j * (chi - chi.conj().T)
    lam = np.linalg.eigvalsh(cm)
    if np.min(lam) < -1e-10 * np.max(np.abs(lam)):
        raise PositivityError("dissipator matrix has a negative eigenvalue")
    return cp, cm


@dataclass(frozen=True)
class EmitterCouplings:
    """Bare-QNM couplings ``g`` and symmetrized couplings ``gs`` on ``(+, -)``."""

    g: np.ndarray
    gs: np.ndarray
    omega_modes: np.ndarray

    @property
    def g_plus(self):
        return self.g[0]

    @property
    def g_minus(self):
        return self.g[1]

    @property
    def gs_plus(self):
        return self.gs[0]

    @property
    def gs_minus(self):
        return self.gs[1]


def emitter_couplings(pair: HybridPair, S, r0, dipole: float = 1.0) -> EmitterCouplings:
    """``g_mu = d sqrt(w_mu / 2) f_mu(r0)`` and ``gs_mu = sum_eta (S^{1/2})_{eta mu} g_eta``."""
    f = hybrid_fields_at(pair, r0)
    wr = pair.omegas.real
    g = dipole * np.sqrt(wr / 2.0) * f
    gs = matrix_sqrt_hpd(S).T @ g
    return EmitterCouplings(g, gs, pair.omegas)


def rate_kernel(omega_tilde, omega0):
    """``K[mu, eta] = (i (w_mu - w_eta) + g_mu + g_eta) / ((D_mu - i g_mu)(D_eta + i g_eta))``."""
    w = np.asarray(omega_tilde, dtype=complex)
    wr, gm = w.real, -w.imag
    om = np.asarray(omega0, dtype=float)[..., None, None]
    D = wr - om[..., 0]
    num = 1j * (wr[:, None] - wr[None, :]) + gm[:, None] + gm[None, :]
    den = (D[..., :, None] - 1j * gm[:, None]) * (D[..., None, :] + 1j * gm[None, :])
    return num / den


def gamma_qqnm(S, couplings: EmitterCouplings, omega0):
    """Bad-cavity emitter decay rate and its diagonal/non-diagonal split.

    Returns
    -------
    total, diag, ndiag : ndarray
        ``sum_{mu eta} g_mu S_{mu eta} g_eta^* K_{mu eta}`` and its parts;
        ``total = diag + ndiag``.
    """
    S = np.asarray(S, dtype=complex)
    g = couplings.g
    M = np.outer(g, np.conj(g)) * S * rate_kernel(couplings.omega_modes, omega0)
    diag = np.real(M[..., 0, 0] + M[..., 1, 1])
    ndiag = np.real(M[..., 0, 1] + M[..., 1, 0])
    total = diag + ndiag
    return total, diag, ndiag


def free_space_rate(omega0):
    """``Gamma_0 = omega0^2 / 2`` (internal units)."""
    return 0.5 * np.asarray(omega0, dtype=float) ** 2


def purcell_quantum(S, couplings: EmitterCouplings, omega0):
    """``1 + Gamma / Gamma_0``."""
    return 1.0 + gamma_qqnm(S, couplings, omega0)[0] / free_space_rate(omega0)


def purcell_qnm_jc(pair: HybridPair, r0, omega0):
    """Dissipative Jaynes-Cummings limit, the quantum rate with ``S = I``."""
    I2 = np.eye(2)
    return purcell_quantum(I2, emitter_couplings(pair, I2, r0), omega0)


# ---------------------------------------------------------------------------
# transformed picture


def diagonalize_dissipator(chi_minus, previous: np.ndarray | None = None):
    """Unitary eigendecomposition of the dissipator matrix.

    Eigenvectors are assigned to the ``(+, -)`` slots by overlap: with
    ``previous`` (a unitary from a neighbouring sweep point) by maximal
    ``|previous^dagger U|``, otherwise by the largest component on the
    original basis vectors. Each column is phased so its diagonal entry is
    real and non-negative.

    Returns
    -------
    Gamma_Q : ndarray of 2 decay rates
    U : 2x2 unitary with ``U^dagger chi_minus U = diag(Gamma_Q)``
    """
    A = _check_hermitian(chi_minus, "chi_minus")
    lam, U = np.linalg.eigh(A)
    ref = np.eye(2) if previous is None else np.asarray(previous)
    ov = np.abs(ref.conj().T @ U)
    if ov[0, 0] * ov[1, 1] < ov[0, 1] * ov[1, 0]:
        lam, U = lam[::-1], U[:, ::-1]
    for k in range(2):
        d = U[k, k]
        if abs(d) > 0:
            U[:, k] *= np.conj(d) / abs(d)
    return lam, U


@dataclass(frozen=True)
class QuantumParams:
    """Transformed-picture parameters, internal units; ``freq_unit`` rad/s per unit."""

    S: np.ndarray
    chi_plus: np.ndarray
    chi_minus: np.ndarray
    U: np.ndarray
    Gamma_Q: np.ndarray
    Omega: np.ndarray
    G_em_Q: complex
    G_Q: np.ndarray
    delta_gamma: np.ndarray
    delta_g: np.ndarray
    freq_unit: float = 1.0

    def to_dict(self) -> dict:
        """JSON-ready dictionary in rad/s with complex values as ``[re, im]``."""
        s = self.freq_unit

        def cz(z):
            z = np.asarray(z, dtype=complex)
            return np.stack([z.real, z.imag], axis=-1).tolist()

        def opt(x):
            return [None if not np.isfinite(v) else float(v) for v in x]

        return {
            "S": cz(self.S),
            "chi_plus": cz(self.chi_plus * s),
            "chi_minus": cz(self.chi_minus * s),
            "Gamma_pm_Q": (np.asarray(self.Gamma_Q) * s).tolist(),
            "Omega_pm": (np.asarray(self.Omega) * s).tolist(),
            "G_em_Q": cz(self.G_em_Q * s),
            "G_pm_Q": cz(np.asarray(self.G_Q) * s),
            "delta_gamma_pm": opt(self.delta_gamma),
            "delta_g_pm": opt(self.delta_g),
        }


def transformed_params(S, chi_plus, chi_minus, omega_tilde, couplings: EmitterCouplings | None = None,
                       previous_U=None, freq_unit: float = 1.0) -> QuantumParams:
    """Rotate into the eigenbasis of the dissipator and form the ratios.

    ``Omega`` and ``G_em_Q`` are the diagonal and off-diagonal entries of
    ``U^dagger chi_plus U``; ``G_Q = U^T gs``; ``delta_gamma = Gamma_Q / gamma``
    and ``delta_g = |G_Q| / |g|``, undefined (NaN) when ``|g|`` is negligible.
    """
    Gam, U = diagonalize_dissipator(chi_minus, previous_U)
    H = U.conj().T @ np.asarray(chi_plus) @ U
    gam = -np.asarray(omega_tilde, dtype=complex).imag
    if couplings is not None:
        GQ = U.T @ couplings.gs
        gabs = np.abs(couplings.g)
        with np.errstate(divide="ignore", invalid="ignore"):
            dg = np.where(gabs > 1e-14 * max(gabs.max(), 1e-300), np.abs(GQ) / gabs, np.nan)
    else:
        GQ = np.full(2, np.nan + 0j)
        dg = np.full(2, np.nan)
    return QuantumParams(np.asarray(S), np.asarray(chi_plus), np.asarray(chi_minus), U, Gam,
                         np.real(np.diag(H)), complex(H[0, 1]), GQ, Gam / gam, dg, freq_unit)


def quantum_params(pair: HybridPair, r0=None, S: SMatrix | None = None, dipole: float = 1.0,
                   previous_U=None) -> QuantumParams:
    """Full pipeline from a hybrid pair to :class:`QuantumParams`."""
    S = s_nrad_pole(pair) if S is None else S
    cp, cm = chi_matrices(S, pair.omegas)
    cpl = emitter_couplings(pair, S, r0, dipole) if r0 is not None else None
    unit = C_LIGHT / pair.geometry.radius_a
    return transformed_params(np.asarray(S), cp, cm, pair.omegas, cpl, previous_U, unit)
