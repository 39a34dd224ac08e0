"""Coupled QNM theory for two disks.

Overlap integrals of one bare mode against the other over a disk, the
coupling rates built from them, and the hybrid eigenfrequencies and
eigenvectors of the resulting two-mode problem.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import special
from .disk import BareMode, ConvergenceError, Geometry, eval_field, lommel_cross

NEAR_EP_RTOL = 1e-8


class NearExceptionalPointWarning(RuntimeWarning):
    """Hybrid coefficients are ill-conditioned close to a degeneracy."""


# ---------------------------------------------------------------------------
# disk quadrature


def disk_grid(geometry: Geometry, label: str, nr: int = 64, nphi: int = 256):
    """Tensor Gauss-Legendre nodes over disk ``label``.

    Returns Cartesian nodes ``(X, Y)`` in internal units and area weights
    ``W`` (including the radial Jacobian).
    """
    xr, wr = np.polynomial.legendre.leggauss(nr)
    r = 0.5 * (xr + 1.0)
    wr = 0.5 * wr
    xp, wp = np.polynomial.legendre.leggauss(nphi)
    p = np.pi * (xp + 1.0)
    wp = np.pi * wp
    R, P = np.meshgrid(r, p, indexing="ij")
    W = np.outer(wr * r, wp)
    cx, cy = geometry.center(label)
    sgn = 1.0 if label == "L" else -1.0
    return cx + sgn * R * np.cos(P), cy + R * np.sin(P), W


def _adaptive(integrand, geometry, label, nr, nphi, rtol, max_doublings):
    X, Y, W = disk_grid(geometry, label, nr, nphi)
    prev = np.sum(W * integrand(X, Y))
    for _ in range(max_doublings):
        nr, nphi = 2 * nr, 2 * nphi
        X, Y, W = disk_grid(geometry, label, nr, nphi)
        cur = np.sum(W * integrand(X, Y))
        if abs(cur - prev) <= rtol * abs(cur):
            return complex(cur)
        prev = cur
    raise ConvergenceError(f"disk quadrature not converged to {rtol:g} after {max_doublings} doublings")


def disk_integral(integrand, geometry: Geometry, label: str, nr: int = 64, nphi: int = 256,
                  rtol: float = 1e-6, max_doublings: int = 3) -> complex:
    """Integrate ``integrand(X, Y)`` over disk ``label``.

    The order starts at ``nr x nphi`` and is doubled until two successive
    results agree to ``rtol``.
    """
    return _adaptive(integrand, geometry, label, nr, nphi, rtol, max_doublings)


# ---------------------------------------------------------------------------
# overlaps and couplings


def overlap_vij(mode_i: BareMode, mode_j: BareMode, geometry: Geometry,
                nr: int = 64, nphi: int = 256, rtol: float = 1e-6) -> complex:
    """``int_{disk i} (eps_i - eps_B) f_i f_j dA`` by adaptive quadrature."""
    contrast = mode_i.n**2 - mode_i.n_B**2

    def integrand(X, Y):
        return contrast * eval_field(mode_i, X, Y, geometry) * eval_field(mode_j, X, Y, geometry)

    return disk_integral(integrand, geometry, mode_i.label, nr, nphi, rtol)


def overlap_vii_closed(mode: BareMode) -> complex:
    """Self overlap ``int (eps - eps_B) f^2`` over its own disk, closed form."""
    alpha = mode.n * mode.ka
    radial = lommel_cross(mode.m, alpha, alpha) / special.bessel_j(mode.m, alpha) ** 2
    return complex((mode.n**2 - mode.n_B**2) * mode.norm_const**2 * np.pi * radial)


def overlap_vij_addition(mode_i: BareMode, mode_j: BareMode, geometry: Geometry) -> complex:
    """Cross overlap via the addition theorem and a Lommel closed form.

    The exterior field of mode ``j`` is re-expanded in regular waves about the
    centre of disk ``i``; the azimuthal integral keeps only orders ``+-m`` and
    the radial integral of two ``J_m`` is elementary.
    """
    if mode_i.label == mode_j.label:
        return overlap_vii_closed(mode_i)
    m = mode_i.m
    if mode_j.m != m:
        raise ValueError("addition-theorem route assumes equal azimuthal orders")
    ci, cj = np.array(geometry.center(mode_i.label)), np.array(geometry.center(mode_j.label))
    d_vec = ci - cj
    d = np.hypot(*d_vec)
    alpha_d = np.arctan2(d_vec[1], d_vec[0])
    kb = mode_j.n_B * mode_j.ka
    ki = mode_i.n * mode_i.ka
    # global-angle phases: the right disk measures its angle from -x
    sign_i = 1.0 if mode_i.label == "L" else (-1.0) ** m
    sign_j = 1.0 if mode_j.label == "L" else (-1.0) ** m
    total = 0j
    # H_m cos(m th) = (H_m e^{im th} + (-1)^m H_{-m} e^{-im th}) / 2
    for nu, pref in ((m, 0.5), (-m, 0.5 * (-1) ** m)):
        for n_ord in (m, -m):
            trans = special.hankel1_signed(nu - n_ord, kb * d) * np.exp(1j * (nu - n_ord) * alpha_d)
            # int_0^2pi cos(m th) e^{i n th} dth = pi for n = +-m
            ang = np.pi
            # int_0^1 r J_m(ki r) J_n(kb r) dr, J_{-m} = (-1)^m J_m
            rad = lommel_cross(m, ki, kb) * (1.0 if n_ord >= 0 else (-1.0) ** m)
            total += pref * trans * ang * rad
    field_scale = mode_j.norm_const / special.hankel1(m, kb) * sign_j
    inner_scale = mode_i.norm_const / special.bessel_j(m, ki) * sign_i
    contrast = mode_i.n**2 - mode_i.n_B**2
    return complex(contrast * inner_scale * field_scale * total)


def coupling_kappa(mode_i: BareMode, mode_j: BareMode, geometry: Geometry,
                   method: str = "quadrature", **kw) -> complex:
    """Coupling rate ``kappa_ij = (omega_j / 2) V_ij`` in internal units."""
    if method == "quadrature":
        v = overlap_vij(mode_i, mode_j, geometry, **kw)
    elif method == "addition":
        v = overlap_vij_addition(mode_i, mode_j, geometry)
    else:
        raise ValueError(f"unknown method {method!r}")
    return 0.5 * mode_j.ka * v


# ---------------------------------------------------------------------------
# hybridization


def sqrt_rotated_cut(z):
    """Square root with the branch cut on the negative imaginary axis.

    Coincides with the principal root except in the third quadrant. For a
    nearly real radicand this keeps ``Re sqrt > 0`` when it is positive and
    ``Im sqrt > 0`` when it is negative, independent of the sign of a tiny
    imaginary residue.
    """
    z = np.asarray(z, dtype=complex)
    s = np.sqrt(z)
    s = np.where((z.real < 0) & (z.imag < 0), -s, s)
    return s[()] if s.ndim == 0 else s


@dataclass(frozen=True)
class HybridPair:
    """Two hybrid QNMs of the coupled disks (internal units).

    ``c_plus`` and ``c_minus`` are expansion coefficients on ``(f_L, f_R)``.
    """

    omega_plus: complex
    omega_minus: complex
    c_plus: tuple[complex, complex]
    c_minus: tuple[complex, complex]
    kappa_LR: complex
    kappa_RL: complex
    mode_L: BareMode
    mode_R: BareMode
    geometry: Geometry
    near_ep: bool = False

    @property
    def omegas(self) -> np.ndarray:
        return np.array([self.omega_plus, self.omega_minus])

    @property
    def coefficients(self) -> np.ndarray:
        """2x2 array, row 0 for ``+``, row 1 for ``-``."""
        return np.array([self.c_plus, self.c_minus], dtype=complex)

    def swapped(self) -> "HybridPair":
        return replace(self, omega_plus=self.omega_minus, omega_minus=self.omega_plus,
                       c_plus=self.c_minus, c_minus=self.c_plus)

    def si_dict(self) -> dict:
        s = 2.99792458e8 / self.geometry.radius_a
        cz = lambda z: [z.real, z.imag]
        return {
            "d_gap_m": self.geometry.d_gap,
            "omega_plus_rad_s": cz(self.omega_plus * s),
            "omega_minus_rad_s": cz(self.omega_minus * s),
            "kappa_LR_rad_s": cz(self.kappa_LR * s),
            "kappa_RL_rad_s": cz(self.kappa_RL * s),
            "c_plus": [cz(c) for c in self.c_plus],
            "c_minus": [cz(c) for c in self.c_minus],
            "near_ep": self.near_ep,
        }


def hybrid_frequencies(w1: complex, w2: complex, k12: complex, k21: complex, sqrt=sqrt_rotated_cut):
    """Roots of ``(w - w1)(w - w2) = k12 k21`` labelled by the given square root."""
    disc = sqrt(4 * k12 * k21 + (w1 - w2) ** 2)
    mean = 0.5 * (w1 + w2)
    return complex(mean + 0.5 * disc), complex(mean - 0.5 * disc)


def hybrid_coefficients(w: complex, w2: complex, k21: complex, sqrt=sqrt_rotated_cut):
    """Coefficients ``((w - w2), -k21) / sqrt((w - w2)^2 + k21^2)``."""
    den = sqrt((w - w2) ** 2 + k21**2)
    return complex((w - w2) / den), complex(-k21 / den)


def _companion_vector(w, w1, w2, k12, k21):
    M = np.array([[w1, -k12], [-k21, w2]], dtype=complex)
    vals, vecs = np.linalg.eig(M)
    v = vecs[:, int(np.argmin(np.abs(vals - w)))]
    v = v / np.sqrt(v @ v)
    # match the closed-form gauge where it is defined
    ref = np.array([w - w2, -k21])
    if np.real(np.vdot(ref, v)) < 0:
        v = -v
    return complex(v[0]), complex(v[1])


def hybridize(mode_L: BareMode, mode_R: BareMode, geometry: Geometry,
              kappa_method: str = "quadrature", sqrt=sqrt_rotated_cut, **kw) -> HybridPair:
    """Couple the two bare modes and return the hybrid pair.

    The ``+`` branch carries ``+sqrt`` of the discriminant. With the default
    rotated-cut root, ``+`` is the higher-frequency hybrid when the real parts
    split and the lower-loss hybrid when the imaginary parts split.
    """
    kLR = coupling_kappa(mode_L, mode_R, geometry, kappa_method, **kw)
    kRL = coupling_kappa(mode_R, mode_L, geometry, kappa_method, **kw)
    w1, w2 = mode_L.ka, mode_R.ka
    wp, wm = hybrid_frequencies(w1, w2, kLR, kRL, sqrt)
    disc2 = 4 * kLR * kRL + (w1 - w2) ** 2
    scale = abs(w1 - w2) ** 2 + 4 * abs(kLR * kRL)
    near = bool(scale > 0 and abs(disc2) < NEAR_EP_RTOL * scale)
    if near:
        warnings.warn("hybrid pair within the near-degeneracy region; using companion eigenvectors",
                      NearExceptionalPointWarning, stacklevel=2)
        cp = _companion_vector(wp, w1, w2, kLR, kRL)
        cm = _companion_vector(wm, w1, w2, kLR, kRL)
    elif kRL == 0 and kLR == 0:
        # decoupled: each hybrid is exactly one bare mode, assigned by the root branch
        d = complex(sqrt((w1 - w2) ** 2))
        if abs(d - (w1 - w2)) <= abs(d + (w1 - w2)):
            wp, wm, cp, cm = w1, w2, (1 + 0j, 0j), (0j, 1 + 0j)
        else:
            wp, wm, cp, cm = w2, w1, (0j, 1 + 0j), (1 + 0j, 0j)
    else:
        cp = hybrid_coefficients(wp, w2, kRL, sqrt)
        cm = hybrid_coefficients(wm, w2, kRL, sqrt)
    return HybridPair(wp, wm, cp, cm, kLR, kRL, mode_L, mode_R, geometry, near)


def relabel_by_continuity(pairs: list[HybridPair]) -> list[HybridPair]:
    """Nearest-neighbour labelling along a sweep.

    The first pair puts the root with the larger real part on ``+``; each
    following pair is swapped if that lowers the total eigenvalue jump.
    """
    out = []
    for i, p in enumerate(pairs):
        if i == 0:
            q = p if p.omega_plus.real >= p.omega_minus.real else p.swapped()
        else:
            prev = out[-1]
            keep = abs(p.omega_plus - prev.omega_plus) + abs(p.omega_minus - prev.omega_minus)
            swap = abs(p.omega_minus - prev.omega_plus) + abs(p.omega_plus - prev.omega_minus)
            q = p if keep <= swap else p.swapped()
        out.append(q)
    return out


def hybridize_sweep(mode_L: BareMode, mode_R: BareMode, geometry: Geometry, gaps,
                    labeling: str = "branch", **kw) -> list[HybridPair]:
    """Hybridize over a list of gaps (metres).

    ``labeling="branch"`` keeps the per-gap square-root labels;
    ``"continuity"`` relabels by nearest-neighbour tracking.
    """
    pairs = [hybridize(mode_L, mode_R, geometry.with_gap(g), **kw) for g in gaps]
    if labeling == "continuity":
        return relabel_by_continuity(pairs)
    if labeling != "branch":
        raise ValueError(f"unknown labeling {labeling!r}")
    return pairs


def eval_hybrid_field(pair: HybridPair, branch: str, x, y):
    """``c1 f_L + c2 f_R`` at Cartesian points (internal units)."""
    c = pair.c_plus if branch == "+" else pair.c_minus
    fL = eval_field(pair.mode_L, x, y, pair.geometry)
    fR = eval_field(pair.mode_R, x, y, pair.geometry)
    return c[0] * fL + c[1] * fR


def bare_fields_at(pair: HybridPair, point) -> np.ndarray:
    """``(f_L, f_R)`` at one point."""
    x, y = point
    return np.array([eval_field(pair.mode_L, x, y, pair.geometry),
                     eval_field(pair.mode_R, x, y, pair.geometry)], dtype=complex)


def hybrid_fields_at(pair: HybridPair, point) -> np.ndarray:
    """``(f_+, f_-)`` at one point."""
    return pair.coefficients @ bare_fields_at(pair, point)
