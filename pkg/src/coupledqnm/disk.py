"""Bare whispering-gallery QNMs of a single 2D dielectric disk (TM).

The field is the out-of-plane component ``f_z``. Inside the disk it is
``N J_m(n k r) / J_m(n k a) cos(m phi)`` and outside
``N H_m(n_B k r) / H_m(n_B k a) cos(m phi)``, with time dependence
``exp(-i omega t)`` so that outgoing waves use ``H^(1)`` and
``Im(omega) < 0``.

All computations use internal units (lengths in units of ``a``, angular
frequencies in units of ``c/a``); :class:`BareMode` exposes SI views.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import special
from .units import C_LIGHT


class ConvergenceError(RuntimeError):
    """Newton or quadrature iteration failed to converge."""


class WrongRadialOrderError(RuntimeError):
    """The converged root does not carry the requested radial order."""


class DegenerateNormError(RuntimeError):
    """The regularized norm vanished before scaling."""


@dataclass(frozen=True)
class Geometry:
    """Two disks of equal radius on the x axis, gap centred at the origin.

    Parameters
    ----------
    radius_a : float
        Disk radius in metres.
    n_L, n_R : complex
        Refractive indices of the left and right disks (``Im >= 0``).
    n_B : float
        Real background index.
    d_gap : float
        Edge-to-edge gap in metres.
    dipole_offset : float or None
        Signed dipole position along the axis, measured from the gap centre
        in metres. ``None`` when no dipole is attached.
    """

    radius_a: float = 5e-6
    n_L: complex = 2 + 1e-5j
    n_R: complex = 2 + 1e-4j
    n_B: float = 1.0
    d_gap: float = 800e-9
    dipole_offset: float | None = None

    def __post_init__(self):
        if not self.radius_a > 0:
            raise ValueError("radius_a must be positive")
        if self.d_gap < 0:
            raise ValueError("d_gap must be non-negative")
        if complex(self.n_L).imag < 0 or complex(self.n_R).imag < 0:
            raise ValueError("disk indices must have non-negative imaginary parts")
        if not self.n_B > 0:
            raise ValueError("n_B must be positive")

    @property
    def gap(self) -> float:
        """Gap in units of the radius."""
        return self.d_gap / self.radius_a

    @property
    def center_L(self) -> tuple[float, float]:
        """Left centre in metres."""
        return (-(self.radius_a + self.d_gap / 2), 0.0)

    @property
    def center_R(self) -> tuple[float, float]:
        return (self.radius_a + self.d_gap / 2, 0.0)

    def center(self, label: str) -> tuple[float, float]:
        """Centre of disk ``label`` in internal units."""
        cx = 1.0 + self.gap / 2
        return (-cx, 0.0) if label == "L" else (cx, 0.0)

    def index(self, label: str) -> complex:
        return complex(self.n_L if label == "L" else self.n_R)

    def with_gap(self, d_gap: float) -> "Geometry":
        return replace(self, d_gap=d_gap)

    def dipole_near(self, side: str, distance: float) -> tuple[float, float]:
        """Internal coordinates of a point on the axis ``distance`` metres
        outside the rim of disk ``side``, on the gap side."""
        d = distance / self.radius_a
        if side == "L":
            return (-self.gap / 2 + d, 0.0)
        if side == "R":
            return (self.gap / 2 - d, 0.0)
        raise ValueError(f"side must be 'L' or 'R', got {side!r}")

    def dipole_point(self) -> tuple[float, float]:
        if self.dipole_offset is None:
            raise ValueError("geometry carries no dipole offset")
        return (self.dipole_offset / self.radius_a, 0.0)


@dataclass(frozen=True)
class BareMode:
    """Normalized standing-wave QNM of one isolated disk.

    ``ka`` is the dimensionless complex root ``k_tilde * a``; internal
    angular frequency equals ``ka``.
    """

    label: str
    m: int
    q: int
    ka: complex
    n: complex
    n_B: float
    a: float
    norm_const: complex = 1.0 + 0j
    parity: str = "cos"

    @property
    def k_tilde(self) -> complex:
        return self.ka / self.a

    @property
    def omega_tilde(self) -> complex:
        """Complex angular frequency in rad/s."""
        return C_LIGHT * self.k_tilde

    @property
    def omega(self) -> float:
        return self.omega_tilde.real

    @property
    def gamma(self) -> float:
        return -self.omega_tilde.imag

    @property
    def Q(self) -> float:
        return self.ka.real / (-2.0 * self.ka.imag)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "m": self.m,
            "q": self.q,
            "n": [self.n.real, self.n.imag],
            "n_B": self.n_B,
            "a_m": self.a,
            "ka": [self.ka.real, self.ka.imag],
            "omega_tilde_rad_s": [self.omega_tilde.real, self.omega_tilde.imag],
            "Q": self.Q,
            "norm_const": [self.norm_const.real, self.norm_const.imag],
            "parity": self.parity,
        }


# ---------------------------------------------------------------------------
# resonance condition


def resonance_residual(k, m: int, n: complex, n_B: float = 1.0, a: float = 1.0):
    """Matching residual ``D(k)`` of the TM disk problem.

    ``D = n J_m'(n k a) H_m(n_B k a) - n_B J_m(n k a) H_m'(n_B k a)``; roots in
    the lower half plane are the QNMs. ``k`` and ``a`` only enter through
    ``k a``.
    """
    x = np.asarray(k, dtype=complex) * a
    if np.any(x == 0):
        raise ValueError("k must be nonzero")
    zi, zo = n * x, n_B * x
    return (n * special.bessel_j_prime(m, zi) * special.hankel1(m, zo)
            - n_B * special.bessel_j(m, zi) * special.hankel1_prime(m, zo))


def _residual_and_slope(x, m, n, n_B):
    zi, zo = n * x, n_B * x
    J, Jp = special.bessel_j(m, zi), special.bessel_j_prime(m, zi)
    H, Hp = special.hankel1(m, zo), special.hankel1_prime(m, zo)
    # second derivatives from Bessel's equation
    Jpp = -Jp / zi - (1 - m * m / zi**2) * J
    Hpp = -Hp / zo - (1 - m * m / zo**2) * H
    D = n * Jp * H - n_B * J * Hp
    dD = n * n * Jpp * H - n_B * n_B * J * Hpp
    return D, dD


def newton_root(x0: complex, m: int, n: complex, n_B: float = 1.0,
                tol: float = 1e-12, max_iter: int = 100) -> complex:
    """Newton iteration on ``D(x)`` in the dimensionless variable ``x = k a``."""
    x = complex(x0)
    for _ in range(max_iter):
        D, dD = _residual_and_slope(x, m, n, n_B)
        step = D / dD
        x -= step
        if abs(step) < tol * abs(x):
            return x
    raise ConvergenceError(f"Newton did not converge from seed {x0}")


def radial_order(ka: complex, m: int, n: complex, samples: int = 4000) -> int:
    """One plus the number of interior radial nodes of ``J_m(n k r)``."""
    t = np.linspace(1e-6, 1.0, samples)
    vals = special.bessel_j(m, (n * ka).real * t).real
    return 1 + int(np.count_nonzero(np.signbit(vals[1:]) != np.signbit(vals[:-1])))


def _real_axis_brackets(m, n, n_B, lo, hi, step=2e-3):
    """Sign changes of ``Im D`` on the real axis with the real index.

    For high-Q whispering-gallery modes the exterior field is dominated by
    ``Y_m``, so the resonance sits where the ``Y`` part of ``D`` changes sign.
    """
    nr = complex(n).real
    x = np.arange(lo, hi, step)
    d = resonance_residual(x, m, nr, n_B).imag
    idx = np.nonzero(np.signbit(d[1:]) != np.signbit(d[:-1]))[0]
    return [(x[i], x[i + 1]) for i in idx]


def find_bare_mode(m: int, q: int, n: complex, n_B: float = 1.0, a: float = 5e-6,
                   seed: complex | None = None, label: str = "L",
                   normalize: bool = True) -> BareMode:
    """Locate, verify and normalize the ``(m, q)`` QNM of one disk.

    Parameters
    ----------
    seed : complex, optional
        Starting guess for ``k a``. When omitted the real axis is scanned for
        sign changes of the exterior part of the residual and each bracket is
        polished by Newton iteration until one carries ``q`` radial lobes.

    Raises
    ------
    ConvergenceError
        No root found or Newton did not converge.
    WrongRadialOrderError
        A seeded root has the wrong radial order.
    """
    n = complex(n)
    if seed is not None:
        x = newton_root(complex(seed) * 1.0, m, n, n_B)
        got = radial_order(x, m, n)
        if got != q:
            raise WrongRadialOrderError(f"seed converged to q={got}, requested q={q}")
    else:
        nr = n.real
        lo = m / nr
        hi = (m + 3.0 * (q + 1) * m ** (1 / 3) + 6.0) / nr
        x = None
        for left, right in _real_axis_brackets(m, n, n_B, lo, hi):
            try:
                cand = newton_root(0.5 * (left + right), m, n, n_B)
            except ConvergenceError:
                continue
            if cand.imag < 0 and radial_order(cand, m, n) == q:
                x = cand
                break
        if x is None:
            raise ConvergenceError(f"no (m={m}, q={q}) root found in ka in [{lo:.3f}, {hi:.3f}]")
    mode = BareMode(label=label, m=m, q=q, ka=x, n=n, n_B=n_B, a=a)
    return normalize_mode(mode) if normalize else mode


# ---------------------------------------------------------------------------
# normalization


def lommel_same(m: int, alpha, R: float = 1.0):
    """``int_0^R r J_m(alpha r)^2 dr`` in closed form."""
    z = alpha * R
    J, Jp = special.bessel_j(m, z), special.bessel_j_prime(m, z)
    return 0.5 * R * R * (Jp * Jp + (1 - m * m / z**2) * J * J)


def lommel_cross(m: int, alpha, beta, R: float = 1.0, jfun=None, jpfun=None):
    """``int_0^R r C_m(alpha r) D_m(beta r) dr`` for Bessel-equation solutions.

    With ``alpha != beta`` the antiderivative is
    ``r [beta C(alpha r) D'(beta r) - alpha C'(alpha r) D(beta r)] / (alpha^2 - beta^2)``;
    ``jfun``/``jpfun`` default to ``J_m`` for both factors.
    """
    jfun = jfun or special.bessel_j
    jpfun = jpfun or special.bessel_j_prime
    if abs(alpha - beta) < 1e-7 * abs(alpha):
        return lommel_same(m, 0.5 * (alpha + beta), R)
    za, zb = alpha * R, beta * R
    return R * (beta * jfun(m, za) * jpfun(m, zb) - alpha * jpfun(m, za) * jfun(m, zb)) / (alpha**2 - beta**2)


def regularized_norm(mode: BareMode) -> complex:
    """``int eps f^2 dA`` with the exterior integral analytically regularized.

    Interior: closed-form Lommel integral. Exterior: the Hankel-Lommel
    antiderivative evaluated at the rim only; its oscillatory upper-limit
    contribution is discarded by analytic continuation of the outgoing wave.
    The azimuthal factor of ``cos^2`` is ``pi``.
    """
    m, x, n, nB = mode.m, mode.ka, mode.n, mode.n_B
    zi, zo = n * x, nB * x
    J, Jp = special.bessel_j(m, zi), special.bessel_j_prime(m, zi)
    H, Hp = special.hankel1(m, zo), special.hankel1_prime(m, zo)
    inner = 0.5 * ((Jp / J) ** 2 + 1 - m * m / zi**2)
    outer = -0.5 * ((Hp / H) ** 2 + 1 - m * m / zo**2)
    return complex(mode.norm_const**2 * np.pi * (n * n * inner + nB * nB * outer))


def normalize_mode(mode: BareMode) -> BareMode:
    """Scale ``norm_const`` so that the regularized norm equals one."""
    unit = replace(mode, norm_const=1.0 + 0j)
    I = regularized_norm(unit)
    if abs(I) < 1e-14:
        raise DegenerateNormError("regularized norm vanished")
    rel = regularized_norm(mode)
    if abs(rel - 1) < 1e-13:
        return mode
    return replace(mode, norm_const=complex(1.0 / np.sqrt(I)))


def norm_by_contour(mode: BareMode, theta: float = np.pi / 6, length: float = 8.0,
                    panels: int = 64, order: int = 16) -> complex:
    """Regularized norm by quadrature, with the exterior radial path rotated
    into the complex plane (``r = 1 + t exp(i theta)``) where the outgoing
    Hankel function decays. Interior part by Gauss-Legendre quadrature."""
    m, x, n, nB = mode.m, mode.ka, mode.n, mode.n_B
    xg, wg = np.polynomial.legendre.leggauss(order)
    # interior
    edges = np.linspace(0.0, 1.0, panels + 1)
    r = (0.5 * (edges[1:] - edges[:-1])[:, None] * (xg + 1) + edges[:-1, None]).ravel()
    w = (0.5 * (edges[1:] - edges[:-1])[:, None] * wg).ravel()
    inner = np.sum(w * r * (special.bessel_j(m, n * x * r) / special.bessel_j(m, n * x)) ** 2)
    # exterior, rotated path
    edges = np.linspace(0.0, length, panels + 1)
    t = (0.5 * (edges[1:] - edges[:-1])[:, None] * (xg + 1) + edges[:-1, None]).ravel()
    wt = (0.5 * (edges[1:] - edges[:-1])[:, None] * wg).ravel()
    rot = np.exp(1j * theta)
    rc = 1.0 + t * rot
    outer = np.sum(wt * rot * rc * (special.hankel1(m, nB * x * rc) / special.hankel1(m, nB * x)) ** 2)
    return complex(mode.norm_const**2 * np.pi * (n * n * inner + nB * nB * outer))


# ---------------------------------------------------------------------------
# field evaluation


def eval_field_polar(mode: BareMode, r, phi):
    """Normalized ``f_z`` at polar coordinates about the disk centre."""
    r = np.asarray(r, dtype=float)
    phi = np.asarray(phi, dtype=float)
    r, phi = np.broadcast_arrays(r, phi)
    m, x, n, nB = mode.m, mode.ka, mode.n, mode.n_B
    out = np.empty(r.shape, dtype=complex)
    inside = r < 1.0
    if np.any(inside):
        out[inside] = special.bessel_j(m, n * x * r[inside]) / special.bessel_j(m, n * x)
    if np.any(~inside):
        out[~inside] = special.hankel1(m, nB * x * r[~inside]) / special.hankel1(m, nB * x)
    ang = np.cos(m * phi) if mode.parity == "cos" else np.sin(m * phi)
    res = mode.norm_const * out * ang
    return res[()] if res.ndim == 0 else res


def local_polar(label: str, geometry: Geometry | None, x, y):
    """Polar coordinates about the centre of disk ``label``.

    The angle is measured from the axis pointing toward the other disk: from
    ``+x`` for the left disk and from ``-x`` for the right disk, so the two
    bare modes are mirror images of each other. Without a geometry the disk
    sits at the origin with the angle measured from ``+x``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if geometry is None:
        return np.hypot(x, y), np.arctan2(y, x)
    cx, cy = geometry.center(label)
    dx, dy = x - cx, y - cy
    if label == "L":
        return np.hypot(dx, dy), np.arctan2(dy, dx)
    return np.hypot(dx, dy), np.arctan2(dy, -dx)


def eval_field(mode: BareMode, x, y, geometry: Geometry | None = None):
    """Normalized ``f_z`` at Cartesian points (internal units)."""
    r, phi = local_polar(mode.label, geometry, x, y)
    return eval_field_polar(mode, r, phi)


def field_grid_rows(evaluator, xs, ys):
    """Rows ``(x, y, Re f, Im f, |f|^2, cos 2phi_f, sin 2phi_f)`` for a field map.

    ``phi_f`` is the field phase; ``cos 2phi_f`` and ``sin 2phi_f`` come from
    ``f^2/|f|^2`` and are set to zero where the field vanishes.
    """
    X, Y = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), indexing="xy")
    f = np.asarray(evaluator(X, Y), dtype=complex)
    mag2 = np.abs(f) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(mag2 > 0, f * f / np.where(mag2 > 0, mag2, 1.0), 0.0)
    return np.column_stack([X.ravel(), Y.ravel(), f.real.ravel(), f.imag.ravel(),
                            mag2.ravel(), unit.real.ravel(), unit.imag.ravel()])
