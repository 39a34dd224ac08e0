"""Multiple-scattering Green function of a line source near dielectric cylinders.

The source field ``(i k0^2/4) H_0(k_B |r - r0|)`` is expanded in regular
cylindrical waves about each centre, each cylinder scatters through its
TM coefficients ``b_n``, and the two outgoing expansions are coupled by the
addition theorem. The scattered field at the source gives the Purcell factor
``1 + Im G_sc(r0, r0) / Im G_B``. Internal units throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import special
from .disk import ConvergenceError, Geometry, resonance_residual

DEFAULT_M_MAX = 80


class LinearSystemError(RuntimeError):
    """The multiple-scattering system is numerically singular."""


@dataclass(frozen=True)
class ScatterConfig:
    geometry: Geometry
    M_max: int = DEFAULT_M_MAX
    include_L: bool = True
    include_R: bool = True

    def __post_init__(self):
        if self.M_max < 1:
            raise ValueError("M_max must be positive")


def cylinder_t_coefficient(order, n: complex, n_B: float, a: float, omega):
    """TM scattering coefficient ``b_m`` of a homogeneous cylinder.

    An incident ``J_m(k_B r) e^{i m phi}`` produces ``b_m H_m(k_B r) e^{i m phi}``
    outside, with
    ``b_m = -[n J'(n k0 a) J(k_B a) - n_B J(n k0 a) J'(k_B a)] / D``, where ``D``
    is the same matching residual whose roots are the disk QNMs. ``omega`` is
    the vacuum wavenumber in the units of ``1/a``.
    """
    order = np.abs(np.asarray(order))
    x = np.asarray(omega, dtype=complex) * a
    zi, zo = n * x, n_B * x
    Ji, Jpi = special.bessel_j(order, zi), special.bessel_j_prime(order, zi)
    Jo, Jpo = special.bessel_j(order, zo), special.bessel_j_prime(order, zo)
    Ho, Hpo = special.hankel1(order, zo), special.hankel1_prime(order, zo)
    num = n * Jpi * Jo - n_B * Ji * Jpo
    den = n * Jpi * Ho - n_B * Ji * Hpo
    return -num / den


def background_green(omega, n_B: float = 1.0) -> complex:
    """``Im`` part of the homogeneous 2D Green function at coincidence, ``k0^2/4``."""
    return omega**2 / 4.0


def single_cylinder_green(n: complex, n_B: float, center, omega: float, r0, M_max: int = DEFAULT_M_MAX) -> complex:
    """Scattered ``G_zz(r0, r0)`` of one cylinder (unit radius) in closed form."""
    kb = n_B * omega
    dx, dy = r0[0] - center[0], r0[1] - center[1]
    rho = np.hypot(dx, dy)
    if rho <= 1.0:
        raise ValueError("source must lie outside the cylinder")
    orders = np.arange(-M_max, M_max + 1)
    b = cylinder_t_coefficient(orders, n, n_B, 1.0, omega)
    H = special.hankel1_signed(orders, kb * rho)
    # H_n(k rho0) e^{-i n th0} times H_n(k rho0) e^{i n th0}
    return complex(1j * omega**2 / 4.0 * np.sum(b * H * H))


def translation_matrix(orders, d_vec, kb, rows=None):
    """``T[n, nu] = H_{nu-n}(kb d) e^{i (nu-n) alpha}`` re-expanding outgoing
    waves about a centre displaced by ``-d_vec`` as regular waves there.

    ``orders`` indexes the outgoing waves (columns) and ``rows`` the regular
    waves, defaulting to the same set.
    """
    rows = orders if rows is None else rows
    d, al = np.hypot(*d_vec), np.arctan2(d_vec[1], d_vec[0])
    span = int(max(orders.max() - rows.min(), rows.max() - orders.min()))
    lags = np.arange(-span, span + 1)
    h = special.hankel1_signed(lags, kb * d) * np.exp(1j * lags * al)
    diff = orders[None, :] - rows[:, None]
    return h[diff + span]


def _cylinders(config: ScatterConfig):
    g = config.geometry
    cyl = []
    if config.include_L:
        cyl.append((np.array(g.center("L")), complex(g.n_L)))
    if config.include_R:
        cyl.append((np.array(g.center("R")), complex(g.n_R)))
    return cyl


def _assemble(config: ScatterConfig, omega, r0):
    """Scaled multiple-scattering system.

    Unknowns are outgoing amplitudes at the rim, ``u_n = c_n H_n(k_B)``,
    which keeps every block bounded for large ``|n|`` because ``b_n H_n(k_B)``
    decays like ``J_n(k_B)``.
    """
    g = config.geometry
    kb = g.n_B * omega
    M = config.M_max
    orders = np.arange(-M, M + 1)
    cyl = _cylinders(config)
    nc = len(cyl)
    size = 2 * M + 1
    Hrim = special.hankel1_signed(orders, kb)
    blocks_b = []
    rhs = np.zeros(nc * size, dtype=complex)
    for i, (ci, ni) in enumerate(cyl):
        b = cylinder_t_coefficient(orders, ni, g.n_B, 1.0, omega)
        blocks_b.append(b * Hrim)
        if r0 is not None:
            d = np.asarray(r0, float) - ci
            rho0, th0 = np.hypot(*d), np.arctan2(d[1], d[0])
            a_src = special.hankel1_signed(orders, kb * rho0) * np.exp(-1j * orders * th0)
            rhs[i * size:(i + 1) * size] = blocks_b[i] * a_src
    A = np.eye(nc * size, dtype=complex)
    for i, (ci, _) in enumerate(cyl):
        for j, (cj, _) in enumerate(cyl):
            if i == j:
                continue
            Ts = translation_matrix(orders, ci - cj, kb) / Hrim[None, :]
            A[i * size:(i + 1) * size, j * size:(j + 1) * size] = -blocks_b[i][:, None] * Ts
    return A, rhs, orders, Hrim, cyl


def solve_amplitudes(config: ScatterConfig, omega: float, r0):
    """Outgoing coefficients ``c_{i,n}`` of each cylinder for a source at ``r0``."""
    A, rhs, orders, Hrim, cyl = _assemble(config, omega, r0)
    if not np.all(np.isfinite(A)):
        raise LinearSystemError("non-finite multiple-scattering matrix")
    lu, piv = linalg.lu_factor(A, check_finite=False)
    rcond = linalg.lapack.zgecon(lu, linalg.norm(A, 1), norm="1")[0]
    if not rcond > 1e-13:
        raise LinearSystemError(f"multiple-scattering system ill-conditioned (rcond={rcond:.2e})")
    u = linalg.lu_solve((lu, piv), rhs)
    size = len(orders)
    return [u[i * size:(i + 1) * size] / Hrim for i in range(len(cyl))], orders, cyl


def scattered_field(config: ScatterConfig, omega: float, r0, r_obs=None, about: str | None = None) -> complex:
    """Scattered ``G_zz(r_obs, r0)``.

    Parameters
    ----------
    about : {None, "L", "R"}
        ``None`` sums each cylinder's outgoing expansion at ``r_obs``.
        ``"L"``/``"R"`` instead re-expands the other cylinder's outgoing wave
        in regular waves about that centre, an independent assembly path valid
        when ``r_obs`` is closer to that centre than the centre separation.
    """
    r_obs = r0 if r_obs is None else r_obs
    g = config.geometry
    kb = g.n_B * omega
    coeffs, orders, cyl = solve_amplitudes(config, omega, r0)
    pref = 1j * omega**2 / 4.0
    if about is None:
        total = 0j
        for (ci, _), c in zip(cyl, coeffs):
            d = np.asarray(r_obs, float) - ci
            rho, th = np.hypot(*d), np.arctan2(d[1], d[0])
            total += np.sum(c * special.hankel1_signed(orders, kb * rho) * np.exp(1j * orders * th))
        return complex(pref * total)
    labels = [lab for lab, inc in (("L", config.include_L), ("R", config.include_R)) if inc]
    i = labels.index(about)
    ci = cyl[i][0]
    d = np.asarray(r_obs, float) - ci
    rho, th = np.hypot(*d), np.arctan2(d[1], d[0])
    total = np.sum(coeffs[i] * special.hankel1_signed(orders, kb * rho) * np.exp(1j * orders * th))
    for j, (cj, _) in enumerate(cyl):
        if j == i:
            continue
        if rho >= np.hypot(*(ci - cj)):
            raise ValueError("observation point outside the re-expansion disk")
        # the regular series converges like (rho / d)^n only past n ~ kb d,
        # so it gets more orders than the outgoing one, within the lag envelope
        M = int(orders.max())
        Mr = min(special.MAX_ORDER - M, M + 40)
        rows = np.arange(-Mr, Mr + 1)
        reg = translation_matrix(orders, ci - cj, kb, rows) @ coeffs[j]
        total += np.sum(reg * special.bessel_j_signed(rows, kb * rho) * np.exp(1j * rows * th))
    return complex(pref * total)


def two_cylinder_green(config: ScatterConfig, r0, omega: float) -> complex:
    """Scattered ``G_zz(r0, r0)`` of the configured cylinders."""
    if not (config.include_L or config.include_R):
        return 0j
    if config.include_L and config.include_R:
        return scattered_field(config, omega, r0)
    label = "L" if config.include_L else "R"
    g = config.geometry
    return single_cylinder_green(g.index(label), g.n_B, g.center(label), omega, r0, config.M_max)


def purcell_oracle(config: ScatterConfig, r0, omega) -> np.ndarray:
    """``1 + Im G_sc(r0, r0) / Im G_B`` on a frequency grid."""
    omega = np.atleast_1d(np.asarray(omega, float))
    out = np.empty(omega.shape)
    for k, w in enumerate(omega):
        out[k] = 1.0 + two_cylinder_green(config, r0, w).imag / background_green(w, config.geometry.n_B)
    return out


def graf_self_test(order: int, k: float, d_vec, point, tol: float = 1e-15) -> tuple[complex, complex]:
    """Direct ``H_order(k rho_j) e^{i order th_j}`` about the origin versus its
    regular re-expansion about ``d_vec``; returns both values.

    The series is extended in rings of ten orders until the newest ring is
    below ``tol`` of the partial sum. Its tail decays like ``(rho_i / d)^n``,
    so points near the validity circle need many orders.

    Raises
    ------
    ValueError
        If the point is outside the validity disk, or the series has not
        converged within the order envelope.
    """
    point = np.asarray(point, float)
    d_vec = np.asarray(d_vec, float)
    rho_j, th_j = np.hypot(*point), np.arctan2(point[1], point[0])
    direct = special.hankel1_signed(order, k * rho_j) * np.exp(1j * order * th_j)
    loc = point - d_vec
    rho_i, th_i = np.hypot(*loc), np.arctan2(loc[1], loc[0])
    d, al = np.hypot(*d_vec), np.arctan2(d_vec[1], d_vec[0])
    if rho_i >= d:
        raise ValueError("point outside the re-expansion disk")

    def ring(ns):
        return (special.hankel1_signed(order - ns, k * d) * np.exp(1j * (order - ns) * al)
                * special.bessel_j_signed(ns, k * rho_i) * np.exp(1j * ns * th_i))

    cap = special.MAX_ORDER - abs(order)
    n = min(int(k * max(rho_i, d)) + abs(order) + 10, cap)
    series = np.sum(ring(np.arange(-n, n + 1)))
    while True:
        if n + 10 > cap:
            raise ValueError("Graf series not converged within the order envelope")
        ns = np.concatenate([np.arange(-n - 10, -n), np.arange(n + 1, n + 11)])
        try:
            t = ring(ns)
        except special.SpecialFunctionDomainError as exc:
            raise ValueError("Graf series not converged within the order envelope") from exc
        series += np.sum(t)
        n += 10
        if np.max(np.abs(t)) <= tol * abs(series):
            return complex(direct), complex(series)


def _even_determinant(config: ScatterConfig, omega: complex, m: int) -> complex:
    """Pole-free determinant of the symmetric sector, for complex ``omega``.

    Restricts to fields even about the axis (``c_{-n} = c_n``) and multiplies
    by the disk residuals of order ``m`` to cancel the single-cylinder poles.
    """
    A, _, orders, _, cyl = _assemble(config, omega, None)
    M = config.M_max
    size = 2 * M + 1
    keep = []
    fold = []
    for blk in range(len(cyl)):
        for n in range(0, M + 1):
            keep.append(blk * size + M + n)
            fold.append(blk * size + M - n if n > 0 else -1)
    keep = np.array(keep)
    Ared = A[np.ix_(keep, keep)].copy()
    for col, f in enumerate(fold):
        if f >= 0:
            Ared[:, col] += A[keep, f]
    det = np.linalg.det(Ared)
    g = config.geometry
    for _, ni in cyl:
        det *= resonance_residual(omega, m, ni, g.n_B)
    return complex(det)


def oracle_poles(config: ScatterConfig, seeds, m: int = 37, tol: float = 1e-12, max_iter: int = 60):
    """Complex resonances of the coupled cylinders near ``seeds`` (secant)."""
    roots = []
    for s in seeds:
        x0 = complex(s)
        x1 = x0 * (1 + 1e-7) + 1e-7j * abs(x0.imag)
        f0, f1 = _even_determinant(config, x0, m), _even_determinant(config, x1, m)
        for _ in range(max_iter):
            if f1 == f0:
                break
            x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
            x0, f0 = x1, f1
            x1, f1 = x2, _even_determinant(config, x2, m)
            if abs(x1 - x0) < tol * abs(x1):
                break
        else:
            raise ConvergenceError(f"pole search did not converge from {s}")
        roots.append(x1)
    return roots
