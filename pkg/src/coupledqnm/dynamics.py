"""Lindblad dynamics of a two-level emitter coupled to two quantized modes.

The Hilbert space is ``TLS (2) x mode 1 (N) x mode 2 (N)``; density
matrices are vectorized row-major, so ``vec(A rho B) = (A kron B^T) vec(rho)``.
Hamiltonians are written in the frame rotating at the emitter frequency.
The dissipator ``D[A] rho = 2 A rho A^dagger - rho A^dagger A - A^dagger A rho``
is used literally: a mode with ``Gamma D[A]`` loses photons at ``2 Gamma``, and
an emitter with ``(Gamma / 2) D[sigma]`` loses population at ``Gamma``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .improved_nm import HOPPING, NmiParams, nmi_couplings
from .quantum import QuantumParams

N_FOCK_MAX = 6
N_FOCK_DEFAULT = 3


class StepSizeError(RuntimeError):
    """The propagator step failed its self-consistency check."""


class StrongCouplingError(RuntimeError):
    """Population is not monotonically decaying, so no rate is fitted."""


# ---------------------------------------------------------------------------
# operators


@dataclass(frozen=True)
class Operators:
    """Ladder operators on ``TLS x mode x mode``."""

    N: int
    sm: np.ndarray
    a: tuple[np.ndarray, np.ndarray]

    @property
    def dim(self) -> int:
        return 2 * self.N**2

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)


def operators(N_fock: int = N_FOCK_DEFAULT) -> Operators:
    if N_fock < 2:
        raise ValueError("N_fock must be at least 2")
    if N_fock > N_FOCK_MAX:
        raise ValueError(f"N_fock above {N_FOCK_MAX} exceeds the dense superoperator budget")
    sm = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e| with |g> = 0
    b = np.diag(np.sqrt(np.arange(1, N_fock)), 1).astype(complex)
    iq, it = np.eye(N_fock), np.eye(2)
    return Operators(
        N_fock,
        np.kron(np.kron(sm, iq), iq),
        (np.kron(np.kron(it, b), iq), np.kron(np.kron(it, iq), b)),
    )


def _spre(A):
    return np.kron(A, np.eye(A.shape[0]))


def _spost(B):
    return np.kron(np.eye(B.shape[0]), B.T)


def build_liouvillian(H: np.ndarray, jump_ops, rates) -> np.ndarray:
    """Superoperator of ``-i[H, rho] + sum_{jk} R_jk (2 A_k rho A_j^dagger - {A_j^dagger A_k, rho})``.

    Parameters
    ----------
    jump_ops : sequence of operators ``A_k``
    rates : Hermitian matrix ``R`` or a vector of diagonal rates
    """
    R = np.asarray(rates, dtype=complex)
    if R.ndim == 1:
        R = np.diag(R)
    L = -1j * (_spre(H) - _spost(H))
    for j, Aj in enumerate(jump_ops):
        Ajd = Aj.conj().T
        for k, Ak in enumerate(jump_ops):
            if R[j, k] == 0:
                continue
            AdA = Ajd @ Ak
            L += R[j, k] * (2.0 * np.kron(Ak, Ajd.T) - _spre(AdA) - _spost(AdA))
    return L


def trace_functional(dim: int) -> np.ndarray:
    return np.eye(dim).reshape(-1)


# ---------------------------------------------------------------------------
# model systems


def qnm_transformed_system(params: QuantumParams, omega0: float, N_fock: int = N_FOCK_DEFAULT,
                           coupling_scale: float = 1.0):
    """Hamiltonian and diagonal dissipators in the dissipator eigenbasis.

    ``H = sum (Omega_mu - omega0) A^dag A + [G_em A_+^dag A_- + h.c.]
    + [sum G_mu sigma^+ A_mu + h.c.]``; dissipators ``Gamma_mu D[A_mu]``.
    """
    ops = operators(N_fock)
    ap, am = ops.a
    G = coupling_scale * np.asarray(params.G_Q)
    H = (params.Omega[0] - omega0) * ap.conj().T @ ap + (params.Omega[1] - omega0) * am.conj().T @ am
    H = H + params.G_em_Q * ap.conj().T @ am
    H = H + np.conj(params.G_em_Q) * am.conj().T @ ap
    sp = ops.sm.conj().T
    for Gk, A in zip(G, ops.a):
        H = H + Gk * sp @ A + np.conj(Gk) * A.conj().T @ ops.sm
    return H, list(ops.a), np.asarray(params.Gamma_Q, dtype=float), ops


def qnm_symmetrized_system(chi_plus, chi_minus, gs, omega0: float, N_fock: int = N_FOCK_DEFAULT,
                           coupling_scale: float = 1.0):
    """Hamiltonian with ``chi_plus`` hopping and the non-diagonal ``chi_minus`` dissipator.

    ``H = sum (chi_plus - omega0)_{mu eta} a_mu^dag a_eta - i sum gs_mu sigma^+ a_mu + h.c.``.
    The dissipator pairs ``2 a_eta rho a_mu^dag`` with weight ``chi_minus[mu, eta]``.
    """
    ops = operators(N_fock)
    cp = np.asarray(chi_plus) - omega0 * np.eye(2)
    gs = coupling_scale * np.asarray(gs)
    H = np.zeros((ops.dim, ops.dim), dtype=complex)
    for m in range(2):
        for e in range(2):
            H += cp[m, e] * ops.a[m].conj().T @ ops.a[e]
    sp = ops.sm.conj().T
    for gk, a in zip(gs, ops.a):
        V = -1j * gk * sp @ a
        H += V + V.conj().T
    return H, list(ops.a), np.asarray(chi_minus), ops


def nmi_system(params: NmiParams, r0, omega0: float, hopping: str = "minus",
               N_fock: int = N_FOCK_DEFAULT, coupling_scale: float = 1.0):
    """Improved-NM master equation in the bare-mode basis.

    ``H = sum (omega_i - omega0) a_i^dag a_i + hopping + i sum g_i (sigma^+ a_i - h.c.)``
    with dissipators ``gamma_i D[a_i]``.
    """
    ops = operators(N_fock)
    aL, aR = ops.a
    wL, wR = params.bare_omegas
    s_lr, s_rl = HOPPING[hopping]
    k = params.kappa_nmi
    H = (wL.real - omega0) * aL.conj().T @ aL + (wR.real - omega0) * aR.conj().T @ aR
    H = H + s_lr * k * aL.conj().T @ aR + s_rl * k * aR.conj().T @ aL
    g = coupling_scale * nmi_couplings(params, r0, omega0)
    sp = ops.sm.conj().T
    for gi, a in zip(g, ops.a):
        V = 1j * gi * sp @ a
        H = H + V + V.conj().T
    rates = np.array([-wL.imag, -wR.imag])
    return H, list(ops.a), rates, ops


def tls_system(gamma: float, N_fock: int = 2):
    """Bare emitter with ``(gamma / 2) D[sigma]``; modes idle."""
    ops = operators(N_fock)
    return np.zeros((ops.dim, ops.dim), dtype=complex), [ops.sm], np.array([gamma / 2.0]), ops


# ---------------------------------------------------------------------------
# evolution


@dataclass(frozen=True)
class DensityMatrix:
    """State ``rho`` at internal time ``time``."""

    matrix: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        r = np.asarray(self.matrix, dtype=complex)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ValueError("density matrix must be square")
        if np.max(np.abs(r - r.conj().T)) > 1e-10:
            raise ValueError("density matrix must be Hermitian")
        if abs(np.trace(r) - 1) > 1e-8:
            raise ValueError("density matrix must have unit trace")
        if np.min(np.linalg.eigvalsh(0.5 * (r + r.conj().T))) < -1e-8:
            raise ValueError("density matrix must be positive semidefinite")
        object.__setattr__(self, "matrix", r)


def excited_vacuum(ops: Operators) -> DensityMatrix:
    psi = np.zeros(ops.dim, dtype=complex)
    psi[ops.N**2] = 1.0  # |e, 0, 0>
    return DensityMatrix(np.outer(psi, psi.conj()))


@dataclass
class Trajectory:
    """Observables along an evolution; ``time_unit`` seconds per internal time."""

    times: np.ndarray
    tls_population: np.ndarray
    n_plus: np.ndarray
    n_minus: np.ndarray
    trace_error: np.ndarray
    hermiticity_error: np.ndarray
    min_eigenvalue: np.ndarray
    time_unit: float = 1.0

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_seconds", "tls_population", "n_plus", "n_minus", "trace_error"])
        f = "{:.17g}".format
        for row in zip(self.times * self.time_unit, self.tls_population, self.n_plus,
                       self.n_minus, self.trace_error):
            w.writerow([f(v) for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def evolve(rho0: DensityMatrix, liouvillian: np.ndarray, t_grid, ops: Operators,
           time_unit: float = 1.0, step_check_tol: float = 1e-8) -> Trajectory:
    """Propagate on a uniform ``t_grid`` with the exact step propagator.

    The step propagator ``exp(L dt)`` is compared against two half steps;
    disagreement above ``step_check_tol`` raises :class:`StepSizeError`.
    """
    t = np.asarray(t_grid, dtype=float)
    dt = np.diff(t)
    if t.size < 2 or np.any(np.abs(dt - dt[0]) > 1e-9 * abs(dt[0])):
        raise ValueError("t_grid must be uniform with at least two points")
    P = linalg.expm(liouvillian * dt[0])
    Ph = linalg.expm(liouvillian * dt[0] / 2)
    if np.max(np.abs(Ph @ Ph - P)) > step_check_tol:
        raise StepSizeError("propagator not self-consistent under step halving")
    dim = ops.dim
    v = rho0.matrix.reshape(-1).copy()
    n_ops = [(A.conj().T @ A) for A in ops.a]
    pe = ops.sm.conj().T @ ops.sm
    out = {k: np.empty(t.size) for k in ("pe", "n0", "n1", "tr", "herm", "mine")}
    for i in range(t.size):
        if i:
            v = P @ v
        r = v.reshape(dim, dim)
        out["pe"][i] = np.real(np.trace(pe @ r))
        out["n0"][i] = np.real(np.trace(n_ops[0] @ r))
        out["n1"][i] = np.real(np.trace(n_ops[1] @ r))
        out["tr"][i] = abs(np.trace(r) - 1)
        out["herm"][i] = np.max(np.abs(r - r.conj().T))
        out["mine"][i] = np.min(np.linalg.eigvalsh(0.5 * (r + r.conj().T)))
    return Trajectory(t, out["pe"], out["n0"], out["n1"], out["tr"], out["herm"], out["mine"], time_unit)


def fit_decay(times, population, lo: float = 0.1, hi: float = 0.9, monotone_tol: float = 1e-12) -> float:
    """Exponential rate from a least-squares line through ``log p`` where
    ``p / p0`` lies in ``[lo, hi]``."""
    t = np.asarray(times, dtype=float)
    p = np.asarray(population, dtype=float)
    p0 = p[0]
    sel = (p >= lo * p0) & (p <= hi * p0)
    if np.count_nonzero(sel) < 3:
        raise ValueError("too few samples inside the fit window")
    first, last = np.argmax(sel), len(sel) - np.argmax(sel[::-1])
    seg = p[: last]
    if np.any(np.diff(seg) > monotone_tol * p0):
        raise StrongCouplingError("population oscillates; strong coupling, no decay rate fitted")
    slope = np.polyfit(t[first:last][sel[first:last]], np.log(p[first:last][sel[first:last]]), 1)[0]
    return float(-slope)


def spectral_abscissa(liouvillian: np.ndarray) -> float:
    """Largest real part of the Liouvillian spectrum."""
    return float(np.max(np.real(np.linalg.eigvals(liouvillian))))


def bad_cavity_scale(couplings, rates, target: float = 0.02) -> float:
    """Dipole scale putting ``max |g| / min gamma`` at ``target``."""
    g = np.max(np.abs(np.asarray(couplings)))
    return float(target * np.min(np.asarray(rates)) / g) if g > 0 else 1.0


def decay_run(H, jump_ops, rates, ops: Operators, expected_rate: float, span: float = 3.0,
              points: int = 400, time_unit: float = 1.0):
    """Evolve the excited emitter for ``span / expected_rate`` and fit its decay.

    Returns the fitted rate and the trajectory.
    """
    L = build_liouvillian(H, jump_ops, rates)
    t = np.linspace(0.0, span / expected_rate, points)
    traj = evolve(excited_vacuum(ops), L, t, ops, time_unit)
    return fit_decay(traj.times, traj.tls_population), traj
