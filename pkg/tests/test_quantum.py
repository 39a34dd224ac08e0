import json
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from coupledqnm import cqt, greens
from coupledqnm.cqt import hybrid_fields_at, hybridize
from coupledqnm.disk import eval_field, find_bare_mode
from coupledqnm.purcell import purcell_cnm, purcell_cqnm
from coupledqnm.quantum import (EmitterCouplings, PositivityError, SMatrix, absorption_overlap, chi_matrices,
                                diagonalize_dissipator, emitter_couplings, gamma_qqnm, matrix_sqrt_hpd,
                                purcell_qnm_jc, purcell_quantum, quantum_params, s_density, s_nrad_full,
                                s_nrad_pole, transformed_params)

import reference

GAMMA_L = -reference.modes()[0].ka.imag


def decoupled_pair(n, gap_nm=3000):
    g = replace(reference.geometry(gap_nm), n_L=n, n_R=n)
    mL = find_bare_mode(37, 1, n, label="L")
    mR = find_bare_mode(37, 1, n, label="R")
    return hybridize(mL, mR, g, kappa_method="addition")


# --- SMatrix ----------------------------------------------------------------

@pytest.mark.parametrize("gap", reference.ALL_GAPS_NM)
def test_s_hermitian_positive(gap):
    S = np.asarray(reference.s_pole(gap))
    assert abs(S[0, 1] - np.conj(S[1, 0])) <= 1e-10 * np.max(np.abs(S))
    assert np.all(np.linalg.eigvalsh(S) > 0)
    assert np.all(np.diag(S).imag == 0) and np.all(np.diag(S).real >= 0)


def test_smatrix_rejects_bad_input():
    with pytest.raises(ValueError):
        SMatrix(np.array([[1, 1j], [1j, 1]]))
    with pytest.raises(PositivityError):
        SMatrix(np.array([[1, 2], [2, 1]], dtype=complex))
    with pytest.raises(ValueError):
        SMatrix(np.eye(3))


@pytest.mark.parametrize("gap", [800, 900])
def test_table_values(gap):
    # literal comparison, including the sign of the off-diagonal entry
    S = np.asarray(reference.s_pole(gap))
    T = reference.table_matrix(gap)
    assert np.all(np.abs(S - T) <= 0.1 * np.abs(T))


@pytest.mark.parametrize("gap", reference.BENCH_GAPS_NM)
def test_table_gauge_invariants(gap):
    # diagonal entries and |S_+-| do not depend on the sign of each hybrid field
    S = np.asarray(reference.s_pole(gap))
    T = reference.table_matrix(gap)
    assert np.all(np.abs(np.diag(S) - np.diag(T)) <= 0.1 * np.abs(np.diag(T)))
    assert abs(abs(S[0, 1]) - abs(T[0, 1])) <= 0.1 * abs(T[0, 1])
    assert abs(S[0, 1].real) < 0.01 * abs(S[0, 1])


def test_decoupled_high_q_limit(monkeypatch):
    monkeypatch.setattr(cqt, "coupling_kappa", lambda *a, **k: 0j)
    S = np.asarray(s_nrad_pole(decoupled_pair(2 + 1e-5j)))
    assert np.max(np.abs(S - np.eye(2))) < 0.03


def test_limit_chain_toward_identity(monkeypatch):
    # absorption-dominated regime; radiation loss of the m=37 mode is 1e-12 of omega
    monkeypatch.setattr(cqt, "coupling_kappa", lambda *a, **k: 0j)
    dev = [np.linalg.norm(np.asarray(s_nrad_pole(decoupled_pair(2 + 1j * ni))) - np.eye(2))
           for ni in (3e-2, 3e-3, 3e-4)]
    assert np.all(np.diff(dev) < 0)


def test_pole_vs_full_at_800(pair800):
    Sp = np.asarray(s_nrad_pole(pair800))
    Sf = np.asarray(s_nrad_full(pair800))
    assert np.all(np.abs(Sf - Sp) <= 0.02 * np.abs(Sp) + 1e-12)


def test_full_quadrature_vs_closed_form(pair800):
    a = np.asarray(s_nrad_full(pair800, method="quadrature"))
    b = np.asarray(s_nrad_full(pair800, method="closed"))
    assert np.max(np.abs(a - b)) <= 1e-8 * np.max(np.abs(b))


def test_full_is_hermitian_before_symmetrizing(pair800, monkeypatch):
    from coupledqnm import quantum

    captured = {}
    real = quantum._hermitize

    def spy(S):
        captured["raw"] = S
        return real(S)

    monkeypatch.setattr(quantum, "_hermitize", spy)
    s_nrad_full(pair800)
    raw = captured["raw"]
    assert np.max(np.abs(raw - raw.conj().T)) <= 1e-8 * np.max(np.abs(raw))


def test_full_rejects_unknown_method(pair800):
    with pytest.raises(ValueError):
        s_nrad_full(pair800, method="simpson")


def test_zero_absorption_gives_zero_matrix():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = decoupled_pair(2.0 + 0j, 800)
    assert np.all(absorption_overlap(p) == 0)
    assert np.all(np.asarray(s_nrad_full(p)) == 0)
    with pytest.raises(PositivityError):
        matrix_sqrt_hpd(s_nrad_full(p))


# --- frequency density ------------------------------------------------------

def test_density_integrates_to_full(pair800):
    from scipy.integrate import quad

    I = absorption_overlap(pair800)
    W = 2 * pair800.mode_L.ka.real
    wr = pair800.omegas.real
    gmin = min(-pair800.omegas.imag)
    # breakpoints at the poles and at growing distances from them
    pts = sorted({float(np.clip(c + s * gmin * 4.0**k, 0, W)) for c in wr for s in (-1, 1) for k in range(12)})
    out = np.zeros((2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            out[i, j] = quad(lambda x: s_density(pair800, x, I)[i, j], 0, W, points=pts, limit=2000,
                             epsabs=1e-10, epsrel=1e-8, complex_func=True)[0]
    full = np.asarray(s_nrad_full(pair800, omega_max=W))
    assert np.max(np.abs(out - full)) <= 1e-6 * np.max(np.abs(full))


def test_density_hermitian_everywhere(pair800):
    D = s_density(pair800, np.linspace(1.0, 40.0, 500))
    assert np.max(np.abs(D - np.conj(np.swapaxes(D, -1, -2)))) <= 1e-15 * np.max(np.abs(D))


@pytest.mark.parametrize("gap", reference.BENCH_GAPS_NM)
@pytest.mark.parametrize("side", "LR")
def test_m_identity(gap, side):
    p = reference.pair(gap)
    r0 = reference.dipole(gap, side)
    w = reference.band(gap, 401)
    a = np.sqrt(p.omegas.real) * hybrid_fields_at(p, r0)
    M = np.pi / 2 * np.einsum("m,wmn,n->w", a, s_density(p, w), np.conj(a))
    im = np.imag(greens.green_qnm(p, r0, r0, w))
    assert np.max(np.abs(M - im)) <= 0.03 * np.max(np.abs(im))


# --- square root and chi ----------------------------------------------------

def test_sqrt_examples():
    assert np.allclose(matrix_sqrt_hpd(np.eye(2)), np.eye(2), atol=1e-15)
    assert np.allclose(matrix_sqrt_hpd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)
    with pytest.raises(PositivityError):
        matrix_sqrt_hpd(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        matrix_sqrt_hpd(np.array([[1, 1], [0, 1]], dtype=complex))


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, (2, 2, 2), elements=st.floats(-10, 10)))
def test_sqrt_property(x):
    A = x[0] + 1j * x[1]
    S = A @ A.conj().T + np.eye(2)
    R = matrix_sqrt_hpd(S)
    assert np.max(np.abs(R @ R - S)) <= 1e-12 * np.max(np.abs(S))
    assert np.max(np.abs(R - R.conj().T)) <= 1e-13 * np.max(np.abs(R))
    assert np.all(np.linalg.eigvalsh(R) > 0)
    Ri = matrix_sqrt_hpd(S, inverse=True)
    assert np.max(np.abs(Ri @ R - np.eye(2))) <= 1e-11


def test_chi_identity_reduction(pair800):
    cp, cm = chi_matrices(np.eye(2), pair800.omegas)
    assert np.allclose(cp, np.diag(pair800.omegas.real), rtol=0, atol=1e-15)
    assert np.allclose(cm, np.diag(-pair800.omegas.imag), rtol=0, atol=1e-15)


@pytest.mark.parametrize("gap", reference.ALL_GAPS_NM)
def test_chi_traces(gap):
    p = reference.pair(gap)
    cp, cm = chi_matrices(reference.s_pole(gap), p.omegas)
    assert abs(np.trace(cp) - p.omegas.real.sum()) <= 1e-10 * abs(p.omegas.real.sum())
    assert abs(np.trace(cm) - (-p.omegas.imag).sum()) <= 1e-10 * (-p.omegas.imag).sum()
    assert np.max(np.abs(cp - cp.conj().T)) == 0
    assert np.min(np.linalg.eigvalsh(cm)) >= 0


def test_chi_strong_dissipative_coupling_at_800(pair800):
    _, cm = chi_matrices(reference.s_pole(800), pair800.omegas)
    assert abs(cm[0, 1]) > 0.5 * min(-pair800.omegas.imag)


def test_chi_negative_dissipator_rejected():
    S = np.array([[1, 0.9], [0.9, 1]], dtype=complex)
    with pytest.raises(PositivityError):
        chi_matrices(S, [21.0 - 1e-3j, 21.5 + 1e-3j])


# --- couplings and rates ----------------------------------------------------

def test_couplings_identity(pair800):
    c = emitter_couplings(pair800, np.eye(2), reference.dipole(800, "L"))
    assert np.array_equal(c.gs, c.g)
    assert c.g_plus == c.g[0] and c.gs_minus == c.gs[1]


def test_couplings_decay_with_distance(pair800):
    S = reference.s_pole(800)
    mags = np.array([np.abs(emitter_couplings(pair800, S, reference.dipole(800, "L", d * 1e-9)).g)
                     for d in np.linspace(10, 200, 20)])
    assert np.all(np.diff(mags, axis=0) < 0)


def test_couplings_decoupled_branch(modes, monkeypatch):
    # large-gap decoupled limit; at 800 nm the R tail at the L dipole is 1.5e-2
    monkeypatch.setattr(cqt, "coupling_kappa", lambda *a, **k: 0j)
    mL, mR = modes
    g = reference.geometry(2000)
    p = hybridize(mL, mR, g)
    c = emitter_couplings(p, np.eye(2), g.dipole_near("L", 10e-9))
    l_idx = 0 if p.omega_plus == mL.ka else 1
    assert abs(c.g[1 - l_idx]) <= 1e-3 * abs(c.g[l_idx])


def test_couplings_decoupled_ratio_follows_tail_at_800(modes, monkeypatch):
    monkeypatch.setattr(cqt, "coupling_kappa", lambda *a, **k: 0j)
    mL, mR = modes
    g = reference.geometry(800)
    p = hybridize(mL, mR, g)
    r0 = g.dipole_near("L", 10e-9)
    c = emitter_couplings(p, np.eye(2), r0)
    l_idx = 0 if p.omega_plus == mL.ka else 1
    tail = abs(eval_field(mR, *r0, g) / eval_field(mL, *r0, g)) * np.sqrt(mR.ka.real / mL.ka.real)
    assert abs(abs(c.g[1 - l_idx]) / abs(c.g[l_idx]) - tail) <= 1e-9 * tail


def test_single_mode_rate():
    wt = np.array([21.6 - 2e-4j, 30.0 - 1e-4j])
    g = np.array([0.3 + 0.1j, 0.0])
    c = EmitterCouplings(g, g, wt)
    S = np.diag([1.7, 1.0])
    w0 = np.linspace(21.59, 21.61, 101)
    total, diag, ndiag = gamma_qqnm(S, c, w0)
    ga, D = 2e-4, 21.6 - w0
    expect = 2 * abs(g[0]) ** 2 * ga * 1.7 / (D**2 + ga**2)
    assert np.max(np.abs(total - expect)) <= 1e-12 * np.max(expect)
    assert np.all(ndiag == 0)


def test_identity_s_gives_jc_rate(pair800):
    r0 = reference.dipole(800, "L")
    c = emitter_couplings(pair800, np.eye(2), r0)
    w0 = reference.band(800, 201)
    total, diag, ndiag = gamma_qqnm(np.eye(2), c, w0)
    gam = -pair800.omegas.imag
    D = pair800.omegas.real[:, None] - w0[None, :]
    jc = np.sum(2 * np.abs(c.g)[:, None] ** 2 * gam[:, None] / (D**2 + gam[:, None] ** 2), axis=0)
    assert np.max(np.abs(total - jc)) <= 1e-12 * np.max(jc)
    assert np.all(ndiag == 0)


@pytest.mark.parametrize("gap", reference.BENCH_GAPS_NM)
@pytest.mark.parametrize("side", "LR")
def test_rate_split_and_positivity(gap, side):
    p = reference.pair(gap)
    S = reference.s_pole(gap)
    c = emitter_couplings(p, S, reference.dipole(gap, side))
    lo, hi = greens.expansion_band(p)
    total, diag, ndiag = gamma_qqnm(S, c, np.linspace(lo, hi, 2001))
    assert np.max(np.abs(total - diag - ndiag)) <= 1e-12 * np.max(np.abs(total))
    assert total.min() >= -1e-9 * total.max()


def test_ndiag_negative_over_most_of_band(pair800):
    S = reference.s_pole(800)
    c = emitter_couplings(pair800, S, reference.dipole(800, "L"))
    _, _, ndiag = gamma_qqnm(S, c, reference.band(800, 401))
    assert np.mean(ndiag < 0) > 0.5


@pytest.mark.parametrize("gap", reference.BENCH_GAPS_NM)
@pytest.mark.parametrize("side", "LR")
def test_quantum_matches_classical(gap, side):
    p = reference.pair(gap)
    S = reference.s_pole(gap)
    r0 = reference.dipole(gap, side)
    w = reference.band(gap, 401)
    q = purcell_quantum(S, emitter_couplings(p, S, r0), w)
    assert reference.pointwise_rel(q, purcell_cqnm(p, r0, w)) <= 0.02


@pytest.mark.parametrize("gap", reference.BENCH_GAPS_NM)
def test_jc_matches_cnm(gap):
    p = reference.pair(gap)
    r0 = reference.dipole(gap, "L")
    w = reference.band(gap, 401)
    assert reference.pointwise_rel(purcell_qnm_jc(p, r0, w), purcell_cnm(p, r0, w)) <= 0.02


def test_quantum_far_dipole(pair800):
    S = reference.s_pole(800)
    g = pair800.geometry
    r0 = (g.center("L")[0] - (1 + 5e-6 / g.radius_a), 0.0)
    f = purcell_quantum(S, emitter_couplings(pair800, S, r0), reference.band(800))
    assert np.max(np.abs(f - 1)) < 0.1


# --- dissipator and transformed parameters ----------------------------------

def test_diagonal_dissipator():
    lam, U = diagonalize_dissipator(np.diag([3e-4, 1e-4]))
    assert np.allclose(U, np.eye(2)) and np.allclose(lam, [3e-4, 1e-4])


@settings(max_examples=100, deadline=None)
@given(a=st.floats(1e-3, 1.0), br=st.floats(-0.999, 0.999), bi=st.floats(-1, 1))
def test_dissipator_closed_form(a, br, bi):
    b = a * br * np.exp(1j * np.pi * bi)
    cm = np.array([[a, b], [np.conj(b), a]])
    lam, U = diagonalize_dissipator(cm)
    assert np.allclose(sorted(lam), [a - abs(b), a + abs(b)], rtol=0, atol=1e-13)
    assert np.allclose(U.conj().T @ cm @ U, np.diag(lam), rtol=0, atol=1e-13)
    assert np.allclose(U.conj().T @ U, np.eye(2), atol=1e-14)


@pytest.mark.parametrize("gap", reference.ALL_GAPS_NM)
def test_dissipator_sum_rule(gap):
    p = reference.pair(gap)
    _, cm = chi_matrices(reference.s_pole(gap), p.omegas)
    lam, _ = diagonalize_dissipator(cm)
    gsum = (-p.omegas.imag).sum()
    assert abs(lam.sum() - gsum) <= 1e-10 * gsum


def test_dissipator_continuity_tracking():
    prev = None
    for gap in reference.ALL_GAPS_NM[::-1]:
        p = reference.pair(gap)
        _, cm = chi_matrices(reference.s_pole(gap), p.omegas)
        lam, U = diagonalize_dissipator(cm, prev)
        if prev is not None:
            ov = np.abs(prev.conj().T @ U)
            assert ov[0, 0] * ov[1, 1] >= ov[0, 1] * ov[1, 0]
        prev = U


def test_identity_transformed_params(pair800):
    c = emitter_couplings(pair800, np.eye(2), reference.dipole(800, "L"))
    cp, cm = chi_matrices(np.eye(2), pair800.omegas)
    q = transformed_params(np.eye(2), cp, cm, pair800.omegas, c)
    assert np.allclose(q.delta_gamma, 1, rtol=0, atol=1e-12)
    assert np.allclose(q.delta_g, 1, rtol=0, atol=1e-12)
    assert q.G_em_Q == 0


@pytest.mark.parametrize("gap", reference.ALL_GAPS_NM)
def test_transformed_trace(gap):
    p = reference.pair(gap)
    q = quantum_params(p, reference.dipole(gap, "L"), reference.s_pole(gap))
    assert abs(q.Omega.sum() - p.omegas.real.sum()) <= 1e-8 * p.omegas.real.sum()
    assert np.all(q.Gamma_Q >= 0)


def test_g_em_decreases_with_gap():
    vals = [abs(quantum_params(reference.pair(g), S=reference.s_pole(g)).G_em_Q) / GAMMA_L
            for g in reference.ALL_GAPS_NM]
    assert np.all(np.diff(vals) < 0)


def _ratios(gap):
    q = quantum_params(reference.pair(gap), reference.dipole(gap, "L"), reference.s_pole(gap))
    return q.delta_gamma, q.delta_g


def test_ratio_jump_between_800_and_850():
    r = {g: _ratios(g) for g in (750, 800, 850, 900)}
    for k, factor in ((0, 5.0), (1, 1.0)):
        step = lambda a, b: np.max(np.abs(r[b][k] - r[a][k]))
        jump = step(800, 850)
        assert jump > 0.5
        assert jump > factor * max(step(750, 800), step(850, 900))


@pytest.mark.parametrize("gap", reference.ALL_GAPS_NM)
def test_delta_gamma_against_reference_table(gap):
    dg, _ = _ratios(gap)
    assert np.all(np.abs(dg - reference.DELTA_GAMMA_REF[gap]) <= 0.01 * np.asarray(reference.DELTA_GAMMA_REF[gap]))


def test_division_guard(pair800):
    c = EmitterCouplings(np.array([1.0 + 0j, 0j]), np.array([1.0 + 0j, 0.2j]), pair800.omegas)
    cp, cm = chi_matrices(reference.s_pole(800), pair800.omegas)
    q = transformed_params(np.eye(2), cp, cm, pair800.omegas, c)
    assert np.isfinite(q.delta_g[0]) and np.isnan(q.delta_g[1])
    assert q.to_dict()["delta_g_pm"][1] is None


def test_json_export(pair800):
    q = quantum_params(pair800, reference.dipole(800, "L"))
    d = json.loads(json.dumps(q.to_dict()))
    assert set(d) == {"S", "chi_plus", "chi_minus", "Gamma_pm_Q", "Omega_pm", "G_em_Q", "G_pm_Q",
                      "delta_gamma_pm", "delta_g_pm"}
    assert len(d["G_em_Q"]) == 2 and np.array(d["S"]).shape == (2, 2, 2)
    assert abs(sum(d["Omega_pm"]) - pair800.omegas.real.sum() * reference.UNIT) < 1e-6 * reference.UNIT
