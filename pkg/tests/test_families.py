import math

import numpy as np
import pytest

from slcalib import families as fm, flow


def rc(rng):
    return complex(*rng.normal(size=2))


def caseiii_params(rng):
    A, B, D = rc(rng), rc(rng), rc(rng)
    E = 1j * ((A * D.conjugate()).imag / abs(B) ** 2) * B
    return fm.CaseIIIParams(A, B, D, E)


def fd(fn, t, h=1e-5):
    return (fn(t + h) - fn(t - h)) / (2 * h)


TS = np.linspace(-3, 3, 13)


# ---------------------------------------------------------------- ExpSum and FourierPoly

def test_expsum_derivative_and_primitive():
    e = fm._es((1.5, 2.0), (0.5j, -1.0, 1), (2.0, 0.0, 2))
    assert np.allclose(e.deriv()(TS), fd(e, TS), atol=1e-8)
    prim = e.antideriv()
    assert np.allclose(prim.deriv()(TS), e(TS), atol=1e-12)
    assert np.allclose(e.conj()(TS), np.conj(e(TS)))
    assert np.allclose((e * e)(TS), e(TS) ** 2)


def test_fourierpoly_calculus():
    f = fm.FourierPoly({1: 2.0, -3: 1j, 0: 0.5})
    assert np.allclose(f.antideriv().deriv()(TS), f(TS))
    assert np.allclose(f.conj()(TS), np.conj(f(TS)))
    assert np.allclose(f.shift(2)(TS), np.exp(2j * TS) * f(TS))
    assert np.allclose(f.to_expsum()(TS), f(TS))
    with pytest.raises(ArithmeticError):
        fm.FourierPoly({}, 1.0).shift(1)


# ---------------------------------------------------------------- case (iii)

def test_caseiii_solves_flow_and_constraints():
    p = caseiii_params(np.random.default_rng(0))
    fam = fm.caseiii_family(p)
    s = fam.state(TS)
    assert np.abs(fam.dstate(TS) - flow.rhs_z(s)).max() < 1e-12
    assert np.abs(flow.constraint_residuals_z(s)).max() < 1e-12


def test_caseiii_point_matches_assembled_map():
    p = caseiii_params(np.random.default_rng(1))
    y1, y2 = np.meshgrid(np.linspace(-1, 1, 4), np.linspace(-2, 2, 3))
    for t in (0.0, 1.3, -2.0):
        lhs = fm.caseiii_point(y1, y2, t, p)
        rhs = fm.caseiii_family(p).phi(y1, y2, np.full_like(y1, t))
        assert np.abs(lhs - rhs).max() < 1e-12


def test_caseiii_constraint_is_enforced():
    with pytest.raises(fm.InadmissibleParameters):
        fm.CaseIIIParams(A=1.0, D=0.3j)


# ---------------------------------------------------------------- w-triples

def test_w_families_solve_the_w_equations():
    al = fm.AlphaTriple(1 / 3, 2 / 3, 2 / 3)
    cases = [lambda t: fm.casea_w(t), lambda t: fm.cased_w(t, al),
             lambda t: fm.caseb_w(t, fm.AlphaTriple.from_a23(0.5, 1.5))]
    for w in cases:
        assert np.abs(fd(w, TS) - flow.rhs_w(w(TS))).max() < 1e-8


def test_caseb_tends_to_casea():
    al = fm.AlphaTriple.from_a23(2 / 3, 2 / 3 + 1e-10)
    assert np.abs(fm.caseb_w(TS, al) - fm.casea_w(TS, al.a1)).max() < 1e-8
    with pytest.raises(fm.InadmissibleParameters):
        fm.caseb_w(TS, fm.AlphaTriple(1 / 3, 2 / 3, 2 / 3))


def test_casec_conserved_quantity_and_u_equation():
    al = fm.AlphaTriple(1 / 3, 2 / 3, 2 / 3)
    A = 0.2
    ts = np.linspace(0.1, 4, 9)
    u, th, w = fm.casec_wu(ts, al, A)
    assert np.allclose(fm.casec_conserved(al, A, u, th), A, atol=1e-10)
    du = fd(lambda t: fm.casec_wu(t, al, A)[0], ts)
    q = (al.a1 + u) * (al.a2 - u) * (al.a3 - u)
    assert np.allclose(du ** 2, 4 * (q - A ** 2), atol=1e-8)
    dw = fd(lambda t: fm.casec_wu(t, al, A)[2], ts)
    assert np.abs(dw - flow.rhs_w(w)).max() < 1e-7


def test_casec_rejects_bad_parameters():
    al = fm.AlphaTriple(1 / 3, 2 / 3, 2 / 3)
    with pytest.raises(fm.InadmissibleParameters):
        fm.casec_wu(0.0, al, 1.0)
    with pytest.raises(fm.InadmissibleParameters):
        fm.casec_wu(0.0, al, 0.1, theta1_0=0.0)


def test_alpha_triple_harmonic_relation():
    with pytest.raises(fm.InadmissibleParameters):
        fm.AlphaTriple(1, 1, 1)
    assert fm.AlphaTriple.from_a23(1.0, 1.0).a1 == pytest.approx(0.5)


# ---------------------------------------------------------------- case (a)

def casea_params():
    return fm.CaseAParams(0.3, -0.5, 0.7, 0.2, 1.1, 0.4, (1.1 * 0.7 + 0.4 * 0.2) / 0.3, 0.0)


def test_casea_solves_flow():
    fam = fm.CaseAFamily(casea_params())
    ts = np.linspace(-2, 2, 7)
    s = fam.state(ts)
    assert np.abs(fam.dstate(ts) - flow.rhs_z(s)).max() < 1e-10
    assert np.abs(fam.dstate(ts) - fd(fam.state, ts)).max() < 1e-7
    assert np.abs(flow.constraint_residuals_z(s)).max() < 1e-10


def test_casea_constraint_is_enforced():
    with pytest.raises(fm.InadmissibleParameters):
        fm.CaseAParams(B=1.0, Ep=1.0)


# ---------------------------------------------------------------- case (d)

def test_cased_eigensystem_for_one_third():
    eig = fm.cased_eigensystem(fm.AlphaTriple(1 / 3, 2 / 3, 2 / 3))
    assert eig.lam == pytest.approx(1.0, abs=1e-14)
    matrix, ident = fm.eigensystem_residuals(eig)
    assert matrix < 1e-12 and ident < 1e-12


def test_cased_family_solves_flow():
    al = fm.AlphaTriple(15, 40, 24)
    p = fm.random_cased_params(np.random.default_rng(2), al, 0.3)
    assert abs(p.residual()) < 1e-12
    fam = fm.cased_family(p)
    ts = np.linspace(0, 2, 9)
    s = fam.state(ts)
    scale = np.abs(s).max()
    assert np.abs(fam.dstate(ts) - flow.rhs_z(s)).max() < 1e-11 * scale ** 2
    assert np.abs(flow.constraint_residuals_z(s)).max() < 1e-11 * scale ** 2


def test_cased_shift_is_a_time_translation():
    al = fm.AlphaTriple(1 / 3, 2 / 3, 2 / 3)
    p = fm.random_cased_params(np.random.default_rng(3), al)
    c = 0.7
    q = fm.cased_shift(p, c)
    lhs = fm.cased_state(TS + c, p)
    U = np.exp(1j * p.eig.a * c)
    rhs = fm.cased_state(TS, q) * U
    assert np.abs(lhs - rhs).max() < 1e-12


def test_cased_constraint_is_enforced():
    with pytest.raises(fm.InadmissibleParameters):
        fm.CaseDParams(fm.AlphaTriple(1 / 3, 2 / 3, 2 / 3), C=1.0, Cp=1j)


# ---------------------------------------------------------------- k-families

def k_params(rng, k):
    A = [0.7] + [rc(rng) for _ in range(k - 1)]
    return fm.KFamilyParams(k, tuple(A), tuple(rc(rng) for _ in range(k)))


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_k_family_solves_flow(k):
    p = k_params(np.random.default_rng(k), k)
    sink = []
    fam = fm.ExpSumFamily(fm.kfamily_expsum(fm.generic_k_solve(p, sink=sink)), "pq")
    assert max(sink, default=0.0) < 1e-12
    s = fam.state(TS)
    assert np.abs(fam.dstate(TS) - flow.rhs_pq(s)).max() < 1e-11
    assert np.abs(flow.constraint_residuals_pq(s)).max() < 1e-11


def test_k1_solution():
    p = fm.KFamilyParams(1, (0.4,), (1 - 2j,))
    a1 = fm.generic_k_solve(p)[1][0]
    assert np.allclose(a1(TS), 0.4 * np.exp(1j * TS) + (1 - 2j) * np.exp(-1j * TS))


def test_k4_written_out_matches_recursion():
    p = k_params(np.random.default_rng(9), 4)
    a = fm.k4_state(TS, p)
    b = fm.k_family(p).state(TS)
    assert np.abs(a - b).max() < 1e-12


def test_k4_single_b1():
    p = fm.KFamilyParams(4, (), (1.0,))
    s = fm.k4_state(TS, p)
    assert np.allclose(s[:, 1], np.stack([np.exp(-1j * TS), 1j * np.exp(1j * TS), 0 * TS], -1))


def test_k_family_support_prediction():
    k = 5
    p = k_params(np.random.default_rng(11), k)
    sol = fm.generic_k_solve(p)
    for j in range(k + 1):
        for ci, comp in enumerate("abc"):
            allowed = {freq for name, idx, _, _, freq in fm.support_terms(j, comp) if 1 <= idx <= k}
            assert sol[j][ci].support() <= allowed


def test_k_params_validation():
    with pytest.raises(fm.InadmissibleParameters):
        fm.KFamilyParams(2, (1j,))
    with pytest.raises(fm.InadmissibleParameters):
        fm.KFamilyParams(0)
    assert fm.KFamilyParams(3, (0, 0, 1.0)).periodic
