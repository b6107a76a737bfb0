import math

import numpy as np
import pytest

from slcalib import cgeom, families as fm, flow, symmetry as sy

TS = np.linspace(-2, 2, 9)


def canonical():
    return np.array([[1, -1j, 0], [1, -1j, 0], [0, 0, 1]], dtype=complex)


def caseiii_family(seed=0):
    rng = np.random.default_rng(seed)
    A, B, D = (complex(*rng.normal(size=2)) for _ in range(3))
    E = 1j * ((A * D.conjugate()).imag / abs(B) ** 2) * B
    return fm.caseiii_family(fm.CaseIIIParams(A, B, D, E))


def test_rotation_mixes_z4_and_z5():
    th = 0.4
    g = sy.GL2AffineParams(math.cos(th), -math.sin(th), math.sin(th), math.cos(th))
    fam = caseiii_family()
    s0 = fam.state(0.0)
    s1 = sy.gl2_act(g, fam).state(0.0)
    assert np.allclose(s1[3], g.a * s0[3] + g.c * s0[4])
    assert np.allclose(s1[4], g.b * s0[3] + g.d * s0[4])


def test_gl2_action_maps_solutions_to_solutions():
    g = sy.GL2AffineParams(1.2, 0.3, -0.4, 0.9, 0.5, -0.7)
    fam = caseiii_family(1)
    moved = sy.gl2_act(g, fam)
    s = moved.state(TS)
    assert np.abs(moved.dstate(TS) - flow.rhs_z(s)).max() < 1e-11
    u, v = np.meshgrid(np.linspace(-1, 1, 3), np.linspace(-1, 1, 3))
    for t in (0.0, 0.8):
        assert sy.point_set_defect(g, fam, moved, u, v, np.full_like(u, t)) < 1e-12


def test_gl2_compose_order():
    g = sy.GL2AffineParams(1.2, 0.3, -0.4, 0.9, 0.5, -0.7)
    h = sy.GL2AffineParams(0.8, -0.1, 0.2, 1.1, -0.3, 0.2)
    assert np.allclose(sy.gl2_matrix(g.compose(h)), sy.gl2_matrix(h) @ sy.gl2_matrix(g))


def test_gl2_params_validation():
    with pytest.raises(ValueError):
        sy.GL2AffineParams(1, 2, 2, 4)
    with pytest.raises(ValueError):
        sy.GL2AffineParams(float("nan"))


def test_sl2_from_lorentz_recovers_matrix():
    G = np.array([[1.3, 0.4], [-0.2, (1 - 0.4 * 0.2) / 1.3]])
    T = sy.gl2_matrix(sy.GL2AffineParams.from_matrix(G))[:3, :3]
    back = sy.sl2_from_lorentz(T)
    assert np.allclose(back, G) or np.allclose(back, -G)
    with pytest.raises(sy.DegenerateData):
        sy.sl2_from_lorentz(np.diag([1.0, -1.0, 1.0]))


def test_k_action_maps_solutions_to_solutions():
    p = fm.KFamilyParams(3, (0.5, 0.2 + 0.1j, -0.3j), (1.0, 0.4, 0.2j))
    fam = fm.k_family(p)
    g = sy.KGroupParams(3, 1.3, 0.2, 0.7, (0.1, -0.4, 0.25))
    moved = sy.k_act(g, fam)
    s = moved.state(TS)
    assert np.abs(moved.dstate(TS) - flow.rhs_pq(s)).max() < 1e-11
    x, y = np.meshgrid(np.linspace(-1, 1, 3), np.linspace(-1, 1, 3))
    assert sy.point_set_defect(g, fam, moved, x, y, np.full_like(x, 0.6)) < 1e-12


def test_top_shift_removes_real_constant():
    k = 3
    fam = fm.k_family(fm.KFamilyParams(k, (0.5,), (1.0,)))
    up = sy.k_act(sy.KGroupParams(k, d=(0, 0, 0.7)), fam)
    assert np.allclose(up.state(TS)[:, k, 2] - fam.state(TS)[:, k, 2], 0.7)
    back = sy.k_act(sy.KGroupParams(k, d=(0, 0, -0.7)), up)
    assert np.allclose(back.state(TS), fam.state(TS))


def test_classify_cases():
    zero = np.zeros(3)
    assert sy.classify_case(zero, zero, zero).case == "i"
    v = np.array([1, 2j, 0])
    rep = sy.classify_case(v, 0 * v, 0 * v)
    assert (rep.case, rep.quadric) == ("ii", "y1^2+y2^2")
    assert sy.classify_case(0 * v, v, 0 * v).quadric == "y1^2-y2^2"
    assert sy.classify_case(v, v, 0 * v).quadric == "y1^2"
    assert sy.classify_case(*canonical()).case == "iii"
    assert sy.classify_case(*np.eye(3)).case == "iv"


def scramble(zs, seed):
    rng = np.random.default_rng(seed)
    G = np.array([[1.1, 0.3], [-0.5, 0.8]])
    s = np.zeros((6, 3), dtype=complex)
    s[:3] = zs
    moved = sy.gl2_state(sy.GL2AffineParams.from_matrix(G), s)[:3]
    return moved @ cgeom.random_su3(rng).T


def test_normalize_case_iii_reaches_canonical_form():
    for seed in range(5):
        zs = scramble(canonical(), seed)
        norm = sy.normalize_case_iii(*zs)
        assert np.abs(norm.z - canonical()).max() < 1e-10
        assert np.allclose(norm.U.conj().T @ norm.U, np.eye(3))


def test_normalize_case_iii_rejects_case_iv():
    with pytest.raises(sy.DegenerateData):
        sy.normalize_case_iii(*np.eye(3))


def test_normalize_case_iv_diagonalizes():
    rng = np.random.default_rng(3)
    for _ in range(5):
        z = flow.random_admissible_z(rng)[:3]
        norm = sy.normalize_case_iv(*z)
        assert sy.diagonal_defect(norm.z) < 1e-10
        assert abs(np.linalg.det(norm.U) - 1) < 1e-12
        assert abs(norm.g.delta - 1) < 1e-12
    with pytest.raises(sy.DegenerateData):
        sy.normalize_case_iv(*canonical())
