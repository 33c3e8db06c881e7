import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinlab import spinops as so
from spinlab.hamiltonian import (SingletRelaxParams, SpinSystem, isotropic_j, load_system, rf_effective,
                                 weak_coupling)

TWO_PI = 2 * np.pi


def two_spin(nu1, nu2, j):
    return SpinSystem(2, (nu1, nu2), [[0, j], [j, 0]])


def test_two_spin_energies():
    nu1, nu2, j = 96.02, -96.02, 4.02
    h = weak_coupling(two_spin(nu1, nu2, j))
    wk, wl = TWO_PI * nu1, TWO_PI * nu2
    e = np.real(np.diag(h))
    # direct evaluation of sum w Iz + 2 pi J Iz Iz with |0> = +1/2
    assert e == pytest.approx([(wk + wl) / 2 + np.pi * j / 2, (wk - wl) / 2 - np.pi * j / 2,
                               (-wk + wl) / 2 - np.pi * j / 2, -(wk + wl) / 2 + np.pi * j / 2])
    # the textbook list (E00 = (wk + wl - pi J)/2, ...) is the same spectrum with J -> -J;
    # both give the spin-k lines at wk +- pi J
    lines_k = sorted([e[0] - e[2], e[1] - e[3]])
    assert lines_k == pytest.approx(sorted([wk - np.pi * j, wk + np.pi * j]))
    lines_l = sorted([e[0] - e[1], e[2] - e[3]])
    assert lines_l == pytest.approx(sorted([wl - np.pi * j, wl + np.pi * j]))


def test_zero_system_is_zero_operator():
    assert np.allclose(weak_coupling(two_spin(0, 0, 0)), 0)
    assert np.allclose(isotropic_j(two_spin(10, -10, 0)), 0)


def test_three_spin_diagonal_by_hand(acrylonitrile):
    sys = acrylonitrile
    h = np.real(np.diag(weak_coupling(sys)))
    assert h.shape == (8,)
    for idx in range(8):
        m = [0.5 - b for b in so.bits(idx, 3)]
        e = sum(sys.shifts_hz[k] * m[k] for k in range(3))
        e += sys.j(1, 2) * m[0] * m[1] + sys.j(1, 3) * m[0] * m[2] + sys.j(2, 3) * m[1] * m[2]
        assert h[idx] == pytest.approx(TWO_PI * e)


def test_weak_coupling_conserves_total_z(acrylonitrile):
    h = weak_coupling(acrylonitrile)
    fz = so.total(3, "z")
    assert np.allclose(h @ fz, fz @ h)


def test_isotropic_singlet_triplet_spectrum():
    j = 4.02
    h = isotropic_j(two_spin(50, -50, j))
    in_st = so.ST_BASIS.conj().T @ h @ so.ST_BASIS
    assert np.allclose(in_st, np.diag(np.diag(in_st)))
    e = np.real(np.diag(in_st))
    assert e[0] == pytest.approx(-1.5 * np.pi * j)
    assert e[1:] == pytest.approx([np.pi * j / 2] * 3)
    assert e[1] - e[0] == pytest.approx(TWO_PI * j)


def test_isotropic_commutes_with_total_spin():
    h = isotropic_j(two_spin(12, -3, 7.5))
    for axis in "xyz":
        f = so.total(2, axis)
        assert np.allclose(h @ f, f @ h)


@settings(max_examples=20, deadline=None)
@given(st.floats(1e3, 1e4), st.floats(0.05, 1.0))
def test_secular_truncation(dnu, j):
    sys = two_spin(dnu / 2, -dnu / 2, j)
    strong = weak_coupling(sys, couplings=False) + isotropic_j(sys)
    e_strong = np.sort(np.linalg.eigvalsh(strong))
    e_weak = np.sort(np.real(np.diag(weak_coupling(sys))))
    assert np.max(np.abs(e_strong - e_weak)) < 1e-2 * TWO_PI * j


def test_rf_effective_mismatch_element():
    dnu = 192.04
    sys = two_spin(dnu / 2, -dnu / 2, 4.02)
    h = rf_effective(sys, 0.0)
    in_st = so.ST_BASIS.conj().T @ h @ so.ST_BASIS
    assert abs(in_st[0, 2]) == pytest.approx(np.pi * dnu)
    assert in_st[0, 0].real == pytest.approx(-1.5 * np.pi * 4.02)


def test_rf_effective_equivalent_spins_block_diagonal():
    sys = two_spin(30, 30, 4.02)
    h = rf_effective(sys, 1500.0, offset_hz=20.0)
    in_st = so.ST_BASIS.conj().T @ h @ so.ST_BASIS
    assert np.allclose(in_st[0, 1:], 0)
    assert np.allclose(in_st[1:, 0], 0)


def test_strong_lock_keeps_singlet_eigenstate():
    sys = two_spin(96.02, -96.02, 4.02)
    h = rf_effective(sys, 1e6)
    v = h @ so.SINGLET
    # only the shift mismatch leaks out of the singlet, and it does not grow with the lock
    leak = v - np.vdot(so.SINGLET, v) * so.SINGLET
    assert np.linalg.norm(leak) == pytest.approx(np.pi * 192.04)


def test_system_validation():
    with pytest.raises(ValueError):
        SpinSystem(2, (0, 0), [[0, 1], [2, 0]])
    with pytest.raises(ValueError):
        SpinSystem(2, (0, 0), [[1, 0], [0, 0]])
    with pytest.raises(ValueError):
        SpinSystem(2, (0, 0), np.zeros((2, 2)), t1_s=(1.0, 1.0), t2_s=(2.0, 1.0))
    with pytest.raises(ValueError):
        SingletRelaxParams(1.0, 2.0, 0.3)


def test_builtin_systems(btp, chloroform):
    assert btp.delta_nu() == pytest.approx(192.04)
    assert btp.j(1, 2) == pytest.approx(4.02)
    assert btp.t1_s == (5.2, 6.2)
    assert btp.singlet.ts_s == pytest.approx(16.6)
    assert chloroform.j(1, 2) == pytest.approx(217.6)
    assert chloroform.t2_s == (4.0, 0.8)


def test_load_from_path_round_trip(tmp_path, acrylonitrile):
    p = tmp_path / "sys.json"
    p.write_text(json.dumps(acrylonitrile.to_dict()))
    again = load_system(p)
    assert again.shifts_hz == acrylonitrile.shifts_hz
    assert np.array_equal(again.j_hz, acrylonitrile.j_hz)
    assert again.singlet == acrylonitrile.singlet


def test_missing_system_file_names_path(tmp_path):
    missing = tmp_path / "nope.json"
    with pytest.raises(FileNotFoundError, match="nope.json"):
        load_system(missing)
