import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from spinlab import spinops as so

angles = st.floats(-2 * np.pi, 2 * np.pi, allow_nan=False)


def random_hermitian(rng, dim):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (m + m.conj().T) / 2


def test_pauli_x_matrix():
    assert np.array_equal(so.pauli("x"), [[0, 1], [1, 0]])


def test_pauli_algebra():
    x, y, z = (so.pauli(a) for a in "xyz")
    assert np.allclose(z @ z, np.eye(2))
    assert np.allclose(x @ y - y @ x, 2j * z)


def test_pauli_rejects_unknown_axis():
    with pytest.raises(ValueError):
        so.pauli("w")


def test_embed_slots():
    ix = so.spin("x")
    assert np.allclose(so.embed(2, 1, ix), np.kron(ix, np.eye(2)))
    assert np.allclose(so.embed(2, 2, ix), np.kron(np.eye(2), ix))
    assert np.allclose(so.embed(1, 1, so.spin("z")), so.spin("z"))


@pytest.mark.parametrize("k", [0, 3])
def test_embed_index_out_of_range(k):
    with pytest.raises(IndexError):
        so.embed(2, k, so.spin("x"))


@given(st.integers(1, 4), st.integers(1, 4), st.sampled_from("xyz"), st.sampled_from("xyz"))
def test_embed_commutes_on_distinct_spins(k, j, a, b):
    if k == j:
        return
    p = so.embed(4, k, so.spin(a))
    q = so.embed(4, j, so.spin(b))
    assert np.allclose(p @ q, q @ p)


def test_not_gate_from_pi_pulse():
    u = so.rotation(1, [1], np.pi, 0.0)
    rho = so.conjugate(u, so.projector(so.ket("0")))
    assert np.allclose(rho, so.projector(so.ket("1")))


def test_hadamard_up_to_global_phase():
    u = so.rotation(1, [1], np.pi, 0.0) @ so.rotation(1, [1], np.pi / 2, np.pi / 2)
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    phase = u[0, 0] / h[0, 0]
    assert abs(abs(phase) - 1) < 1e-12
    assert np.allclose(u, phase * h)


@pytest.mark.parametrize("targets,sign", [([1], -1), ([1, 2], 1), ([1, 2, 3], -1)])
def test_two_pi_rotation_spinor_sign(targets, sign):
    # each spin contributes -1, so the sign is (-1)^(number of targets)
    n = 3
    u = so.rotation(n, targets, 2 * np.pi, 0.0)
    oracle = scipy.linalg.expm(-1j * 2 * np.pi * so.total(n, "x", targets))
    assert np.allclose(u, oracle, atol=1e-12)
    assert np.allclose(u, sign * np.eye(2**n), atol=1e-12)


@settings(max_examples=50)
@given(angles, angles, st.sets(st.integers(1, 3), min_size=1))
def test_rotation_matches_matrix_exponential(angle, phase, targets):
    gen = sum(np.cos(phase) * so.ix(3, k) + np.sin(phase) * so.iy(3, k) for k in targets)
    oracle = scipy.linalg.expm(-1j * angle * gen)
    assert np.allclose(so.rotation(3, targets, angle, phase), oracle, atol=1e-10)


def test_rotation_needs_targets():
    with pytest.raises(ValueError):
        so.rotation(2, [], np.pi)


def test_z_rotation_two_pi():
    assert np.allclose(so.z_rotation(1, {1}, 2 * np.pi), -np.eye(1 * 2))


def test_z_rotation_signed_angles_match_shift_evolution():
    # shift evolution for tau = 1/(4 dnu) under dnu/2 (Iz1 - Iz2) in Hz
    dnu = 192.04
    h = 2 * np.pi * dnu / 2 * (so.iz(2, 1) - so.iz(2, 2))
    u = so.propagator(h, 1 / (4 * dnu))
    assert np.allclose(so.z_rotation(2, [(1, np.pi / 4), (2, -np.pi / 4)]), u)


def test_z_rotation_fixes_iz():
    u = so.z_rotation(2, [(1, 0.3), (2, -1.1)])
    rho = so.total(2, "z")
    assert np.allclose(so.conjugate(u, rho), rho)


def test_propagator_of_zero_is_identity():
    assert np.allclose(so.propagator(np.zeros((4, 4)), 1.7), np.eye(4))


def test_propagator_precession():
    w = 2 * np.pi * 13.0
    for t in np.linspace(0, 0.2, 7):
        rho = so.conjugate(so.propagator(w * so.spin("z"), t), so.spin("x"))
        assert np.isclose(np.real(np.trace(rho @ so.spin("x"))) / np.trace(so.spin("x") @ so.spin("x")).real,
                          np.cos(w * t))
        # <Ix> of the state 1/2 + Ix
        assert np.isclose(np.real(np.trace((np.eye(2) / 2 + rho) @ so.spin("x"))), np.cos(w * t) / 2)


def test_propagator_rejects_non_hermitian():
    with pytest.raises(ValueError):
        so.propagator(np.array([[0, 1], [0, 0]]), 1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3, allow_nan=False))
def test_propagator_unitary_and_reversible(seed, t):
    h = random_hermitian(np.random.default_rng(seed), 8)
    u = so.propagator(h, t)
    assert np.max(np.abs(u @ u.conj().T - np.eye(8))) < 1e-10
    assert np.allclose(u @ so.propagator(h, -t), np.eye(8), atol=1e-10)
    rho = random_hermitian(np.random.default_rng(seed + 1), 8)
    assert abs(np.trace(so.conjugate(u, rho)) - np.trace(rho)) < 1e-12 * max(1, abs(np.trace(rho))) + 1e-12


def test_correlation_examples():
    rho_s = so.projector(so.SINGLET) - so.projector(so.TRIPLET_ZERO)
    assert so.correlation(rho_s, rho_s) == pytest.approx(1.0)
    assert so.correlation(rho_s, -rho_s) == pytest.approx(-1.0)


def test_correlation_singlet_difference_against_triplet_zero():
    # the text quotes about -0.7; the exact value of this overlap is -sqrt(2/3)
    a = so.projector(so.SINGLET) - so.projector(so.TRIPLET_ZERO)
    b = so.traceless(so.projector(so.TRIPLET_ZERO))
    ta, tb = so.traceless(a), b
    oracle = np.trace(ta @ tb).real / np.sqrt(np.trace(ta @ ta).real * np.trace(tb @ tb).real)
    assert so.correlation(a, b) == pytest.approx(oracle)
    assert so.correlation(a, b) == pytest.approx(-np.sqrt(2 / 3))


def test_correlation_rejects_zero():
    with pytest.raises(ValueError):
        so.correlation(np.eye(4), so.total(2, "z"))


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100), st.floats(0.01, 100))
def test_correlation_symmetric_scale_invariant_bounded(seed, s1, s2):
    rng = np.random.default_rng(seed)
    a, b = random_hermitian(rng, 4), random_hermitian(rng, 4)
    c = so.correlation(a, b)
    assert -1 <= c <= 1
    assert c == pytest.approx(so.correlation(b, a), abs=1e-12)
    assert c == pytest.approx(so.correlation(s1 * a, s2 * b), abs=1e-9)


def test_diagonal_correlation():
    p = so.pps_deviation("1001")
    assert so.diagonal_correlation(p, p) == pytest.approx(1.0)
    a, b = so.pps_deviation("00"), so.pps_deviation("11")
    oracle = np.dot(np.diag(a).real, np.diag(b).real) / (np.linalg.norm(np.diag(a)) * np.linalg.norm(np.diag(b)))
    assert so.diagonal_correlation(a, b) == pytest.approx(oracle)
    assert so.diagonal_correlation(a, b) < 0


def test_diagonal_correlation_ignores_coherences():
    p = so.pps_deviation("01")
    noisy = p + 0.3 * so.total(2, "x")
    assert so.diagonal_correlation(noisy, p) == pytest.approx(1.0)
    assert so.correlation(noisy, p) < 1


def test_state_validation_and_deviation():
    s = so.State.thermal(2, eps=1e-3)
    assert abs(np.trace(s.rho) - 1) < 1e-12
    assert np.allclose(s.deviation, 1e-3 * so.total(2, "z"))
    with pytest.raises(ValueError):
        so.State(np.eye(2))
    with pytest.raises(ValueError):
        so.State(np.diag([1.5, -0.5]))


def test_product_operator_coefficients():
    rho = so.iz(2, 1) + 2 * so.iz(2, 1) @ so.iz(2, 2)
    assert so.product_operator_coefficients(rho) == pytest.approx({"ze": 1.0, "zz": 2.0})


def test_bell_kets_orthonormal():
    kets = [so.BELL[k] for k in ("psi-minus", "psi-plus", "phi-minus", "phi-plus")]
    g = np.array([[np.vdot(a, b) for b in kets] for a in kets])
    assert np.allclose(g, np.eye(4))
