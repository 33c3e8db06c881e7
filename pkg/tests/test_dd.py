import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from spinlab import dd
from spinlab import spinops as so

OHMIC = dd.NoiseSpectrum("ohmic_sharp_cutoff", 1.0, 10.0)


def brute_filter(times, total, omega):
    """Fourier transform of the +-1 switching function by direct quadrature."""
    edges = [0.0, *times, total]
    y = 0j
    for j, (a, b) in enumerate(zip(edges, edges[1:])):
        y += (-1) ** j * (np.exp(1j * omega * b) - np.exp(1j * omega * a)) / (1j * omega)
    return abs(omega * y) ** 2


def test_cpmg_examples():
    assert dd.cpmg_times(1, 1.0).times_s == (0.5,)
    assert dd.cpmg_times(4, 1.0).times_s == pytest.approx((0.125, 0.375, 0.625, 0.875))
    t = np.array(dd.cpmg_times(6, 2.0).times_s)
    assert np.allclose(np.diff(t), 2.0 / 6)


def test_udd_examples():
    assert dd.udd_times(1, 2.0).times_s == (1.0,)
    assert dd.udd_times(2, 1.0).times_s == (0.25, 0.75)
    t3 = dd.udd_times(3, 1.0).times_s
    assert t3 == pytest.approx((0.1464466, 0.5, 0.8535534), abs=1e-7)


@pytest.mark.parametrize("n", [1, 2])
def test_low_order_udd_is_cpmg(n):
    for big_t in (1.0, 0.37, 4.0272e-3):
        assert dd.udd_times(n, big_t).times_s == dd.cpmg_times(n, big_t).times_s


@pytest.mark.parametrize("n", range(1, 12))
def test_udd_matches_formula(n):
    t = np.array(dd.udd_times(n, 1.0).times_s)
    exact = [float(mpmath.sin(mpmath.pi * j / (2 * n + 2)) ** 2) for j in range(1, n + 1)]
    assert np.max(np.abs(t - exact)) <= 1e-15


def test_sequence_validation():
    with pytest.raises(ValueError):
        dd.cpmg_times(0, 1.0)
    with pytest.raises(ValueError):
        dd.DdSequence(2, 1.0, (0.6, 0.4))
    with pytest.raises(ValueError):
        dd.cpmg_times(4, 1e-3, pulse_width_s=5e-4)


def test_free_filter():
    seq = dd.free_evolution(1.3)
    w = np.linspace(0.1, 50, 200)
    assert np.allclose(dd.filter_function(seq, w), 4 * np.sin(w * 1.3 / 2) ** 2)


@pytest.mark.parametrize("seq", [dd.cpmg_times(3, 1.0), dd.udd_times(5, 2.0), dd.cpmg_times(8, 0.5)])
def test_filter_matches_switching_function_transform(seq):
    for w in (0.7, 3.0, 41.0):
        assert dd.filter_function(seq, w) == pytest.approx(brute_filter(seq.times_s, seq.total_s, w), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 9), st.sampled_from(["cpmg", "udd"]), st.floats(0.01, 10))
def test_dc_noise_refocused(n, scheme, big_t):
    seq = dd.make_sequence(scheme, n, big_t)
    assert dd.filter_function(seq, 0.0) == pytest.approx(0.0, abs=1e-30)


@pytest.mark.parametrize("n", range(1, 8))
def test_udd_suppression_order(n):
    assert dd.loglog_slope(dd.udd_times(n, 1.0)) == pytest.approx(2 * n + 2, abs=0.1)


@pytest.mark.parametrize("n", range(1, 8))
def test_cpmg_suppression_order(n):
    # the leading small-omega term vanishes by symmetry for even N
    expect = 4 if n % 2 else 6
    assert dd.loglog_slope(dd.cpmg_times(n, 1.0)) == pytest.approx(expect, abs=0.1)


def test_spectra_shapes():
    w = np.array([0.0, 5.0, 10.0, 20.0])
    assert np.allclose(OHMIC(w), [0.0, 0.5, 0.0, 0.0])
    lor = dd.NoiseSpectrum("lorentzian", 2.0, 10.0)
    assert np.allclose(lor(w), 2 / (1 + (w / 10) ** 2))
    gau = dd.NoiseSpectrum("gaussian", 2.0, 10.0)
    assert np.allclose(gau(w), 2 * np.exp(-w**2 / 200))


def test_spectrum_parse():
    s = dd.NoiseSpectrum.parse("ohmic:amp=0.3,cutoff=1000")
    assert (s.kind, s.amplitude, s.cutoff) == ("ohmic_sharp_cutoff", 0.3, 1000.0)
    assert dd.NoiseSpectrum.parse("lorentzian:amp=1,cutoff=2").kind == "lorentzian"
    with pytest.raises(ValueError):
        dd.NoiseSpectrum.parse("pink:amp=1,cutoff=2")
    with pytest.raises(ValueError):
        dd.NoiseSpectrum("ohmic_sharp_cutoff", -1.0, 1.0)


def test_zero_spectrum_no_decay():
    seq = dd.cpmg_times(4, 1.0)
    assert dd.coherence_decay(seq, OHMIC.scaled(0.0)) == 1.0


@pytest.mark.parametrize("spec", [OHMIC, dd.NoiseSpectrum("lorentzian", 1.0, 3.0),
                                  dd.NoiseSpectrum("gaussian", 1.0, 5.0)])
def test_chi_against_scipy_quadrature(spec):
    seq = dd.udd_times(3, 1.0)
    f = lambda w: spec(w) * dd.filter_function(seq, w) / w**2  # noqa: E731
    top = {"ohmic_sharp_cutoff": 10.0, "gaussian": 80.0, "lorentzian": 3000.0}[spec.kind]
    ref, _ = integrate.quad(f, 1e-9, top, limit=2000, points=[spec.cutoff])
    if spec.kind == "lorentzian":  # tail beyond the cut, F averages to its mean 2 sum c^2 / 2
        ref += 2 * (1 + 1 + 4 * 3) * spec.amplitude * spec.cutoff**2 / (3 * top**3) / 2
    assert dd.chi(seq, spec) == pytest.approx(2 / np.pi * ref, rel=1e-5)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 5), st.floats(1.01, 4))
def test_chi_monotone_in_amplitude(a, factor):
    seq = dd.cpmg_times(2, 1.0)
    spec = dd.NoiseSpectrum("gaussian", a, 3.0)
    assert dd.chi(seq, spec.scaled(factor)) >= dd.chi(seq, spec)


@pytest.mark.parametrize("spec", [OHMIC, dd.NoiseSpectrum("lorentzian", 1.0, 3.0)])
def test_free_chi_closed_form(spec):
    for t in (0.3, 1.0, 2.5):
        assert dd.free_chi(t, spec) == pytest.approx(dd.chi(dd.free_evolution(t), spec), rel=1e-6)


def test_repeated_chi_consistency():
    spec = dd.NoiseSpectrum("gaussian", 1.0, 20.0)
    block = dd.udd_times(3, 0.5)
    assert dd.repeated_chi(block, 1, spec) == pytest.approx(dd.chi(block, spec), rel=1e-3)
    assert dd.repeated_chi(block, 6, spec) == pytest.approx(dd.chi(dd.repeated(block, 6), spec), rel=1e-3)
    # long-time growth approaches the harmonic rate
    rate = dd.block_rate(block, spec)
    slope = (dd.repeated_chi(block, 400, spec) - dd.repeated_chi(block, 200, spec)) / (200 * 0.5)
    assert slope == pytest.approx(rate, rel=0.02)


def test_monte_carlo_needs_enough_trajectories():
    with pytest.raises(ValueError):
        dd.monte_carlo_chi(dd.cpmg_times(2, 1.0), OHMIC, n_traj=50)


def test_monte_carlo_variance_scaling():
    spec = dd.NoiseSpectrum("gaussian", 3.0, 5.0)
    seq = dd.cpmg_times(4, 1.0)
    sizes = np.array([100, 200, 400, 800, 1600])
    var = []
    for n in sizes:
        est = [dd.monte_carlo_chi(seq, spec, int(n), seed=1000 * int(n) + s) for s in range(60)]
        var.append(np.var(est, ddof=1))
    slope = np.polyfit(np.log(sizes), np.log(var), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.15)


def test_monte_carlo_zero_noise_keeps_correlation():
    seq = dd.udd_times(3, 1.0)
    r = dd.monte_carlo_decay(seq, OHMIC.scaled(0.0), 200, "psi-plus", t_grid=[0.2, 0.6, 1.0], seed=3)
    assert np.allclose(r["correlation"], 1.0)


def test_singlet_immune_to_collective_noise():
    seq = dd.free_evolution(2.0)
    spec = dd.NoiseSpectrum("gaussian", 5.0, 5.0)
    r = dd.monte_carlo_decay(seq, spec, 500, "singlet", t_grid=[0.5, 1.0, 2.0], seed=1, correlated=True)
    assert np.all(r["correlation"] > 0.999)
    ind = dd.monte_carlo_decay(seq, spec, 500, "singlet", t_grid=[2.0], seed=1)
    assert ind["correlation"][0] < 0.999


def test_monte_carlo_bell_decay_matches_analytic():
    spec = dd.NoiseSpectrum("gaussian", 0.5, 5.0)
    seq = dd.cpmg_times(4, 1.0)
    c = dd.chi(seq, spec)
    rho0 = dd.bell_deviation("psi-plus")
    expect = so.correlation(dd._z_dephase(rho0, (c, c)), rho0)
    got = dd.monte_carlo_decay(seq, spec, 4000, "psi-plus", seed=11)["correlation"][0]
    assert got == pytest.approx(expect, abs=0.01)


def test_storage_flat_without_noise(btp):
    t = np.linspace(0, 20, 11)
    r = dd.storage_experiment("psi-plus", "none", btp, OHMIC.scaled(0.0), t, relax_on=False)
    assert np.allclose(r["correlation"], 1.0)
    assert np.allclose(r["magnetization"], 1.0)


def test_storage_block_length(btp):
    r = dd.storage_experiment("psi-plus", "udd", btp, OHMIC.scaled(0.0), [0.0], order=7, relax_on=False)
    assert r["block_s"] == pytest.approx(7 * 4.0272e-3)


def test_storage_rf_error_is_unitary_drift(btp):
    t = np.linspace(0, 5, 6)
    r = dd.storage_experiment("psi-plus", "cpmg", btp, OHMIC.scaled(0.0), t, order=2,
                              rf_error=0.02, relax_on=False)
    assert np.allclose(r["magnetization"], 1.0)
    assert r["correlation"][-1] < 1.0


def test_count_above():
    assert dd.count_above([0.95, 0.91, 0.9, 0.2]) == 2
