"""Dynamical decoupling: CPMG and UDD timing, filter functions, dephasing.

Dephasing model: H = (Omega + beta(t)) sigma_z / 2 with beta a stationary
Gaussian process. Pi pulses toggle the sign of the accumulated phase, so a
sequence acts through its switching function y(t) = +-1. The decoherence
integral is

    chi = (2/pi) * int_0^inf S(w) / w^2 * F(w) dw,   W = exp(-chi),

with F = |1 + (-1)^(N+1) e^{iwT} + 2 sum_j (-1)^j e^{iw t_j}|^2. The noise
spectrum S is one-sided and normalized so that W = exp(-chi) is exactly the
Gaussian average <cos phi>; equivalently <beta^2> = (4/pi) int_0^inf S dw.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import mpmath
import numpy as np
from scipy import special

from . import spinops as so
from .hamiltonian import SpinSystem
from .relax import free_relax

TAU_CPMG_S = 2e-3
TAU_PI_S = 27.2e-6
BLOCK_S = 2 * TAU_CPMG_S + TAU_PI_S  # 4.0272 ms per pulse


class NonConvergentIntegral(RuntimeError):
    pass


@dataclass(frozen=True)
class DdSequence:
    n_pulses: int
    total_s: float
    times_s: tuple[float, ...]
    pulse_width_s: float = 0.0
    kind: str = "custom"

    def __post_init__(self):
        t = tuple(float(x) for x in self.times_s)
        if len(t) != self.n_pulses:
            raise ValueError("times_s length must equal n_pulses")
        if self.total_s <= 0:
            raise ValueError("total_s must be positive")
        edges = (0.0,) + t + (self.total_s,)
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("pulse times must satisfy 0 < t1 < ... < tN < T")
        w = self.pulse_width_s
        if w and any(b - a < w for a, b in zip(t, t[1:])):
            raise ValueError("pulses overlap for the given pulse width")
        if w and t and (t[0] < w / 2 or self.total_s - t[-1] < w / 2):
            raise ValueError("pulses overlap the sequence boundaries")
        object.__setattr__(self, "times_s", t)


def free_evolution(total_s: float) -> DdSequence:
    return DdSequence(0, total_s, (), 0.0, "free")


def cpmg_times(n: int, total_s: float, pulse_width_s: float = 0.0) -> DdSequence:
    """t_j = T (2j - 1) / (2N)."""
    if n < 1:
        raise ValueError("N must be >= 1")
    t = tuple(total_s * (2 * j - 1) / (2 * n) for j in range(1, n + 1))
    return DdSequence(n, total_s, t, pulse_width_s, "cpmg")


def udd_formula(n: int, total_s: float) -> np.ndarray:
    j = np.arange(1, n + 1)
    return total_s * np.sin(np.pi * j / (2 * n + 2)) ** 2


def udd_times(n: int, total_s: float, pulse_width_s: float = 0.0) -> DdSequence:
    """t_j = T sin^2(pi j / (2N + 2)).

    For N = 1 and 2 the formula lands on the CPMG instants; those are
    returned exactly rather than with rounding in the last bit.
    """
    if n < 1:
        raise ValueError("N must be >= 1")
    if n <= 2:
        seq = cpmg_times(n, total_s, pulse_width_s)
        return DdSequence(n, total_s, seq.times_s, pulse_width_s, "udd")
    return DdSequence(n, total_s, tuple(udd_formula(n, total_s)), pulse_width_s, "udd")


def make_sequence(scheme: str, n: int, total_s: float, pulse_width_s: float = 0.0) -> DdSequence:
    if scheme == "none":
        return free_evolution(total_s)
    if scheme == "cpmg":
        return cpmg_times(n, total_s, pulse_width_s)
    if scheme == "udd":
        return udd_times(n, total_s, pulse_width_s)
    raise ValueError(f"unknown scheme {scheme!r}")


def _terms(seq: DdSequence):
    """Switching-function Fourier terms as (coefficients, times)."""
    n = seq.n_pulses
    c = [1.0, (-1.0) ** (n + 1)] + [2.0 * (-1) ** j for j in range(1, n + 1)]
    s = [0.0, seq.total_s] + list(seq.times_s)
    return np.array(c), np.array(s)


def _exact_times(seq: DdSequence):
    n, big_t = seq.n_pulses, mpmath.mpf(seq.total_s)
    if seq.kind == "cpmg":
        return [big_t * (2 * j - 1) / (2 * n) for j in range(1, n + 1)]
    if seq.kind == "udd":
        return [big_t * mpmath.sin(mpmath.pi * j / (2 * n + 2)) ** 2 for j in range(1, n + 1)]
    return [mpmath.mpf(t) for t in seq.times_s]


def filter_function(seq: DdSequence, omega, precise: Optional[bool] = None):
    """F(omega) for instantaneous pi pulses.

    Near omega = 0 the terms cancel to high order, so small omega*T is
    evaluated in extended precision with the pulse instants recomputed from
    their closed forms. ``precise`` forces either path.
    """
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    out = np.empty_like(w)
    c, s = _terms(seq)
    small = np.abs(w) * seq.total_s < 0.5 if precise is None else np.full(w.shape, bool(precise))
    if np.any(~small):
        ww = w[~small]
        y = np.exp(1j * np.outer(ww, s)) @ c
        out[~small] = np.abs(y) ** 2
    if np.any(small):
        with mpmath.workdps(80):
            times = [mpmath.mpf(0), mpmath.mpf(seq.total_s)] + _exact_times(seq)
            for i in np.nonzero(small)[0]:
                wm = mpmath.mpf(float(w[i]))
                y = sum(mpmath.mpf(ci) * mpmath.expj(wm * ti) for ci, ti in zip(c, times))
                out[i] = float(abs(y) ** 2)
    return out if np.ndim(omega) else float(out[0])


def loglog_slope(seq: DdSequence, lo: float = 1e-3, hi: float = 1e-1, points: int = 25) -> float:
    """Slope of log F against log(omega T) over [lo, hi]."""
    x = np.geomspace(lo, hi, points)
    f = filter_function(seq, x / seq.total_s, precise=True)
    return float(np.polyfit(np.log(x), np.log(f), 1)[0])


# ------------------------------------------------------------------- spectra

@dataclass(frozen=True)
class NoiseSpectrum:
    """S(w) >= 0 for w >= 0.

    ohmic_sharp_cutoff: A w / w_c for w < w_c, else 0
    lorentzian:         A / (1 + (w / w_c)^2)
    gaussian:           A exp(-w^2 / (2 w_c^2))
    """

    kind: str
    amplitude: float
    cutoff: float

    def __post_init__(self):
        if self.kind not in ("ohmic_sharp_cutoff", "lorentzian", "gaussian"):
            raise ValueError(f"unknown spectrum kind {self.kind!r}")
        if self.amplitude < 0 or self.cutoff <= 0:
            raise ValueError("amplitude must be >= 0 and cutoff > 0")

    def __call__(self, omega):
        w = np.abs(np.asarray(omega, dtype=float))
        a, wc = self.amplitude, self.cutoff
        if self.kind == "ohmic_sharp_cutoff":
            return np.where(w < wc, a * w / wc, 0.0)
        if self.kind == "lorentzian":
            return a / (1 + (w / wc) ** 2)
        return a * np.exp(-(w**2) / (2 * wc**2))

    @property
    def upper(self) -> float:
        """Frequency beyond which the spectrum is treated as zero."""
        return self.cutoff if self.kind == "ohmic_sharp_cutoff" else 10 * self.cutoff

    def scaled(self, factor: float) -> "NoiseSpectrum":
        return NoiseSpectrum(self.kind, self.amplitude * factor, self.cutoff)

    @classmethod
    def parse(cls, text: str) -> "NoiseSpectrum":
        """'ohmic:amp=..,cutoff=..', 'lorentzian:...' or 'gaussian:...'."""
        kind, _, rest = text.partition(":")
        kind = {"ohmic": "ohmic_sharp_cutoff"}.get(kind, kind)
        params = {}
        for item in filter(None, rest.split(",")):
            k, _, v = item.partition("=")
            params[k.strip()] = float(v)
        unknown = set(params) - {"amp", "cutoff"}
        if unknown:
            raise ValueError(f"unknown spectrum parameters {sorted(unknown)}")
        return cls(kind, params.get("amp", 0.0), params.get("cutoff", 1.0))


_GL16 = np.polynomial.legendre.leggauss(16)
_GL32 = np.polynomial.legendre.leggauss(32)


def _panel_sums(fn, lo, hi, rule):
    x, wts = rule
    half, mid = (hi - lo) / 2, (hi + lo) / 2
    nodes = mid[:, None] + half[:, None] * x[None, :]
    return half * (fn(nodes.ravel()).reshape(nodes.shape) @ wts)


def _adaptive(fn, edges, rtol: float, max_rounds: int = 12) -> tuple[float, float]:
    """Panel-wise Gauss-Legendre (16 vs 32 nodes), bisecting panels whose two
    estimates disagree by more than their share of ``rtol`` times the total."""
    lo, hi = np.asarray(edges[:-1], float), np.asarray(edges[1:], float)
    total, err, scale = 0.0, 0.0, None
    for _ in range(max_rounds):
        coarse = _panel_sums(fn, lo, hi, _GL16)
        fine = _panel_sums(fn, lo, hi, _GL32)
        diff = np.abs(fine - coarse)
        if scale is None:
            scale = float(np.sum(np.abs(fine))) or 1.0
        bad = diff > rtol * scale * (hi - lo) / (edges[-1] - edges[0])
        total += float(np.sum(fine[~bad]))
        err += float(np.sum(diff[~bad]))
        if not bad.any():
            return total, err
        mid = (lo[bad] + hi[bad]) / 2
        lo, hi = np.concatenate([lo[bad], mid]), np.concatenate([mid, hi[bad]])
    return total + float(np.sum(fine[bad])), err + float(np.sum(diff[bad]))


def chi(seq: DdSequence, spectrum: NoiseSpectrum, rtol: float = 1e-9) -> float:
    """Decoherence integral by adaptive panel quadrature.

    The range is split at w_c and into panels half an oscillation of F wide.
    A Lorentzian is integrated to 200 w_c and the remaining tail uses the
    mean of F, which is the sum of squared coefficients.
    """
    if spectrum.amplitude == 0:
        return 0.0

    def fn(w):
        return spectrum(w) * filter_function(seq, w) / w**2

    hi = {"ohmic_sharp_cutoff": 1.0, "gaussian": 10.0, "lorentzian": 200.0}[spectrum.kind] * spectrum.cutoff
    panel = max(np.pi / seq.total_s, hi / 20000)
    edges = np.unique(np.concatenate([np.arange(0.0, hi, panel), [min(spectrum.cutoff, hi), hi]]))
    total, err = _adaptive(fn, edges, rtol)
    if spectrum.kind == "lorentzian":
        c, _ = _terms(seq)
        total += float(np.sum(c**2)) * spectrum.amplitude * spectrum.cutoff**2 / (3 * hi**3)
    value = 2 / np.pi * total
    if not np.isfinite(value) or err > 1e-6 * abs(total) + 1e-300:
        raise NonConvergentIntegral(f"chi integral did not converge (error {err:.3g})")
    return float(value)


def coherence_decay(seq: DdSequence, spectrum: NoiseSpectrum) -> float:
    """W = exp(-chi)."""
    return float(np.exp(-chi(seq, spectrum)))


def repeated(seq: DdSequence, blocks: int) -> DdSequence:
    """The sequence concatenated ``blocks`` times."""
    t = [m * seq.total_s + tj for m in range(blocks) for tj in seq.times_s]
    return DdSequence(len(t), blocks * seq.total_s, tuple(t), seq.pulse_width_s, "custom")


# -------------------------------------------------------------- Monte Carlo

class SpectralSynthesis:
    """beta(t) = sum_k a_k cos(w_k t + theta_k) with random phases.

    Frequencies sit at the midpoints of a grid of spacing 2 pi / (10 T) up to
    10 w_c (or w_c for a sharp cutoff); a_k^2 / 2 = (4/pi) S(w_k) dw.
    """

    def __init__(self, spectrum: NoiseSpectrum, duration_s: float, resolution: float = 10.0):
        dw = 2 * np.pi / (resolution * duration_s)
        top = spectrum.cutoff if spectrum.kind == "ohmic_sharp_cutoff" else 10 * spectrum.cutoff
        k = max(int(np.ceil(top / dw)), 1)
        self.omega = (np.arange(k) + 0.5) * dw
        self.amp = np.sqrt(8 / np.pi * spectrum(self.omega) * dw)

    def phase_integrals(self, edges: np.ndarray, signs: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """int y(t) beta(t) dt for piecewise-constant y; returns (n_traj,)."""
        w = self.omega
        # int_a^b cos(w t + th) dt = (sin(w b + th) - sin(w a + th)) / w
        s = np.sin(edges[None, :, None] * w[None, None, :] + theta[:, None, :])
        seg = (s[:, 1:, :] - s[:, :-1, :]) / w
        return np.einsum("tik,i,k->t", seg, signs, self.amp)


def _segments(seq: DdSequence, t_end: float):
    edges = np.array([0.0] + [t for t in seq.times_s if t < t_end] + [t_end])
    signs = np.array([(-1.0) ** j for j in range(len(edges) - 1)])
    return edges, signs


def monte_carlo_chi(seq: DdSequence, spectrum: NoiseSpectrum, n_traj: int = 2000,
                    seed: int = 0) -> float:
    """chi estimated as -ln <cos phi> over sampled noise trajectories."""
    if n_traj < 100:
        raise ValueError("n_traj must be >= 100")
    rng = np.random.default_rng(seed)
    syn = SpectralSynthesis(spectrum, seq.total_s)
    theta = rng.uniform(0, 2 * np.pi, size=(n_traj, syn.omega.size))
    edges, signs = _segments(seq, seq.total_s)
    phi = syn.phase_integrals(edges, signs, theta)
    return float(-np.log(np.mean(np.cos(phi))))


def monte_carlo_phases(seq: DdSequence, spectrum: NoiseSpectrum, n_traj: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    syn = SpectralSynthesis(spectrum, seq.total_s)
    theta = rng.uniform(0, 2 * np.pi, size=(n_traj, syn.omega.size))
    edges, signs = _segments(seq, seq.total_s)
    return syn.phase_integrals(edges, signs, theta)


def bell_deviation(which: str) -> np.ndarray:
    return so.traceless(so.projector(so.BELL[which]))


PRODUCT_STATE = so.total(2, "x")


def initial_deviation(which: str) -> np.ndarray:
    """Bell-state deviation, or 'product' for Ix1 + Ix2."""
    return PRODUCT_STATE.copy() if which == "product" else bell_deviation(which)


def monte_carlo_decay(seq: DdSequence, spectrum: NoiseSpectrum, n_traj: int, bell_state: str,
                      t_grid=None, seed: int = 0, correlated: bool = False) -> dict:
    """Average two-spin density matrices over sampled baths.

    Each spin sees its own beta(t) (the same one when ``correlated``); both
    spins are flipped at every pulse. Returns correlation with the initial
    state at each time in ``t_grid`` (default: the sequence end).
    """
    if n_traj < 100:
        raise ValueError("n_traj must be >= 100")
    t_grid = np.array([seq.total_s] if t_grid is None else t_grid, dtype=float)
    rho0 = initial_deviation(bell_state)
    rng = np.random.default_rng(seed)
    syn = SpectralSynthesis(spectrum, max(seq.total_s, float(t_grid.max())))
    k = syn.omega.size
    th1 = rng.uniform(0, 2 * np.pi, size=(n_traj, k))
    th2 = th1 if correlated else rng.uniform(0, 2 * np.pi, size=(n_traj, k))
    m = np.array([[0.5 - b for b in so.bits(i, 2)] for i in range(4)])  # (4, 2)
    xx = np.kron(so.pauli("x"), so.pauli("x"))
    corr = []
    for t in t_grid:
        edges, signs = _segments(seq, t)
        p1 = syn.phase_integrals(edges, signs, th1)
        p2 = p1 if correlated else syn.phase_integrals(edges, signs, th2)
        # toggling-frame phase of basis state a: -(m_a1 p1 + m_a2 p2)
        ph = -(np.outer(p1, m[:, 0]) + np.outer(p2, m[:, 1]))
        d = np.exp(1j * ph)  # (traj, 4)
        avg = np.einsum("ta,tb->ab", d, d.conj()) / n_traj * rho0
        flips = len(edges) - 2
        if flips % 2:
            avg = xx @ avg @ xx
        corr.append(so.correlation(avg, rho0) if np.any(np.abs(so.traceless(avg)) > 0) else 0.0)
    return {"t_s": t_grid, "correlation": np.array(corr)}


# ----------------------------------------------------------- Bell storage

def free_chi(t_s: float, spectrum: NoiseSpectrum) -> float:
    """chi for free evolution of length t, in closed form where available."""
    if t_s <= 0 or spectrum.amplitude == 0:
        return 0.0
    a, wc = spectrum.amplitude, spectrum.cutoff
    if spectrum.kind == "ohmic_sharp_cutoff":
        x = wc * t_s
        ci = special.sici(x)[1]
        return float(4 * a / (np.pi * wc) * (np.euler_gamma + np.log(x) - ci))
    if spectrum.kind == "lorentzian":
        return float(2 * a * (t_s - (1 - np.exp(-wc * t_s)) / wc))
    return repeated_chi(free_evolution(t_s), 1, spectrum)


def _grid(spectrum: NoiseSpectrum, t_s: float, per_period: int = 40):
    top = spectrum.cutoff if spectrum.kind == "ohmic_sharp_cutoff" else 50 * spectrum.cutoff
    dw = min(2 * np.pi / (per_period * t_s), top / 200)
    w = (np.arange(int(np.ceil(top / dw))) + 0.5) * dw
    return w[w < top], dw


def repeated_chi(block: DdSequence, blocks: int, spectrum: NoiseSpectrum) -> float:
    """chi after ``blocks`` back-to-back repetitions of ``block``.

    The repeated switching function has transform Y_block times a geometric
    sum over block starts (alternating in sign when N is odd, since each
    block then ends inverted). Integrated by the midpoint rule on a grid fine
    enough to resolve the resulting comb.
    """
    if blocks == 0 or spectrum.amplitude == 0:
        return 0.0
    big_t = block.total_s
    w, dw = _grid(spectrum, blocks * big_t)
    fb = filter_function(block, w, precise=False)
    z = np.exp(1j * w * big_t) * (-1 if block.n_pulses % 2 else 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        comb = np.abs((1 - z**blocks) / (1 - z)) ** 2
    comb = np.where(np.abs(1 - z) < 1e-12, float(blocks) ** 2, comb)
    return float(2 / np.pi * np.sum(spectrum(w) * fb * comb / w**2) * dw)


def block_rate(block: DdSequence, spectrum: NoiseSpectrum) -> float:
    """Long-time single-spin dephasing rate of a repeated block.

    Repetition concentrates the filter on harmonics w_k with w_k T = 2 pi k
    (N even) or (2k - 1) pi (N odd), so chi(t) ~ t (4/T^2) sum_k S F / w^2.
    With no pulses the weight sits at w = 0 and the rate is 2 S(0).
    """
    if spectrum.amplitude == 0:
        return 0.0
    big_t, n = block.total_s, block.n_pulses
    if n == 0:
        return float(2 * spectrum(0.0))
    top = spectrum.cutoff if spectrum.kind == "ohmic_sharp_cutoff" else 60 * spectrum.cutoff
    k = np.arange(1, int(top * big_t / (2 * np.pi)) + 3)
    w = (2 * np.pi * k - (n % 2) * np.pi) / big_t
    f = filter_function(block, w, precise=False)
    return float(4 / big_t**2 * np.sum(spectrum(w) * f / w**2))


def _z_dephase(rho: np.ndarray, chis) -> np.ndarray:
    """Element (a, b) times exp(-sum_s chi_s (m_as - m_bs)^2), independent baths."""
    m = np.array([[0.5 - b for b in so.bits(i, 2)] for i in range(4)])
    dm = m[:, None, :] - m[None, :, :]
    return rho * np.exp(-np.einsum("abs,s->ab", dm**2, np.asarray(chis, dtype=float)))


def storage_experiment(bell_state: str, scheme: str, sys: SpinSystem, spectrum: NoiseSpectrum,
                       t_grid, order: int = 1, tau_cpmg_s: float = TAU_CPMG_S,
                       tau_pi_s: float = TAU_PI_S, static_hz: float = 0.0,
                       rf_error: float = 0.0, relax_on: bool = True) -> dict:
    """Correlation of a stored two-spin state under repeated DD blocks.

    A block lasts N (2 tau_cpmg + tau_pi) and holds N pulses placed by CPMG
    or UDD (``scheme='cpmg'`` uses N = ``order``, CPMG-1 being the usual
    single-echo repetition). The state is read at the last block boundary
    before each requested time. Per spin, the bath adds its repeated-block
    chi and a quasi-static offset of rms ``static_hz`` adds sigma^2 t^2 / 2
    for free evolution only (every block refocuses it). T1 acts between
    reads; the system T2 is not applied again since the bath carries it.
    While pulsing, the recovery target averages to zero because each pulse
    inverts z magnetization. ``rf_error`` scales every flip angle.

    Returns t, correlation with the initial state, and the deviation norm
    relative to t = 0.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    rho0 = initial_deviation(bell_state)
    n_pulse = 0 if scheme == "none" else int(order)
    if scheme != "none" and n_pulse < 1:
        raise ValueError("order must be >= 1")
    block_t = max(n_pulse, 1) * (2 * tau_cpmg_s + tau_pi_s)
    block = make_sequence(scheme, n_pulse, block_t, tau_pi_s if n_pulse else 0.0)
    sigma = 2 * np.pi * static_hz
    xx = np.kron(so.pauli("x"), so.pauli("x"))
    if n_pulse and rf_error:
        r = so.rotation(2, (1, 2), np.pi * (1 + rf_error), 0.0)
        err = np.linalg.matrix_power(r, n_pulse) @ np.linalg.matrix_power(xx, n_pulse)
    t1_sys = sys.replace(t2_s=(None,) * sys.n, singlet=None)
    # coherences keep the lifetime-limited part 1/(2 T1) of their decay
    half_r1 = np.array([0.0 if v is None else 0.5 / v for v in sys.t1_s])
    flips = np.array([[np.not_equal(so.bits(a, 2), so.bits(b, 2)) for b in range(4)] for a in range(4)])
    corr, mag = [], []
    norm0 = np.linalg.norm(rho0)
    for t in t_grid:
        if n_pulse:
            blocks = int(np.floor(t / block_t + 1e-9))
            elapsed = blocks * block_t
            c = repeated_chi(block, blocks, spectrum)
        else:
            elapsed = float(t)
            c = free_chi(elapsed, spectrum) + 0.5 * (sigma * elapsed) ** 2
        rho = rho0.astype(complex)
        if n_pulse and rf_error and blocks:
            u = np.linalg.matrix_power(err, blocks)
            rho = u @ rho @ u.conj().T
        rho = _z_dephase(rho, (c, c))
        if relax_on and elapsed > 0:
            rho = free_relax(rho, t1_sys, elapsed, thermal=0.0 if n_pulse else 1.0)
            rho = rho * np.exp(-elapsed * (flips @ half_r1))
        corr.append(so.correlation(rho, rho0))
        mag.append(float(np.linalg.norm(rho) / norm0))
    return {"t_s": t_grid, "correlation": np.array(corr), "magnetization": np.array(mag),
            "block_s": block_t}


def count_above(corr, threshold: float = 0.9) -> int:
    return int(np.sum(np.asarray(corr) > threshold))
