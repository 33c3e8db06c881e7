"""Leggett-Garg strings: closed forms, the probe-target protocol, and decay.

The target precesses as H = omega Iz and the dichotomic observable is
sigma_x. Two-time correlations are read out on a probe qubit that starts in
|+> and is phase-kicked by U = 1 (x) P+ + sigma_z (x) P- at each measurement.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import spinops as so
from .hamiltonian import SpinSystem
from .relax import free_relax


@dataclass(frozen=True)
class LgiConfig:
    omega_rad_s: float
    n_measurements: int
    dt_grid: np.ndarray
    decay_tau_s: Optional[float] = None

    def __post_init__(self):
        if self.n_measurements < 3:
            raise ValueError("n_measurements must be >= 3")
        dt = np.asarray(self.dt_grid, dtype=float)
        if np.any(dt < 0):
            raise ValueError("dt must be non-negative")
        object.__setattr__(self, "dt_grid", dt)


def ttcc(omega: float, dt):
    """Two-time correlation of sigma_x on a precessing spin, cos(omega dt)."""
    return np.cos(omega * np.asarray(dt))


def k_string(n: int, omega: float, dt):
    """K_n = (n-1) cos(omega dt) - cos((n-1) omega dt)."""
    if n < 3:
        raise ValueError("n must be >= 3")
    x = omega * np.asarray(dt, dtype=float)
    return (n - 1) * np.cos(x) - np.cos((n - 1) * x)


def bounds(n: int) -> tuple[float, float, float, float]:
    """(classical_lo, classical_hi, quantum_lo, quantum_hi) for K_n."""
    if n < 3:
        raise ValueError("n must be >= 3")
    lo = -float(n) if n % 2 else -float(n - 2)
    hi = float(n - 2)
    f = lambda x: k_string(n, 1.0, x)  # noqa: E731
    grid = np.linspace(0, 2 * np.pi, 20001)
    vals = f(grid)
    ext = []
    for sign in (1, -1):
        i = int(np.argmax(sign * vals))
        h = grid[1] - grid[0]
        res = minimize_scalar(lambda x: -sign * f(x), bounds=(grid[i] - h, grid[i] + h),
                              method="bounded", options={"xatol": 1e-12})
        ext.append(float(f(res.x)))
    return lo, hi, ext[1], ext[0]


# ------------------------------------------------------- probe-target protocol

SX = so.pauli("x")
PLUS = so.projector(np.array([1, 1]) / np.sqrt(2))
PROBE_X = np.kron(SX, np.eye(2))


def _controlled(p_plus: np.ndarray, p_minus: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(2), p_plus) + np.kron(so.pauli("z"), p_minus)


def _eig_projectors(obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(obs)
    if not np.allclose(np.sort(w), [-1, 1], atol=1e-10):
        raise ValueError("observable is not dichotomic")
    plus = v[:, w > 0]
    minus = v[:, w < 0]
    return plus @ plus.conj().T, minus @ minus.conj().T


def heisenberg_sx(omega: float, t: float) -> np.ndarray:
    u = so.propagator(omega * so.spin("z"), t)
    return u.conj().T @ SX @ u


def _check_state(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2) or abs(np.trace(rho) - 1) > 1e-10 or not so.is_hermitian(rho, 1e-10) \
            or np.linalg.eigvalsh(rho).min() < -1e-10:
        raise ValueError("rho_target must be a valid one-spin density matrix")
    return rho


def moussa_correlation(rho_target: np.ndarray, omega: float, t_i: float, t_j: float) -> float:
    """<sigma_x> of the probe after controlled kicks at t_i then t_j."""
    rho_t = _check_state(rho_target)
    rho = np.kron(PLUS, rho_t)
    for t in (t_i, t_j):
        u = _controlled(*_eig_projectors(heisenberg_sx(omega, t)))
        rho = u @ rho @ u.conj().T
    return float(np.real(np.trace(PROBE_X @ rho)))


def heisenberg_correlation(rho_target: np.ndarray, omega: float, t_i: float, t_j: float) -> float:
    """Re tr[sigma_x(t_i) sigma_x(t_j) rho]."""
    a, b = heisenberg_sx(omega, t_i), heisenberg_sx(omega, t_j)
    return float(np.real(np.trace(a @ b @ rho_target)))


def _target_only(sys: SpinSystem) -> SpinSystem:
    """Probe (spin 1) held free of relaxation; only the target relaxes."""
    return sys.replace(t1_s=(None, sys.t1_s[1]), t2_s=(None, sys.t2_s[1]), singlet=None)


def relaxed_correlation(omega: float, t_i: float, t_j: float, sys: Optional[SpinSystem],
                        rho_target: Optional[np.ndarray] = None) -> float:
    """Probe-target run in the Schroedinger picture with target relaxation.

    The joint state precesses under omega Iz on the target (coupling
    refocused), relaxing between kicks; each kick uses the projectors of the
    fixed sigma_x. Without relaxation this equals moussa_correlation.
    """
    rho_t = np.eye(2) / 2 if rho_target is None else _check_state(rho_target)
    rho = np.kron(PLUS, rho_t)
    h = omega * so.iz(2, 2)
    kick = _controlled(*_eig_projectors(SX))
    relax_sys = None if sys is None else _target_only(sys)
    now = 0.0
    for t in (t_i, t_j):
        step = t - now
        if step < 0:
            raise ValueError("measurement times must be ordered")
        u = so.propagator(h, step)
        rho = u @ rho @ u.conj().T
        if relax_sys is not None and step > 0:
            rho = free_relax(rho, relax_sys, step, thermal=0.0)
        rho = kick @ rho @ kick.conj().T
        now = t
    return float(np.real(np.trace(PROBE_X @ rho)))


def k_string_sim(n: int, omega: float, dt, sys: Optional[SpinSystem] = None) -> np.ndarray:
    """K_n from simulated correlations C12 + ... + C(n-1)n - C1n."""
    out = []
    for d in np.atleast_1d(np.asarray(dt, dtype=float)):
        times = [i * d for i in range(n)]
        k = sum(relaxed_correlation(omega, times[i], times[i + 1], sys) for i in range(n - 1))
        k -= relaxed_correlation(omega, times[0], times[-1], sys)
        out.append(k)
    return np.array(out)


def correlations_table(n: int, omega: float, dt, sys: Optional[SpinSystem] = None) -> dict:
    """Columns C_i(i+1) for adjacent measurements, C_1n, and K_n per dt."""
    dt = np.asarray(dt, dtype=float)
    cols = {f"C{i + 1}{i + 2}": [] for i in range(n - 1)}
    cols[f"C1{n}"] = []
    for d in dt:
        times = [i * d for i in range(n)]
        for i in range(n - 1):
            cols[f"C{i + 1}{i + 2}"].append(relaxed_correlation(omega, times[i], times[i + 1], sys))
        cols[f"C1{n}"].append(relaxed_correlation(omega, times[0], times[-1], sys))
    out = {"dt_s": dt, **{k: np.array(v) for k, v in cols.items()}}
    out[f"K{n}"] = sum(out[f"C{i + 1}{i + 2}"] for i in range(n - 1)) - out[f"C1{n}"]
    return out


def fit_string_decay(n: int, omega: float, dt, k_values) -> float:
    """Time constant tau of the fit K(dt) ~ k_string(dt) exp(-dt / tau)."""
    dt = np.asarray(dt, dtype=float)
    ideal = k_string(n, omega, dt)
    k_values = np.asarray(k_values, dtype=float)

    def cost(log_tau):
        return float(np.sum((k_values - ideal * np.exp(-dt / np.exp(log_tau))) ** 2))

    span = max(float(dt.max()), 1e-9)
    res = minimize_scalar(cost, bounds=(np.log(span * 1e-3), np.log(span * 1e3)), method="bounded",
                          options={"xatol": 1e-10})
    return float(np.exp(res.x))


def tune_target_t2(n: int, omega: float, dt, tau_s: float, sys: SpinSystem) -> SpinSystem:
    """Return ``sys`` with the target T2 (and T1 if needed) set so the fitted
    string decay constant equals ``tau_s``."""

    def with_t2(t2):
        t1 = sys.t1_s[1]
        t1 = t2 if t1 is None or t1 < t2 else t1
        return sys.replace(t1_s=(sys.t1_s[0], t1), t2_s=(sys.t2_s[0], t2))

    def gap(log_t2):
        s = with_t2(float(np.exp(log_t2)))
        return fit_string_decay(n, omega, dt, k_string_sim(n, omega, dt, s)) - tau_s

    root = brentq(gap, np.log(tau_s * 0.2), np.log(tau_s * 5), xtol=1e-8)
    return with_t2(float(np.exp(root)))


def last_violation(dt, k_values, bound: float) -> Optional[float]:
    """Largest dt at which K still exceeds the classical bound (None if never)."""
    dt = np.asarray(dt, dtype=float)
    above = np.nonzero(np.asarray(k_values) > bound + 1e-12)[0]
    return float(dt[above[-1]]) if above.size else None


def classical_crossing(dt, k_values, bound: float) -> Optional[float]:
    """dt at which the string enters the classical region for good: the first
    grid point after the last violation."""
    dt = np.asarray(dt, dtype=float)
    above = np.nonzero(np.asarray(k_values) > bound + 1e-12)[0]
    if not above.size or above[-1] + 1 >= dt.size:
        return None
    return float(dt[above[-1] + 1])


def refined_max(f, x_grid) -> tuple[float, float]:
    """Maximum of f sampled on ``x_grid``, polished by a bounded search
    between the neighbours of the best grid point. Returns (x, f(x))."""
    x = np.asarray(x_grid, dtype=float)
    y = np.array([f(v) for v in x])
    i = int(np.argmax(y))
    lo, hi = x[max(i - 1, 0)], x[min(i + 1, x.size - 1)]
    if hi <= lo:
        return float(x[i]), float(y[i])
    res = minimize_scalar(lambda v: -f(v), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    if -res.fun >= y[i]:
        return float(res.x), float(-res.fun)
    return float(x[i]), float(y[i])
