"""Non-unitary channels: element-wise T1/T2 relaxation and the spin-lock channel.

Deviation operators are expressed in thermal units: the equilibrium
deviation is sum_k Iz^k. Functions accept either a deviation ndarray or a
:class:`~spinlab.spinops.State`; a State is relaxed in units of its ``eps``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import spinops as so
from .hamiltonian import SpinSystem


def _rate(values) -> np.ndarray:
    return np.array([0.0 if v is None else 1.0 / v for v in values])


@lru_cache(maxsize=16)
def _tables(n: int):
    idx = np.arange(2**n)
    bitmat = np.array([so.bits(i, n) for i in idx])  # (N, n)
    diff = bitmat[:, None, :] ^ bitmat[None, :, :]  # (N, N, n)
    # Walsh characters: w_S(a) = prod_{k in S} (-1)^bit_k(a), S encoded as a bit mask
    subsets = np.array([so.bits(s, n) for s in idx])  # (N, n) membership
    walsh = (-1.0) ** (bitmat @ subsets.T)  # (N basis, N subsets)
    return bitmat, diff, subsets, walsh


def _dispatch(state, fn):
    if isinstance(state, so.State):
        dev = fn(state.deviation / state.eps, 1.0)
        return so.State.from_deviation(dev, state.eps)
    return fn(np.asarray(state, dtype=complex), None)


def free_relax(state, sys: SpinSystem, t_s: float, thermal: float = 1.0):
    """Relax for ``t_s`` seconds under per-spin T1/T2.

    Coherence (a, b) decays at the sum of 1/T2 over the spins whose bits
    differ. The diagonal is split into z-orders: each Iz^k relaxes toward
    ``thermal``*Iz^k with 1/T1_k, products of two or more Iz decay to zero at
    the sum of their 1/T1, and the identity part is untouched. Spins with no
    constant given do not relax. ``thermal=0`` relaxes a full density matrix
    toward the maximally mixed state.
    """
    if t_s < 0:
        raise ValueError("t_s must be non-negative")

    def run(rho, scale):
        th = thermal if scale is None else scale
        n = sys.n
        _, diff, subsets, walsh = _tables(n)
        r1, r2 = _rate(sys.t1_s), _rate(sys.t2_s)
        out = rho * np.exp(-t_s * (diff @ r2))
        d = np.real(np.diag(rho))
        c = walsh.T @ d / 2**n
        order = subsets.sum(axis=1)
        target = np.zeros_like(c)
        single = order == 1
        # Iz^k = w_{k}/2, so the thermal coefficient of a single-spin character is 1/2
        target[single] = th / 2
        decay = np.exp(-t_s * (subsets @ r1))
        decay[order == 0] = 1.0
        c = target + (c - target) * decay
        np.fill_diagonal(out, walsh @ c)
        return out

    return _dispatch(state, run)


def _pair_channel(t_s: float, p) -> tuple[np.ndarray, np.ndarray]:
    """Linear map on a 4x4 pair block in the S0,T+,T0,T- basis.

    Returns (K, drive) with block' = K(block) as a (4,4,4,4) tensor contraction
    and drive the trace-free steady-state term reached with the triplets.
    """
    es = np.exp(-t_s / p.ts_s)
    et = np.exp(-t_s / p.t_triplet_s)
    ec = np.exp(-t_s / p.t_coh_s)
    # populations: total fixed, singlet imbalance u = pS - mean(T) decays with
    # T_S, deviations within the triplet manifold decay with t_triplet
    pop = np.zeros((4, 4))
    tot = np.array([1, 1, 1, 1.0])
    u = np.array([1, -1 / 3, -1 / 3, -1 / 3])
    for j in range(4):
        e = np.zeros(4)
        e[j] = 1
        t, uu = tot @ e, u @ e
        m = (t - uu * es) / 4
        ps = (t + 3 * uu * es) / 4
        dev_t = (e[1:] - e[1:].mean()) * et
        pop[:, j] = np.concatenate([[ps], m + dev_t])
    k = np.zeros((4, 4, 4, 4))
    for a in range(4):
        for b in range(4):
            if a == b:
                k[a, a][np.diag_indices(4)] = pop[a]
            else:
                k[a, b, a, b] = ec
    return k, 1 - et


def spin_lock(state, sys: SpinSystem, t_s: float, pairs=None, thermal: float = 1.0):
    """Spin-locked evolution of the locked pairs for ``t_s`` seconds.

    In the singlet-triplet basis of each pair the singlet imbalance decays
    with T_S, the triplet populations equilibrate with t_triplet toward a
    small steady magnetization, and every coherence involving the pair decays
    with t_coh. Other spins are untouched.
    """
    if sys.singlet is None:
        raise ValueError("spin_lock needs singlet relaxation parameters")
    if t_s < 0:
        raise ValueError("t_s must be non-negative")
    params = sys.singlet
    pairs = params.pairs if pairs is None else tuple(tuple(p) for p in pairs)

    def run(rho, scale):
        th = thermal if scale is None else scale
        n = sys.n
        for pair in pairs:
            rho = _lock_pair(rho, n, pair, t_s, params, th)
        return rho

    return _dispatch(state, run)


def _lock_pair(rho, n, pair, t_s, params, thermal):
    a, b = pair
    rest = [k for k in range(1, n + 1) if k not in pair]
    order = [a, b] + rest
    perm = [k - 1 for k in order]
    m = 2 ** len(rest)
    t = rho.reshape((2,) * (2 * n))
    t = t.transpose(perm + [p + n for p in perm]).reshape(4, m, 4, m)
    t = t.transpose(0, 2, 1, 3)  # (4,4,m,m)
    st = so.ST_BASIS
    blk = np.einsum("ia,ijxy,jb->abxy", st.conj(), t, st)
    k, drive = _pair_channel(t_s, params)
    blk = np.einsum("abcd,cdxy->abxy", k, blk)
    # steady triplet magnetization f (Iz^a + Iz^b) = f (|T+><T+| - |T-><T-|)
    steady = np.zeros((4, 4))
    steady[1, 1], steady[3, 3] = 1, -1
    blk = blk + (params.steady_fraction * thermal * drive * steady)[:, :, None, None] * np.eye(m)
    t = np.einsum("ia,abxy,jb->ijxy", st, blk, st.conj())
    t = t.transpose(0, 2, 1, 3).reshape((2,) * (2 * n))
    inv = np.argsort(perm)
    t = t.transpose(list(inv) + [p + n for p in inv])
    return t.reshape(2**n, 2**n)


def singlet_order(n: int = 2, pair=(1, 2)) -> np.ndarray:
    """Singlet spin order rho_s = -I^a.I^b."""
    return -so.spin_dot(n, *pair)


def singlet_decay_curve(sys: SpinSystem, t_grid, initial=None, pair=(1, 2)) -> dict:
    """Correlation with rho_s and singlet order magnitude versus lock time.

    The magnitude is the projection onto rho_s normalized to 1 at t = 0,
    which is what the antiphase signal after the detection block reports.
    """
    n = sys.n
    rho_s = singlet_order(n, pair)
    if initial is None:
        from . import sequence as sq

        initial = sq.apply(sq.singlet_prep(sys, pair), sys, so.total(n, "z"))
    ref = np.real(np.trace(initial @ rho_s))
    corr, mag = [], []
    for t in np.asarray(t_grid, dtype=float):
        rho = spin_lock(initial, sys, t)
        corr.append(so.correlation(rho, rho_s))
        mag.append(np.real(np.trace(rho @ rho_s)) / ref)
    return {"t_s": np.asarray(t_grid, dtype=float), "correlation": np.array(corr),
            "magnitude": np.array(mag)}


def fit_decay_constant(t, y) -> float:
    """Single-exponential time constant by a log-linear least-squares fit."""
    t, y = np.asarray(t, float), np.asarray(y, float)
    keep = y > 0
    slope, _ = np.polyfit(t[keep], np.log(y[keep]), 1)
    return float(-1 / slope) if slope < 0 else float("inf")
