"""Pseudopure-state preparation through long-lived singlets.

Registers are built pairwise: singlets on (1,2), (3,4), ... are correlated
by CNOT and pseudo-Hadamard gates, spin-locked, and mapped onto |01> by the
singlet-to-PPS propagator on each pair.

Two ways to run a circuit:

ideal
    Spin-locks act as a singlet filter: only the singlet block of each
    locked pair survives, everything else is discarded into the identity
    background. This is the branch bookkeeping of the circuit derivation and
    yields the exact PPS plus the fraction of signal retained.
relaxed
    Spin-locks use the singlet relaxation channel of the system and the
    run starts from thermal equilibrium.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import relax
from . import sequence as sq
from . import spinops as so
from .hamiltonian import SpinSystem

PI = np.pi
LOCK_S = {2: 12.4, 3: 6.3}
LOCK_S_LARGE = 4.5


def lock_duration(n: int) -> float:
    return LOCK_S.get(n, LOCK_S_LARGE)


@dataclass(frozen=True)
class PpsReport:
    target_label: str
    correlation: float
    diagonal_correlation: float
    epsilon_retained: float
    mode: str = "ideal"

    def __post_init__(self):
        for v in (self.correlation, self.diagonal_correlation):
            if not -1 - 1e-12 <= v <= 1 + 1e-12:
                raise ValueError("correlations must lie in [-1, 1]")
        if not -1e-12 <= self.epsilon_retained <= 1 + 1e-12:
            raise ValueError("epsilon_retained must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class CircuitRun:
    """Outcome of running a PPS circuit.

    ``deviation`` is the traceless final state. ``branch_trace`` holds the
    trace of the surviving branch after every singlet filter (ideal mode
    only), so their ratio tracks discarded branches.
    """

    deviation: np.ndarray
    initial: np.ndarray
    mode: str
    branch_trace: list = field(default_factory=list)
    target_label: str = ""


def _pairs(n: int) -> list[tuple[int, int]]:
    return [(a, a + 1) for a in range(1, n, 2)]


def target_label(n: int, refocus: bool = False) -> str:
    """|0101...0> for the pairwise construction; an odd register ends in 0."""
    label = "01" * (n // 2) + "0" * (n % 2)
    if refocus and n >= 4:
        label = "10" + label[2:]
    return label


def _lock(t_s: float, pairs) -> sq.SpinLock:
    return sq.SpinLock(t_s, pairs=tuple(tuple(p) for p in pairs))


def general_register_circuit(n: int, sys: Optional[SpinSystem] = None, lock_s: Optional[float] = None,
                             refocus: bool = False, pulse_cnot: bool = False) -> sq.Sequence:
    """Pairwise singlet circuit for an n-qubit register.

    Prepare S0 on (1,2) and lock it. For each further pair (a, a+1): NOT on
    a-1 controlled by a, h on a, NOT on a+1 when a is |0>, then lock every
    pair built so far. An odd register ends with NOT on n-1 controlled by n
    and a lock of all pairs that leaves qubit n alone. Each pair is then
    converted to |01> and a gradient crushes the remaining coherences.
    ``refocus`` adds the pi pulse on qubits 1 and 2 that turns the first
    pair into |10>. ``lock_s`` defaults by register size (lock_duration).
    """
    if n < 2:
        raise ValueError("a register needs at least 2 qubits")
    if sys is not None and sys.n != n:
        raise ValueError(f"system has {sys.n} spins, circuit needs {n}")
    pairs = _pairs(n)
    lock_s = lock_duration(n) if lock_s is None else lock_s
    prep_sys = sys if sys is not None else SpinSystem(n, (0.0,) * n, np.zeros((n, n)))
    els = list(sq.singlet_prep(prep_sys, (1, 2), mode=None if sys is not None and n == 2 else "ideal"))
    els.append(_lock(lock_s, [(1, 2)]))

    def cnot(c, t, pol=1):
        return list(sq.cnot(n, c, t, pol, sys=sys, pulses=pulse_cnot))

    for i, (a, b) in enumerate(pairs[1:], start=2):
        els += cnot(a, a - 1)
        els += list(sq.pseudo_hadamard(n, a))
        els += cnot(a, b, 0)
        els.append(_lock(lock_s, pairs[:i]))
    if n % 2 and n > 1:
        els += cnot(n, n - 1)
        els.append(_lock(lock_s, pairs))
    for a, b in pairs:
        els += list(sq.singlet_to_pps(prep_sys, (a, b)))
    if refocus and n >= 4:
        els.append(sq.Pulse((1, 2), PI, 0.0))
    els.append(sq.Gradient())
    return sq.Sequence(tuple(els), f"pps{n}")


def pps2_circuit(sys: Optional[SpinSystem] = None, lock_s: Optional[float] = None) -> sq.Sequence:
    """Singlet preparation, spin-lock, singlet-to-|01>, gradient."""
    if sys is not None and sys.singlet is None:
        raise ValueError("pps2_circuit needs singlet relaxation parameters")
    return general_register_circuit(2, sys, lock_s)


def pps3_circuit(sys: Optional[SpinSystem] = None, lock_s: Optional[float] = None) -> sq.Sequence:
    """Singlet on (1,2), NOT on 2 controlled by 3, lock (1,2), |01>, gradient."""
    return general_register_circuit(3, sys, lock_s)


def pps4_circuit(sys: Optional[SpinSystem] = None, lock_s: Optional[float] = None,
                 refocus: bool = False) -> sq.Sequence:
    """Singlet (1,2), NOT on 2 controlled by 3, h(3), NOT on 4 when 3 is |0>,
    lock both pairs, |01> on each pair, gradient."""
    return general_register_circuit(4, sys, lock_s, refocus=refocus)


# ------------------------------------------------------------------ running

def singlet_filter(rho: np.ndarray, n: int, pairs) -> np.ndarray:
    """Keep only the singlet block of every pair: P rho P."""
    p = np.eye(2**n, dtype=complex)
    for a, b in pairs:
        p = p @ embed_pair(n, (a, b), so.projector(so.SINGLET))
    return p @ rho @ p


def embed_pair(n: int, pair, op4: np.ndarray) -> np.ndarray:
    """Place a 4x4 operator on qubits ``pair`` of an n-qubit register."""
    a, b = pair
    rest = [k for k in range(1, n + 1) if k not in pair]
    full = np.kron(op4, np.eye(2 ** len(rest)))
    order = [a, b] + rest
    perm = [k - 1 for k in order]
    inv = list(np.argsort(perm))
    t = full.reshape((2,) * (2 * n)).transpose(inv + [p + n for p in inv])
    return t.reshape(2**n, 2**n)


def saturate(n: int, spins) -> sq.Sequence:
    """90_x on ``spins`` then a gradient: their z magnetization is removed."""
    spins = tuple(spins)
    if not spins:
        return sq.Sequence((sq.Barrier("saturate"),), "saturate")
    return sq.Sequence((sq.Pulse(spins, PI / 2, 0.0), sq.Gradient()), "saturate")


def run_circuit(seq: sq.Sequence, sys: Optional[SpinSystem], mode: str = "ideal",
                label: str = "") -> CircuitRun:
    """Run a register circuit from equilibrium.

    Spins outside pair (1,2) are saturated first, so they enter as the
    evenly mixed qubits the construction assumes. ``mode`` selects the
    singlet filter ('ideal') or the relaxation channel ('relaxed').
    """
    if mode not in ("ideal", "relaxed"):
        raise ValueError("mode must be 'ideal' or 'relaxed'")
    n = seq_spins(seq, sys)
    if mode == "relaxed" and (sys is None or sys.singlet is None):
        raise ValueError("relaxed mode needs a system with singlet parameters")
    run_sys = sys if sys is not None else SpinSystem(n, (0.0,) * n, np.zeros((n, n)))
    initial = so.total(n, "z")
    rho = sq.apply(saturate(n, range(3, n + 1)), run_sys, initial)
    traces = []
    for el in seq:
        if isinstance(el, sq.SpinLock):
            pairs = el.pairs or [(1, 2)]
            if mode == "ideal":
                rho = singlet_filter(rho, n, pairs)
                traces.append(float(np.real(np.trace(rho))))
            else:
                rho = relax.spin_lock(rho, run_sys, el.t_s, pairs)
        else:
            rho = sq.apply(sq.Sequence((el,)), run_sys, rho)
    return CircuitRun(so.traceless(rho), initial, mode, traces, label)


def seq_spins(seq: sq.Sequence, sys: Optional[SpinSystem]) -> int:
    if sys is not None:
        return sys.n
    return int(seq.name[3:]) if seq.name.startswith("pps") else 2


def epsilon_ledger(run: CircuitRun) -> float:
    """Fraction of signal carried to the output.

    Ideal runs: surviving branch weight at the last singlet filter relative
    to the first, i.e. the share of branches not discarded. Relaxed runs:
    norm of the final deviation over the norm of the equilibrium deviation.
    """
    if run.mode == "ideal":
        if not run.branch_trace or run.branch_trace[0] == 0:
            return 0.0
        return run.branch_trace[-1] / run.branch_trace[0]
    return float(np.linalg.norm(run.deviation) / np.linalg.norm(run.initial))


def report(run: CircuitRun, label: Optional[str] = None) -> PpsReport:
    label = label or run.target_label
    target = so.pps_deviation(label)
    return PpsReport(label, so.correlation(run.deviation, target),
                     so.diagonal_correlation(run.deviation, target),
                     min(max(epsilon_ledger(run), 0.0), 1.0), run.mode)


def prepare(n: int, sys: Optional[SpinSystem] = None, mode: str = "ideal", lock_s: Optional[float] = None,
            refocus: bool = False, pulse_cnot: bool = False) -> tuple[CircuitRun, PpsReport]:
    seq = general_register_circuit(n, sys, lock_s, refocus, pulse_cnot)
    run = run_circuit(seq, sys, mode, target_label(n, refocus))
    return run, report(run)


# --------------------------------------------------------------- utilities

def not_gate(n: int, k: int) -> np.ndarray:
    return so.rotation(n, (k,), PI, 0.0)


def flip_label(label: str, k: int) -> str:
    """The PPS label after a NOT on qubit k."""
    bits = list(label)
    bits[k - 1] = "1" if bits[k - 1] == "0" else "0"
    return "".join(bits)


def is_pps_shape(dev: np.ndarray, tol: float = 1e-9) -> bool:
    """Diagonal with one population above all others, the rest equal."""
    dev = so.traceless(dev)
    if np.max(np.abs(dev - np.diag(np.diag(dev)))) > tol:
        return False
    d = np.sort(np.real(np.diag(dev)))
    return bool(d[-1] - d[-2] > tol and np.ptp(d[:-1]) < tol)


def spatial_averaging_sequence(sys: SpinSystem) -> sq.Sequence:
    """(pi/3)_x on spin 2, gradient, (pi/4)_x on spin 1, 1/(2J) coupling
    evolution, (pi/4)_{-y} on spin 1, gradient."""
    tau = 1 / (2 * sys.j(1, 2))
    return sq.Sequence((sq.Pulse((2,), PI / 3, 0.0), sq.Gradient(), sq.Pulse((1,), PI / 4, 0.0),
                        sq.Delay(tau, shifts_active=False), sq.Pulse((1,), PI / 4, -PI / 2),
                        sq.Gradient()), "spatial_averaging")


def spatial_averaging_check(sys: SpinSystem) -> np.ndarray:
    """Final deviation of the spatial-averaging route from Iz1 + Iz2.

    Ends at (Iz1 + Iz2 + 2 Iz1 Iz2) / 2, the |00> pseudopure deviation.
    """
    if sys.n != 2:
        raise ValueError("spatial averaging is defined for two spins")
    return sq.apply(spatial_averaging_sequence(sys), sys, so.total(2, "z"))


def temporal_averaging_demo(n: int = 2) -> np.ndarray:
    """Sum of the equilibrium populations over cyclic permutations of all
    levels except |0...0>: the |0...0> pseudopure deviation."""
    d = np.real(np.diag(so.total(n, "z")))
    rest = d[1:]
    acc = np.zeros_like(d)
    for s in range(rest.size):
        acc += np.concatenate([[d[0]], np.roll(rest, s)])
    return so.traceless(np.diag(acc / rest.size))
