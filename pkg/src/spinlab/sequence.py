"""Symbolic pulse programs compiled to propagators or applied as channels.

Sequences list elements in time order. Compiled propagators follow the
operator convention where the rightmost factor acts first, so
``compile_unitary([A, B])`` returns U_B @ U_A.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import relax
from . import spinops as so
from .hamiltonian import SpinSystem, weak_coupling

PI = np.pi


@dataclass(frozen=True)
class Pulse:
    """Hard pulse of ``angle`` about the in-plane axis at ``phase`` (radians)."""

    targets: tuple[int, ...]
    angle: float
    phase: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.angle):
            raise ValueError("pulse angle must be finite")
        object.__setattr__(self, "targets", tuple(int(k) for k in self.targets))


@dataclass(frozen=True)
class Delay:
    """Free evolution under the weak-coupling Hamiltonian.

    Shift or coupling evolution can be switched off to stand in for an
    idealized refocusing block.
    """

    t_s: float
    couplings_active: bool = True
    shifts_active: bool = True

    def __post_init__(self):
        if self.t_s < 0:
            raise ValueError("delay must be non-negative")


@dataclass(frozen=True)
class ZRotation:
    """exp(-i sum_k angle_k Iz^k) with per-spin signed angles."""

    angles: tuple[tuple[int, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "angles", tuple((int(k), float(a)) for k, a in self.angles))


@dataclass(frozen=True)
class ZZRotation:
    """exp(-i angle 2 Iz^a Iz^b): the J evolution of one pair in isolation."""

    pair: tuple[int, int]
    angle: float


@dataclass(frozen=True)
class Gate:
    """Explicit unitary on the full register."""

    matrix: np.ndarray = field(compare=False)
    label: str = "gate"


@dataclass(frozen=True)
class Gradient:
    """Crusher keeping only coherence order zero."""


@dataclass(frozen=True)
class SpinLock:
    t_s: float
    amp_hz: float = 2000.0
    offset_hz: float = 0.0
    pairs: Optional[tuple[tuple[int, int], ...]] = None

    def __post_init__(self):
        if self.t_s < 0:
            raise ValueError("spin-lock duration must be non-negative")


@dataclass(frozen=True)
class Barrier:
    label: str = ""


Element = Union[Pulse, Delay, ZRotation, ZZRotation, Gate, Gradient, SpinLock, Barrier]
UNITARY_TYPES = (Pulse, Delay, ZRotation, ZZRotation, Gate, Barrier)


@dataclass(frozen=True)
class Sequence:
    elements: tuple
    name: str = ""

    def __post_init__(self):
        els = tuple(self.elements)
        if not els:
            raise ValueError("sequence must not be empty")
        object.__setattr__(self, "elements", els)

    def __add__(self, other: "Sequence") -> "Sequence":
        name = "+".join(x for x in (self.name, other.name) if x)
        return Sequence(self.elements + other.elements, name)

    def __iter__(self):
        return iter(self.elements)

    def __len__(self):
        return len(self.elements)

    @property
    def is_unitary(self) -> bool:
        return all(isinstance(e, UNITARY_TYPES) for e in self.elements)


def element_unitary(el, sys: SpinSystem, rf_error: float = 0.0) -> np.ndarray:
    n = sys.n
    if isinstance(el, Pulse):
        return so.rotation(n, el.targets, el.angle * (1 + rf_error), el.phase)
    if isinstance(el, Delay):
        h = weak_coupling(sys, shifts=el.shifts_active, couplings=el.couplings_active)
        return np.diag(np.exp(-1j * np.diag(h) * el.t_s))
    if isinstance(el, ZRotation):
        return so.z_rotation(n, el.angles)
    if isinstance(el, ZZRotation):
        a, b = el.pair
        zz = 2 * np.diag(so.iz(n, a)) * np.diag(so.iz(n, b))
        return np.diag(np.exp(-1j * el.angle * zz))
    if isinstance(el, Gate):
        m = np.asarray(el.matrix, dtype=complex)
        if m.shape != (sys.dim, sys.dim):
            raise ValueError(f"gate {el.label} has shape {m.shape}, expected {sys.dim}")
        return m
    if isinstance(el, Barrier):
        return np.eye(sys.dim, dtype=complex)
    raise TypeError(f"{type(el).__name__} is not a unitary element")


def compile_unitary(seq, sys: SpinSystem, rf_error: float = 0.0) -> np.ndarray:
    """Ordered product of element propagators, the last element leftmost."""
    u = np.eye(sys.dim, dtype=complex)
    for el in seq:
        if not isinstance(el, UNITARY_TYPES):
            raise TypeError(f"{type(el).__name__} cannot be compiled to a unitary")
        u = element_unitary(el, sys, rf_error) @ u
    return u


def coherence_order_mask(n: int) -> np.ndarray:
    """Coherence order p = m_a - m_b of every density-matrix element."""
    m = np.array([sum(0.5 - b for b in so.bits(i, n)) for i in range(2**n)])
    return np.rint(m[:, None] - m[None, :]).astype(int)


def gradient(rho: np.ndarray) -> np.ndarray:
    n = so.n_spins(rho.shape[0])
    return np.where(coherence_order_mask(n) == 0, rho, 0)


def apply(seq, sys: SpinSystem, state, relax_on: bool = False, rf_error: float = 0.0):
    """Run ``seq`` element by element on a deviation array or a State.

    With ``relax_on`` every Delay is followed by free relaxation for its
    duration. Spin-locks always use the spin-lock channel.
    """
    is_state = isinstance(state, so.State)
    rho = state.deviation / state.eps if is_state else np.asarray(state, dtype=complex)
    for el in seq:
        if isinstance(el, Gradient):
            rho = gradient(rho)
        elif isinstance(el, SpinLock):
            rho = relax.spin_lock(rho, sys, el.t_s, el.pairs)
        else:
            u = element_unitary(el, sys, rf_error)
            rho = u @ rho @ u.conj().T
            if relax_on and isinstance(el, Delay) and el.t_s > 0:
                rho = relax.free_relax(rho, sys, el.t_s)
    if is_state:
        return so.State.from_deviation(rho, state.eps)
    return rho


# ---------------------------------------------------------------- file format

def _params(el) -> dict:
    if isinstance(el, Pulse):
        return {"targets": list(el.targets), "angle_deg": float(np.degrees(el.angle)),
                "phase_deg": float(np.degrees(el.phase))}
    if isinstance(el, Delay):
        return {"t_s": el.t_s, "couplings_active": el.couplings_active,
                "shifts_active": el.shifts_active}
    if isinstance(el, ZRotation):
        return {"angles_deg": [[k, float(np.degrees(a))] for k, a in el.angles]}
    if isinstance(el, ZZRotation):
        return {"pair": list(el.pair), "angle_deg": float(np.degrees(el.angle))}
    if isinstance(el, Gate):
        m = np.asarray(el.matrix)
        return {"label": el.label, "real": m.real.tolist(), "imag": m.imag.tolist()}
    if isinstance(el, SpinLock):
        d = {"t_s": el.t_s, "amp_hz": el.amp_hz, "offset_hz": el.offset_hz}
        if el.pairs is not None:
            d["pairs"] = [list(p) for p in el.pairs]
        return d
    if isinstance(el, Barrier):
        return {"label": el.label}
    return {}


_TYPES = {"pulse": Pulse, "delay": Delay, "zrotation": ZRotation, "zzrotation": ZZRotation,
          "gate": Gate, "gradient": Gradient, "spinlock": SpinLock, "barrier": Barrier}
_NAMES = {v: k for k, v in _TYPES.items()}


def sequence_to_list(seq: Sequence) -> list[dict]:
    return [{"type": _NAMES[type(el)], "params": _params(el)} for el in seq]


def element_from_dict(d: dict):
    kind = d.get("type")
    p = dict(d.get("params", {}))
    if kind not in _TYPES:
        raise ValueError(f"unknown element type {kind!r}")
    if kind == "pulse":
        return Pulse(tuple(p["targets"]), np.radians(p["angle_deg"]), np.radians(p.get("phase_deg", 0.0)))
    if kind == "delay":
        return Delay(float(p["t_s"]), bool(p.get("couplings_active", True)),
                     bool(p.get("shifts_active", True)))
    if kind == "zrotation":
        return ZRotation(tuple((int(k), np.radians(a)) for k, a in p["angles_deg"]))
    if kind == "zzrotation":
        return ZZRotation(tuple(p["pair"]), np.radians(p["angle_deg"]))
    if kind == "gate":
        return Gate(np.array(p["real"]) + 1j * np.array(p["imag"]), p.get("label", "gate"))
    if kind == "gradient":
        return Gradient()
    if kind == "spinlock":
        pairs = p.get("pairs")
        return SpinLock(float(p["t_s"]), float(p.get("amp_hz", 2000.0)), float(p.get("offset_hz", 0.0)),
                        None if pairs is None else tuple(tuple(x) for x in pairs))
    return Barrier(p.get("label", ""))


def load_sequence(path: str | Path, name: str = "") -> Sequence:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list):
        raise ValueError("sequence file must contain a list of elements")
    return Sequence(tuple(element_from_dict(d) for d in data), name or Path(path).stem)


# ------------------------------------------------------------ named sequences

def _shift_delay(sys: SpinSystem, pair, angle: float) -> Delay:
    """Shift-only delay producing exp(-i angle (Iz^a - Iz^b)) on the pair.

    The pair's shift difference sets the duration; a negative difference is
    handled by waiting the complementary fraction of a 2pi period.
    """
    dnu = sys.delta_nu(*pair)
    if dnu == 0:
        raise ValueError("pair has no shift difference")
    period = 2 / abs(dnu)
    return Delay(float((angle / (PI * dnu)) % period), couplings_active=False)


def _coupling_delay(sys: SpinSystem, pair, angle: float) -> Delay:
    """Coupling-only delay giving exp(-i angle 2 Iz^a Iz^b)."""
    j = sys.j(*pair)
    if j == 0:
        raise ValueError("pair is not coupled")
    period = 2 / abs(j)
    return Delay(float((angle / (PI * j)) % period), shifts_active=False)


def singlet_prep(sys: SpinSystem, pair=(1, 2), mode: Optional[str] = None) -> Sequence:
    """Convert Iz^a + Iz^b into |S0><S0| - |T0><T0| on ``pair``.

    90_x, J evolution to 2Iz^aIz^b antiphase, shift evolution by pi/2 in
    (Iz^a - Iz^b), 90_y, shift evolution by pi/4. ``mode`` is 'delays' for
    physical free-evolution periods (two-spin systems), 'echo' to build the
    J step from an explicit pair of pi pulses, or 'ideal' for pair-local
    rotations that leave other spins alone.
    """
    mode = mode or ("delays" if sys.n == 2 else "ideal")
    a, b = pair
    tg = (a, b)
    if mode == "ideal":
        els = [Pulse(tg, PI / 2, 0.0), ZZRotation(tg, PI / 2),
               ZRotation(((a, PI / 2), (b, -PI / 2))), Pulse(tg, PI / 2, PI / 2),
               ZRotation(((a, PI / 4), (b, -PI / 4)))]
    else:
        if mode == "echo":
            tau = 1 / (4 * sys.j(a, b))
            j_step = [Delay(tau), Pulse(tg, PI, 0.0), Delay(tau), Pulse(tg, PI, PI)]
        elif mode == "delays":
            j_step = [_coupling_delay(sys, tg, PI / 2)]
        else:
            raise ValueError(f"unknown mode {mode!r}")
        els = ([Pulse(tg, PI / 2, 0.0)] + j_step
               + [_shift_delay(sys, tg, PI / 2), Pulse(tg, PI / 2, PI / 2), _shift_delay(sys, tg, PI / 4)])
    return Sequence(tuple(els), "singlet_prep")


def singlet_detect(sys: SpinSystem, pair=(1, 2)) -> Sequence:
    """Shift evolution by -pi/4 then 90_x: singlet order to antiphase signal."""
    a, b = pair
    return Sequence((ZRotation(((a, -PI / 4), (b, PI / 4))), Pulse((a, b), PI / 2, 0.0)), "singlet_detect")


def singlet_to_pps(sys: SpinSystem, pair=(1, 2)) -> Sequence:
    """Map singlet order -I^a.I^b onto the |01> pseudopure deviation of the pair."""
    a, b = pair
    return Sequence((ZRotation(((a, -PI / 4), (b, PI / 4))), Pulse((a, b), PI / 2, 0.0),
                     ZZRotation((a, b), PI / 2), Pulse((a, b), PI / 2, PI)), "singlet_to_pps")


def bell_from_singlet(which: str, pair=(1, 2)) -> Sequence:
    """Rotate the singlet into psi-plus, phi-minus or phi-plus (up to phase)."""
    a, _ = pair
    zpi = ZRotation(((a, -PI),))  # exp(+i pi Iz^a)
    xpi = Pulse((a,), -PI, 0.0)  # exp(+i pi Ix^a)
    table = {"psi-plus": (zpi,), "phi-minus": (xpi,), "phi-plus": (zpi, xpi),
             "singlet": (Barrier("singlet"),), "psi-minus": (Barrier("singlet"),)}
    if which not in table:
        raise ValueError(f"unknown Bell state {which!r}")
    return Sequence(table[which], f"bell_{which}")


def cnot_matrix(n: int, control: int, target: int, polarity: int = 1) -> np.ndarray:
    """Controlled NOT firing when ``control`` is |polarity> (|1> by default)."""
    dim = 2**n
    m = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        b = so.bits(i, n)
        j = i
        if b[control - 1] == polarity:
            j = i ^ (1 << (n - target))
        m[j, i] = 1
    return m


def cnot(n: int, control: int, target: int, polarity: int = 1, sys: Optional[SpinSystem] = None,
         pulses: bool = False) -> Sequence:
    """CNOT as an ideal gate, or built from pulses and a J delay.

    The pulse version, in time order: (pi/2)_{-y} on the target, (pi/2)_{-z}
    on both, 1/(4J), pi_y on both, 1/(4J), pi_y on the control, (pi/2)_{-y}
    on the target. Shift evolution is refocused by the echo, so it equals the
    ideal gate up to a global phase.
    """
    if not pulses:
        return Sequence((Gate(cnot_matrix(n, control, target, polarity), f"cnot({control}->{target})"),),
                        "cnot")
    c, t = control, target
    if sys is None:
        half = ZZRotation((c, t), PI / 4)
    else:
        half = Delay(1 / (4 * sys.j(c, t)))
    els = [Pulse((t,), PI / 2, -PI / 2), ZRotation(((c, -PI / 2), (t, -PI / 2))), half,
           Pulse((c, t), PI, PI / 2), half, Pulse((c,), PI, PI / 2), Pulse((t,), PI / 2, -PI / 2)]
    if polarity == 0:
        els = [Pulse((c,), PI, 0.0)] + els + [Pulse((c,), PI, PI)]
    return Sequence(tuple(els), "cnot_pulses")


def pseudo_hadamard(n: int, k: int) -> Sequence:
    """h = (pi/2)_{-y}: |0> -> (|0> - |1>)/sqrt2 up to sign convention."""
    return Sequence((Pulse((k,), PI / 2, -PI / 2),), f"h({k})")


NAMED = {"singlet_prep": singlet_prep, "singlet_detect": singlet_detect, "singlet_to_pps": singlet_to_pps}
