"""Spin-system description and rotating-frame Hamiltonians.

Frequencies are given in Hz and returned Hamiltonians are in rad/s.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import spinops as so

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class SingletRelaxParams:
    """Phenomenological constants of a spin-locked pair.

    ``steady_fraction`` is the triplet magnetization (in units of the thermal
    single-spin polarization) the lock settles to; it is what eventually pulls
    the singlet correlation back down.
    """

    ts_s: float
    t_triplet_s: float
    t_coh_s: float
    steady_fraction: float = 0.04
    pairs: tuple[tuple[int, int], ...] = ((1, 2),)

    def __post_init__(self):
        if not self.ts_s > self.t_triplet_s > 0:
            raise ValueError("need ts_s > t_triplet_s > 0")
        if self.t_coh_s <= 0:
            raise ValueError("t_coh_s must be positive")
        pairs = tuple(tuple(int(k) for k in p) for p in self.pairs)
        object.__setattr__(self, "pairs", pairs)


@dataclass(frozen=True)
class SpinSystem:
    n: int
    shifts_hz: tuple[float, ...]
    j_hz: np.ndarray
    t1_s: tuple[Optional[float], ...] = ()
    t2_s: tuple[Optional[float], ...] = ()
    singlet: Optional[SingletRelaxParams] = None
    name: str = ""
    notes: str = field(default="", compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        shifts = tuple(float(v) for v in self.shifts_hz)
        if len(shifts) != self.n:
            raise ValueError("shifts_hz length must equal n")
        j = np.zeros((self.n, self.n)) if self.j_hz is None else np.array(self.j_hz, dtype=float)
        if j.shape != (self.n, self.n):
            raise ValueError("j_hz must be n x n")
        if not np.allclose(j, j.T, atol=0) or np.any(np.diag(j) != 0):
            raise ValueError("j_hz must be symmetric with zero diagonal")
        j.setflags(write=False)
        t1 = _pad(self.t1_s, self.n, "t1_s")
        t2 = _pad(self.t2_s, self.n, "t2_s")
        for a, b in zip(t1, t2):
            if (a is not None and a <= 0) or (b is not None and b <= 0):
                raise ValueError("relaxation constants must be positive")
            if a is not None and b is not None and a < b:
                raise ValueError("t1_s must be >= t2_s")
        if self.singlet is not None:
            for p in self.singlet.pairs:
                if len(p) != 2 or p[0] == p[1] or not all(1 <= k <= self.n for k in p):
                    raise ValueError(f"invalid locked pair {p}")
        object.__setattr__(self, "shifts_hz", shifts)
        object.__setattr__(self, "j_hz", j)
        object.__setattr__(self, "t1_s", t1)
        object.__setattr__(self, "t2_s", t2)

    @property
    def dim(self) -> int:
        return 2**self.n

    def delta_nu(self, a: int = 1, b: int = 2) -> float:
        return self.shifts_hz[a - 1] - self.shifts_hz[b - 1]

    def j(self, a: int, b: int) -> float:
        return float(self.j_hz[a - 1, b - 1])

    def replace(self, **changes) -> "SpinSystem":
        d = dict(n=self.n, shifts_hz=self.shifts_hz, j_hz=self.j_hz, t1_s=self.t1_s,
                 t2_s=self.t2_s, singlet=self.singlet, name=self.name, notes=self.notes)
        d.update(changes)
        return SpinSystem(**d)

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "n": self.n,
            "shifts_hz": list(self.shifts_hz),
            "j_hz": self.j_hz.tolist(),
            "t1_s": list(self.t1_s),
            "t2_s": list(self.t2_s),
        }
        if self.singlet is not None:
            s = self.singlet
            d["singlet"] = {"ts_s": s.ts_s, "t_triplet_s": s.t_triplet_s, "t_coh_s": s.t_coh_s,
                            "steady_fraction": s.steady_fraction, "pairs": [list(p) for p in s.pairs]}
        return d


def _pad(values, n, label):
    values = tuple(None if v is None else float(v) for v in (values or ()))
    if not values:
        return (None,) * n
    if len(values) != n:
        raise ValueError(f"{label} length must equal n")
    return values


SYSTEM_KEYS = {"name", "n", "shifts_hz", "j_hz", "t1_s", "t2_s", "singlet", "notes"}
SINGLET_KEYS = {"ts_s", "t_triplet_s", "t_coh_s", "steady_fraction", "pairs"}


def system_from_dict(d: dict) -> SpinSystem:
    unknown = set(d) - SYSTEM_KEYS
    if unknown:
        raise ValueError(f"unknown system keys: {sorted(unknown)}")
    singlet = d.get("singlet")
    if singlet:
        bad = set(singlet) - SINGLET_KEYS
        if bad:
            raise ValueError(f"unknown singlet keys: {sorted(bad)}")
        singlet = SingletRelaxParams(**{k: (tuple(map(tuple, v)) if k == "pairs" else v)
                                        for k, v in singlet.items()})
    return SpinSystem(n=int(d["n"]), shifts_hz=d["shifts_hz"], j_hz=d.get("j_hz"),
                      t1_s=d.get("t1_s", ()), t2_s=d.get("t2_s", ()), singlet=singlet or None,
                      name=d.get("name", ""), notes=d.get("notes", ""))


BUILTIN = ("btp", "chloroform", "acrylonitrile", "aspirin")


def load_system(source: str | Path) -> SpinSystem:
    """Load a system from a JSON file path or a built-in name."""
    if str(source) in BUILTIN:
        text = resources.files("spinlab.data").joinpath(f"{source}.json").read_text()
    else:
        path = Path(source)
        if not path.is_file():
            raise FileNotFoundError(f"system file not found: {path}")
        text = path.read_text()
    return system_from_dict(json.loads(text))


def weak_coupling(sys: SpinSystem, shifts: bool = True, couplings: bool = True) -> np.ndarray:
    """2pi sum nu_k Iz^k + 2pi sum_{k<l} J_kl Iz^k Iz^l (diagonal)."""
    n = sys.n
    diag = np.zeros(2**n)
    m = np.array([[0.5 - b for b in so.bits(i, n)] for i in range(2**n)])
    if shifts:
        diag += m @ np.asarray(sys.shifts_hz)
    if couplings:
        for k in range(n):
            for l in range(k + 1, n):
                diag += sys.j_hz[k, l] * m[:, k] * m[:, l]
    return np.diag(TWO_PI * diag).astype(complex)


def isotropic_j(sys: SpinSystem, pairs=None) -> np.ndarray:
    """2pi J I^a.I^b summed over the given pairs (every coupled pair when None)."""
    n = sys.n
    if pairs is None:
        pairs = [(a, b) for a in range(1, n + 1) for b in range(a + 1, n + 1) if sys.j(a, b)]
    h = np.zeros((2**n, 2**n), dtype=complex)
    for a, b in pairs:
        h += TWO_PI * sys.j(a, b) * so.spin_dot(n, a, b)
    return h


def rf_effective(sys: SpinSystem, rf_amp_hz: float, offset_hz: float = 0.0,
                 pair: tuple[int, int] = (1, 2)) -> np.ndarray:
    """Spin-lock frame Hamiltonian of a pair under on-axis x irradiation.

    The pair's mean shift is absorbed into the carrier so the shift part is
    (dnu/2)(Iz^a - Iz^b); ``offset_hz`` adds offset * (Iz^a + Iz^b).
    """
    n = sys.n
    a, b = pair
    dnu = sys.delta_nu(a, b)
    h = dnu / 2 * (so.iz(n, a) - so.iz(n, b))
    h = h + offset_hz * (so.iz(n, a) + so.iz(n, b))
    h = h + rf_amp_hz * (so.ix(n, a) + so.ix(n, b))
    return TWO_PI * h + isotropic_j(sys, [pair])
