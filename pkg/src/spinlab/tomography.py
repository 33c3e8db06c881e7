"""Density-matrix tomography from integrated single-quantum readouts.

Each experiment is a unitary applied before acquisition. The readout of spin
k is the sum of the deviation elements rho[a, b] over its single-quantum
transitions (b = a with bit k set); R is the real part and S the imaginary
part. The constraint matrix maps the real unknowns (populations p, real
parts r, imaginary parts s of the upper triangle) to these readouts.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import spinops as so
from .hamiltonian import SpinSystem
from .sequence import Delay, Pulse, Sequence, ZRotation, compile_unitary

PI = np.pi


class RankDeficientError(ValueError):
    """Raised when a constraint system cannot determine every unknown."""


@dataclass(frozen=True)
class TomographyScheme:
    """Ordered experiments plus readout rule.

    ``readout`` is 'spin' (integrated per spin) or 'transition' (every
    single-quantum line separately). ``gauge`` selects the population
    unknowns: 'traceless' uses |j><j| - |N-1><N-1|, 'reference' uses |j><j|
    alone, i.e. populations measured relative to the last level.
    """

    n: int
    experiments: tuple
    readout: str = "spin"
    gauge: str = "traceless"
    name: str = ""

    def __post_init__(self):
        if self.readout not in ("spin", "transition"):
            raise ValueError("readout must be 'spin' or 'transition'")
        if self.gauge not in ("traceless", "reference"):
            raise ValueError("gauge must be 'traceless' or 'reference'")
        object.__setattr__(self, "experiments", tuple(self.experiments))

    @property
    def n_unknowns(self) -> int:
        return 4**self.n - 1

    @property
    def rows_per_experiment(self) -> int:
        if self.readout == "spin":
            return 2 * self.n
        return 2 * self.n * 2 ** (self.n - 1)

    def with_(self, **changes) -> "TomographyScheme":
        d = dict(n=self.n, experiments=self.experiments, readout=self.readout,
                 gauge=self.gauge, name=self.name)
        d.update(changes)
        return TomographyScheme(**d)


@dataclass(frozen=True)
class ConstraintSystem:
    matrix: np.ndarray
    labels: tuple[str, ...]
    scheme: TomographyScheme = field(compare=False)

    @property
    def condition_number(self) -> float:
        s = np.linalg.svd(self.matrix, compute_uv=False)
        return float(s[0] / s[-1]) if s[-1] > 0 else float("inf")

    @property
    def rank(self) -> int:
        s = np.linalg.svd(self.matrix, compute_uv=False)
        return int(np.sum(s > 1e-10 * s[0]))


def offdiagonal_positions(n: int) -> list[tuple[int, int]]:
    """Upper-triangle element order: single-quantum lines grouped by spin, then
    elements flipping two spins, three spins and so on, row-major within a group."""
    dim = 2**n
    out = []
    for k in range(1, n + 1):
        bit = 1 << (n - k)
        out += [(a, a | bit) for a in range(dim) if not a & bit]
    for flips in range(2, n + 1):
        out += [(a, b) for a, b in combinations(range(dim), 2) if bin(a ^ b).count("1") == flips]
    return out


def unknown_labels(n: int) -> tuple[str, ...]:
    m = len(offdiagonal_positions(n))
    return tuple([f"p{j}" for j in range(2**n - 1)] + [f"r{j}" for j in range(1, m + 1)]
                 + [f"s{j}" for j in range(1, m + 1)])


def basis_elements(n: int, gauge: str = "traceless") -> list[np.ndarray]:
    dim = 2**n
    out = []
    for j in range(dim - 1):
        e = np.zeros((dim, dim), dtype=complex)
        e[j, j] = 1
        if gauge == "traceless":
            e[-1, -1] = -1
        out.append(e)
    pos = offdiagonal_positions(n)
    for a, b in pos:
        e = np.zeros((dim, dim), dtype=complex)
        e[a, b] = e[b, a] = 1
        out.append(e)
    for a, b in pos:
        e = np.zeros((dim, dim), dtype=complex)
        e[a, b], e[b, a] = 1j, -1j
        out.append(e)
    return out


def to_vector(rho: np.ndarray, gauge: str = "traceless") -> np.ndarray:
    """Unknown vector of a deviation; its identity part is discarded."""
    rho = so.traceless(rho) if gauge == "traceless" else np.asarray(rho, dtype=complex)
    n = so.n_spins(rho.shape[0])
    d = np.real(np.diag(rho))
    pops = d[:-1] if gauge == "traceless" else d[:-1] - d[-1]
    pos = offdiagonal_positions(n)
    r = [rho[a, b].real for a, b in pos]
    s = [rho[a, b].imag for a, b in pos]
    return np.concatenate([pops, r, s])


def from_vector(x: np.ndarray, n: int, gauge: str = "traceless") -> np.ndarray:
    """Hermitian traceless deviation from an unknown vector."""
    rho = sum(c * e for c, e in zip(x, basis_elements(n, gauge)))
    return so.traceless((rho + rho.conj().T) / 2)


def _readout_rows(rho: np.ndarray, n: int, readout: str) -> np.ndarray:
    dim = 2**n
    lines = []
    for k in range(1, n + 1):
        bit = 1 << (n - k)
        vals = [rho[a, a | bit] for a in range(dim) if not a & bit]
        lines.append(vals)
    if readout == "spin":
        sig = np.array([sum(v) for v in lines])
    else:
        sig = np.array([v for vs in lines for v in vs])
    return np.concatenate([sig.real, sig.imag])


def experiment_unitaries(scheme: TomographyScheme, sys: SpinSystem) -> list[np.ndarray]:
    if sys.n != scheme.n:
        raise ValueError("scheme and system spin counts differ")
    return [compile_unitary(e, sys) for e in scheme.experiments]


def build_constraints(scheme: TomographyScheme, sys: SpinSystem, check_rank: bool = True) -> ConstraintSystem:
    """Propagate every unknown basis element through every experiment."""
    n = scheme.n
    basis = basis_elements(n, scheme.gauge)
    rows = []
    for u in experiment_unitaries(scheme, sys):
        cols = [_readout_rows(u @ e @ u.conj().T, n, scheme.readout) for e in basis]
        rows.append(np.column_stack(cols))
    a = np.vstack(rows)
    a[np.abs(a) < 1e-15] = 0.0
    cs = ConstraintSystem(a, unknown_labels(n), scheme)
    if check_rank and cs.rank < a.shape[1]:
        raise RankDeficientError(f"scheme determines {cs.rank} of {a.shape[1]} unknowns")
    return cs


def simulate_readouts(state, scheme: TomographyScheme, sys: SpinSystem, noise_sd: float = 0.0,
                      rng: np.random.Generator | None = None) -> np.ndarray:
    rho = so.as_deviation(state)
    y = np.concatenate([_readout_rows(u @ rho @ u.conj().T, scheme.n, scheme.readout)
                        for u in experiment_unitaries(scheme, sys)])
    if noise_sd > 0:
        rng = rng or np.random.default_rng()
        y = y + rng.normal(0.0, noise_sd, size=y.shape)
    return y


def solve(a: np.ndarray, y: np.ndarray, rcond: float = 1e-10) -> np.ndarray:
    """Least squares via SVD, discarding singular values below rcond*s_max."""
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    keep = s > rcond * s[0]
    if not np.all(keep):
        raise RankDeficientError(f"{np.sum(~keep)} singular values below cutoff")
    return vt.T @ ((u.T @ y) / s)


def reconstruct(y: np.ndarray, constraints: ConstraintSystem) -> np.ndarray:
    x = solve(constraints.matrix, np.asarray(y, dtype=float))
    return from_vector(x, constraints.scheme.n, constraints.scheme.gauge)


def reconstruct_diagonal(y: np.ndarray, constraints: ConstraintSystem) -> np.ndarray:
    """Diagonal-only reconstruction: coherence unknowns are assumed zero."""
    dim = 2**constraints.scheme.n
    a = constraints.matrix[:, : dim - 1]
    x = solve(a, np.asarray(y, dtype=float))
    full = np.concatenate([x, np.zeros(constraints.matrix.shape[1] - dim + 1)])
    return from_vector(full, constraints.scheme.n, constraints.scheme.gauge)


# --------------------------------------------------------------------- schemes

def _j_echo(sys: SpinSystem, a: int, b: int, targets) -> list:
    """1/(4J) - pi_x - 1/(4J): shifts refocus, the pair's J acts for 1/(2J)."""
    tau = 1 / (4 * sys.j(a, b))
    return [Delay(tau), Pulse(targets, PI, 0.0), Delay(tau)]


def two_spin_scheme(sys: SpinSystem | None = None, gauge: str = "traceless") -> TomographyScheme:
    """Six experiments: 1, 90x, J echo, 45x+echo, 45y+echo, shift step+45x+echo.

    The shift step of experiment 6 is the 1/(2|dnu|) evolution with spin 1
    below spin 2, written as the rotation exp(+i pi/2 (Iz1 - Iz2)) so that
    the matrix does not depend on the sign convention of the system file.
    """
    j = 100.0 if sys is None else sys.j(1, 2)
    tau = 1 / (4 * j)
    echo = [Delay(tau), Pulse((1, 2), PI, 0.0), Delay(tau)]
    shift = ZRotation(((1, -PI / 2), (2, PI / 2)))
    ex = [
        Sequence((Pulse((1, 2), 0.0),), "identity"),
        Sequence((Pulse((1, 2), PI / 2, 0.0),), "90x"),
        Sequence(tuple(echo), "J"),
        Sequence((Pulse((1, 2), PI / 4, 0.0), *echo), "45x J"),
        Sequence((Pulse((1, 2), PI / 4, PI / 2), *echo), "45y J"),
        Sequence((shift, Pulse((1, 2), PI / 4, 0.0), *echo), "shift 45x J"),
    ]
    return TomographyScheme(2, tuple(ex), "spin", gauge, "2spin")


def _parse(sys: SpinSystem, tokens) -> Sequence:
    """Tokens in time order: ('d', a, b, m) for m/J_ab, ('p', angle_deg, phase_deg)."""
    els = []
    for tok in tokens:
        if tok[0] == "d":
            _, a, b, m = tok
            els.append(Delay(m / sys.j(a, b)))
        else:
            _, ang, ph = tok
            els.append(Pulse((1, 2, 3), np.radians(ang), np.radians(ph)))
    if not els:
        els = [Pulse((1, 2, 3), 0.0)]
    return Sequence(tuple(els))


THREE_SPIN_EXPERIMENTS = (
    (),
    (("d", 1, 3, 1.0),),
    (("d", 1, 3, 0.5),),
    (("d", 2, 3, 1.0),),
    (("d", 1, 3, 0.5), ("p", 60, 90)),
    (("d", 1, 3, 1.0), ("p", 90, 45)),
    (("d", 1, 3, 0.5), ("p", 90, 135)),
    (("d", 1, 3, 0.5), ("p", 45, 0)),
    (("d", 2, 3, 1.0), ("p", 60, 45)),
    (("d", 1, 3, 1.0), ("p", 45, 135)),
    (("d", 1, 3, 0.5), ("p", 30, 45)),
    (("d", 1, 3, 1.0), ("p", 90, 0), ("d", 1, 3, 0.5), ("p", 90, 0)),
    (("d", 1, 3, 0.5), ("p", 60, 90), ("d", 1, 3, 1.0), ("p", 90, 135)),
)


def three_spin_scheme(sys: SpinSystem, readout: str = "spin") -> TomographyScheme:
    """Thirteen experiments of delays under the full Hamiltonian and
    non-selective pulses, read left to right as time order."""
    if sys.n != 3:
        raise ValueError("three_spin_scheme needs a 3-spin system")
    ex = tuple(_parse(sys, toks) for toks in THREE_SPIN_EXPERIMENTS)
    return TomographyScheme(3, ex, readout, "traceless", "3spin")


def build_with_fallback(scheme: TomographyScheme, sys: SpinSystem) -> ConstraintSystem:
    """Per-spin integration first; per-transition readout if that is rank deficient."""
    try:
        return build_constraints(scheme, sys)
    except RankDeficientError:
        return build_constraints(scheme.with_(readout="transition"), sys)


def random_deviation(n: int, rng: np.random.Generator) -> np.ndarray:
    m = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
    return so.traceless((m + m.conj().T) / 2)
