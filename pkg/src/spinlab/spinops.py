"""Spin-1/2 operators, tensor embedding, propagators and state metrics.

Operators are plain complex numpy arrays. Spins are indexed from 1 and the
computational basis is ordered |00..0>, |00..1>, ..., |11..1> with |0> the
spin-up (m = +1/2) state, so spin 1 is the most significant bit.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli(axis: str) -> np.ndarray:
    """Return the 2x2 Pauli matrix for ``axis`` in {x, y, z}."""
    try:
        return _PAULI[axis.lower()].copy()
    except KeyError:
        raise ValueError(f"unknown axis {axis!r}") from None


def spin(axis: str) -> np.ndarray:
    """Single spin-1/2 angular momentum operator, pauli(axis)/2."""
    return pauli(axis) / 2


def embed(n: int, k: int, op: np.ndarray) -> np.ndarray:
    """Place the 2x2 ``op`` at spin ``k`` (1-based) of an n-spin register."""
    if not 1 <= k <= n:
        raise IndexError(f"spin index {k} outside 1..{n}")
    op = np.asarray(op, dtype=complex)
    if op.shape != (2, 2):
        raise ValueError("embed expects a 2x2 operator")
    factors = [np.eye(2, dtype=complex)] * n
    factors[k - 1] = op
    return reduce(np.kron, factors)


def ix(n: int, k: int) -> np.ndarray:
    return embed(n, k, spin("x"))


def iy(n: int, k: int) -> np.ndarray:
    return embed(n, k, spin("y"))


def iz(n: int, k: int) -> np.ndarray:
    return embed(n, k, spin("z"))


def total(n: int, axis: str, targets: Iterable[int] | None = None) -> np.ndarray:
    """Sum of I_axis over ``targets`` (all spins when None)."""
    targets = range(1, n + 1) if targets is None else targets
    out = np.zeros((2**n, 2**n), dtype=complex)
    for k in targets:
        out += embed(n, k, spin(axis))
    return out


def spin_dot(n: int, a: int, b: int) -> np.ndarray:
    """Isotropic product I^a . I^b."""
    return sum(embed(n, a, spin(c)) @ embed(n, b, spin(c)) for c in "xyz")


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol)


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    eye = np.eye(u.shape[0])
    return bool(np.max(np.abs(u @ u.conj().T - eye)) <= tol)


def n_spins(dim: int) -> int:
    n = int(round(np.log2(dim)))
    if n < 1 or 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def expm_hermitian(h: np.ndarray, scale: complex = -1j) -> np.ndarray:
    """exp(scale * h) for Hermitian h via eigendecomposition."""
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h, 1e-9 * max(1.0, np.max(np.abs(h)))):
        raise ValueError("operator is not Hermitian")
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    return (v * np.exp(scale * w)) @ v.conj().T


def propagator(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i h t) for a Hermitian Hamiltonian h in rad/s."""
    return expm_hermitian(np.asarray(h) * t)


def rotation(n: int, targets: Iterable[int], angle: float, phase: float = 0.0) -> np.ndarray:
    """Hard pulse exp(-i angle sum_k (cos(phase) Ix^k + sin(phase) Iy^k))."""
    targets = list(targets)
    if not targets:
        raise ValueError("rotation needs at least one target spin")
    # product of commuting single-spin rotations, each exact in closed form
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    axis = np.cos(phase) * pauli("x") + np.sin(phase) * pauli("y")
    r = c * np.eye(2) - 1j * s * axis
    factors = [np.eye(2, dtype=complex)] * n
    for k in targets:
        if not 1 <= k <= n:
            raise IndexError(f"spin index {k} outside 1..{n}")
        factors[k - 1] = r
    return reduce(np.kron, factors)


def z_rotation(n: int, targets, angle: float | None = None) -> np.ndarray:
    """Diagonal exp(-i sum_k angle_k Iz^k).

    ``targets`` is either a set of spins sharing ``angle`` or an iterable of
    ``(spin, angle)`` pairs for per-spin signed angles.
    """
    angles = np.zeros(n)
    for item in targets:
        if isinstance(item, tuple):
            k, a = item
        else:
            if angle is None:
                raise ValueError("angle required when targets are bare indices")
            k, a = item, angle
        if not 1 <= k <= n:
            raise IndexError(f"spin index {k} outside 1..{n}")
        angles[k - 1] += a
    m = np.array([[0.5 - b for b in bits(i, n)] for i in range(2**n)])
    return np.diag(np.exp(-1j * (m @ angles)))


def bits(index: int, n: int) -> list[int]:
    """Bits of a basis index, spin 1 first."""
    return [(index >> (n - k)) & 1 for k in range(1, n + 1)]


def ket(label: str) -> np.ndarray:
    """Computational basis ket from a bit string such as '0101'."""
    v = np.zeros(2 ** len(label), dtype=complex)
    v[int(label, 2)] = 1
    return v


def projector(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


SQ2 = np.sqrt(0.5)
SINGLET = np.array([0, 1, -1, 0], dtype=complex) * SQ2
TRIPLET_PLUS = np.array([1, 0, 0, 0], dtype=complex)
TRIPLET_ZERO = np.array([0, 1, 1, 0], dtype=complex) * SQ2
TRIPLET_MINUS = np.array([0, 0, 0, 1], dtype=complex)
BELL = {
    "singlet": SINGLET,
    "psi-minus": SINGLET,
    "psi-plus": TRIPLET_ZERO,
    "phi-minus": np.array([1, 0, 0, -1], dtype=complex) * SQ2,
    "phi-plus": np.array([1, 0, 0, 1], dtype=complex) * SQ2,
}
# columns S0, T+, T0, T-
ST_BASIS = np.column_stack([SINGLET, TRIPLET_PLUS, TRIPLET_ZERO, TRIPLET_MINUS])


def traceless(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    return a - np.trace(a) / a.shape[0] * np.eye(a.shape[0])


def pps_deviation(label: str) -> np.ndarray:
    """Traceless deviation of the pseudopure state |label><label|."""
    return traceless(projector(ket(label)))


def conjugate(u: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return u @ rho @ u.conj().T


@dataclass(frozen=True)
class State:
    """Normalized density matrix rho = 1/N + eps * deviation.

    ``eps`` is the thermal polarization scale used when relaxing toward
    equilibrium; it does not change the matrix itself.
    """

    rho: np.ndarray
    eps: float = 1e-5

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        n_spins(rho.shape[0])
        if abs(np.trace(rho) - 1) > 1e-12:
            raise ValueError("density matrix must have unit trace")
        if not is_hermitian(rho):
            raise ValueError("density matrix must be Hermitian")
        if np.linalg.eigvalsh(rho).min() < -1e-10:
            raise ValueError("density matrix has negative eigenvalues")
        object.__setattr__(self, "rho", rho)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @property
    def deviation(self) -> np.ndarray:
        return traceless(self.rho)

    @classmethod
    def from_deviation(cls, dev: np.ndarray, eps: float = 1e-5) -> "State":
        dev = traceless(dev)
        return cls(np.eye(dev.shape[0]) / dev.shape[0] + eps * dev, eps)

    @classmethod
    def thermal(cls, n: int, eps: float = 1e-5) -> "State":
        return cls.from_deviation(total(n, "z"), eps)


def as_deviation(x) -> np.ndarray:
    return x.deviation if isinstance(x, State) else traceless(x)


def _hs(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.real(np.trace(a @ b)))


def correlation(a, b) -> float:
    """Normalized Hilbert-Schmidt overlap of the traceless parts."""
    a, b = as_deviation(a), as_deviation(b)
    na, nb = _hs(a, a), _hs(b, b)
    if na <= 0 or nb <= 0:
        raise ValueError("correlation undefined for a zero deviation")
    return float(np.clip(_hs(a, b) / np.sqrt(na * nb), -1.0, 1.0))


def diagonal_correlation(a, b) -> float:
    """Correlation restricted to the diagonal parts."""
    a = np.diag(np.diag(as_deviation(a)))
    b = np.diag(np.diag(as_deviation(b)))
    if not np.any(np.abs(np.diag(a)) > 0) or not np.any(np.abs(np.diag(b)) > 0):
        raise ValueError("diagonal correlation undefined for a zero diagonal")
    return correlation(a, b)


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(0.5 * np.abs(np.linalg.eigvalsh(a - b)).sum())


def product_operator_coefficients(rho: np.ndarray, tol: float = 1e-9) -> dict[str, float]:
    """Expand an operator in the product basis, e.g. {'zz': 0.5} for Iz1Iz2."""
    n = n_spins(rho.shape[0])
    mats = {"e": np.eye(2), "x": spin("x"), "y": spin("y"), "z": spin("z")}
    out = {}
    for idx in np.ndindex(*(4,) * n):
        label = "".join("exyz"[i] for i in idx)
        if set(label) == {"e"}:
            continue
        p = reduce(np.kron, [mats[c] for c in label])
        c = np.trace(p @ rho) / np.trace(p @ p)
        if abs(c) > tol:
            out[label] = float(np.real(c))
    return out


def sum_ops(ops: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(np.add, ops)
