"""Qubit state algebra in Bloch form and binary classical channel capacities.

States are held canonically as Bloch vectors; 2x2 matrices are only built
when a Kraus sum or an eigenvalue check needs them. All entropies are in bits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from ._optimize import grid_golden_max

STATE_TOL = 1e-12
_LOG_EPS = 1e-300

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)


@dataclass(frozen=True)
class BlochVector:
    """Qubit state ``rho = (I + r.sigma) / 2`` given by ``r = (x, y, z)``.

    Vectors whose norm exceeds one by at most ``STATE_TOL`` are rescaled onto
    the sphere; anything further out is rejected.
    """

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        r = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        if not math.isfinite(r):
            raise ValueError("Bloch vector has non-finite entries")
        if r > 1.0 + STATE_TOL:
            raise ValueError(f"Bloch vector norm {r!r} exceeds 1")
        if r > 1.0:
            object.__setattr__(self, "x", self.x / r)
            object.__setattr__(self, "y", self.y / r)
            object.__setattr__(self, "z", self.z / r)

    @classmethod
    def from_array(cls, v) -> "BlochVector":
        x, y, z = (float(t) for t in v)
        return cls(x, y, z)

    @property
    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def __neg__(self) -> "BlochVector":
        return BlochVector(-self.x, -self.y, -self.z)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """A validated 2x2 density matrix.

    Hermiticity and unit trace are checked entrywise to ``STATE_TOL``.
    Eigenvalues in ``[-STATE_TOL, 0)`` are clamped to zero.
    """

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > STATE_TOL:
            raise ValueError("matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > STATE_TOL:
            raise ValueError(f"trace {np.trace(m).real!r} differs from 1")
        m = 0.5 * (m + m.conj().T)
        evals, evecs = np.linalg.eigh(m)
        if evals[0] < -STATE_TOL:
            raise ValueError(f"matrix has negative eigenvalue {evals[0]!r}")
        if evals[0] < 0.0:
            evals = np.clip(evals, 0.0, None)
            evals /= evals.sum()
            m = (evecs * evals) @ evecs.conj().T
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


State = Union[BlochVector, DensityOperator]


@dataclass(frozen=True)
class BinaryChannel:
    """Binary channel with ``q01 = P(y=1 | x=0)`` and ``q10 = P(y=0 | x=1)``."""

    q01: float
    q10: float

    def __post_init__(self) -> None:
        for name in ("q01", "q10"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v!r} outside [0, 1]")

    def transition_matrix(self) -> np.ndarray:
        """Row-stochastic ``P[x, y]``."""
        return np.array([[1.0 - self.q01, self.q01], [self.q10, 1.0 - self.q10]])


def _check_probability(q, name: str = "q") -> None:
    q = np.asarray(q, dtype=float)
    if np.any(~np.isfinite(q)) or np.any(q < 0.0) or np.any(q > 1.0):
        raise ValueError(f"{name} must lie in [0, 1]")


def _h(q):
    # unvalidated; callers guarantee q in [0, 1]
    q = np.asarray(q, dtype=float)
    qc = np.clip(q, _LOG_EPS, 1.0)
    pc = np.clip(1.0 - q, _LOG_EPS, 1.0)
    out = -(q * np.log(qc) + (1.0 - q) * np.log(pc)) / math.log(2.0)
    return np.clip(out, 0.0, 1.0)


def binary_entropy(q):
    """Binary entropy ``h(q)`` in bits, with ``h(0) = h(1) = 0``.

    Accepts scalars or arrays; scalars come back as ``float``.
    """
    _check_probability(q)
    out = _h(q)
    return float(out) if out.ndim == 0 else out


def bloch_to_density(r: BlochVector) -> DensityOperator:
    m = 0.5 * (PAULI_I + r.x * PAULI_X + r.y * PAULI_Y + r.z * PAULI_Z)
    return DensityOperator(m)


def density_to_bloch(rho: DensityOperator) -> BlochVector:
    m = rho.matrix
    return BlochVector(*(float(np.real(np.trace(m @ s))) for s in PAULIS))


def as_bloch(state: State) -> BlochVector:
    if isinstance(state, BlochVector):
        return state
    if isinstance(state, DensityOperator):
        return density_to_bloch(state)
    raise TypeError(f"not a qubit state: {type(state).__name__}")


def von_neumann_entropy(state: State) -> float:
    """``S(rho) = h((1 - |r|) / 2)``."""
    r = as_bloch(state).norm
    return float(_h(0.5 * (1.0 - min(r, 1.0))))


def operator_norm(state: State) -> float:
    """Largest eigenvalue of the state, ``(1 + |r|) / 2``."""
    return 0.5 * (1.0 + as_bloch(state).norm)


def bsc_capacity(q: float) -> float:
    _check_probability(q)
    return 1.0 - float(_h(q))


def bac_capacity(ch: BinaryChannel) -> float:
    """Shannon capacity of a binary asymmetric channel, closed form."""
    s, t = min(ch.q01, ch.q10), max(ch.q01, ch.q10)
    if s == t:
        return bsc_capacity(s)
    d = 1.0 - s - t
    if abs(d) < 1e-15:
        return 0.0
    hs, ht = float(_h(s)), float(_h(t))
    c = (s * ht - (1.0 - t) * hs) / d + math.log2(1.0 + 2.0 ** ((hs - ht) / d))
    return min(max(c, 0.0), 1.0)


def mutual_information_binary(prior, ch: BinaryChannel):
    """``I(X;Y)`` in bits for ``P(X=0) = prior`` across ``ch``.

    Vectorized over ``prior``.
    """
    _check_probability(prior, "prior")
    a = np.asarray(prior, dtype=float)
    py1 = a * ch.q01 + (1.0 - a) * (1.0 - ch.q10)
    out = _h(py1) - a * _h(ch.q01) - (1.0 - a) * _h(ch.q10)
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def bac_capacity_numeric(ch: BinaryChannel, n_grid: int = 1001, tol: float = 1e-12) -> float:
    """Capacity by maximizing ``I(X;Y)`` over the input prior.

    Independent of the closed form in :func:`bac_capacity`; mutual
    information is concave in the prior, so grid plus golden section is
    sufficient.
    """
    _, best = grid_golden_max(
        lambda a: mutual_information_binary(a, ch),
        0.0,
        1.0,
        n_grid=n_grid,
        tol=tol,
        f_vec=lambda a: mutual_information_binary(a, ch),
    )
    return best
