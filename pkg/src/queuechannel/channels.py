"""Pauli-mixture and generalized amplitude damping (GAD) qubit channels.

Unital channels are handled in Pauli coordinates ``(p1, p2, p3)``, where the
action on Bloch vectors is the entrywise product with the attenuation vector
``lambda_i = 1 - 2 * sum_{j != i} p_j``. Non-Pauli-aligned unital channels
(those that need local unitaries to reach this form) are not represented.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .qubit_core import (
    PAULIS,
    STATE_TOL,
    BlochVector,
    DensityOperator,
    State,
    _h,
    as_bloch,
    bloch_to_density,
    density_to_bloch,
)

EB_P_MIN = 2.0 * (math.sqrt(2.0) - 1.0)
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class PauliChannel:
    """``Phi(rho) = (1 - sum p) rho + sum_i p_i sigma_i rho sigma_i``."""

    p1: float
    p2: float
    p3: float

    def __post_init__(self) -> None:
        ps = (self.p1, self.p2, self.p3)
        if any(not math.isfinite(p) or p < -STATE_TOL for p in ps):
            raise ValueError(f"Pauli probabilities must be nonnegative: {ps}")
        if sum(ps) > 1.0 + STATE_TOL:
            raise ValueError(f"Pauli probabilities sum to {sum(ps)!r} > 1")
        for name, p in zip(("p1", "p2", "p3"), ps):
            object.__setattr__(self, name, max(p, 0.0))

    @property
    def probs(self) -> Tuple[float, float, float]:
        return (self.p1, self.p2, self.p3)

    @property
    def attenuations(self) -> np.ndarray:
        p = np.array(self.probs)
        return 1.0 - 2.0 * (p.sum() - p)

    def kraus_operators(self) -> List[np.ndarray]:
        p0 = max(1.0 - sum(self.probs), 0.0)
        ops = [math.sqrt(p0) * np.eye(2, dtype=complex)]
        ops += [math.sqrt(p) * s for p, s in zip(self.probs, PAULIS)]
        return ops


@dataclass(frozen=True)
class GadChannel:
    """Generalized amplitude damping with damping ``p`` and mixing ``n``."""

    p: float
    n: float

    def __post_init__(self) -> None:
        for name in ("p", "n"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v!r} outside [0, 1]")

    def kraus_operators(self) -> List[np.ndarray]:
        p, n = self.p, self.n
        sp = math.sqrt(1.0 - p)
        k0 = math.sqrt(1.0 - n) * np.array([[1.0, 0.0], [0.0, sp]], dtype=complex)
        k1 = math.sqrt(p * (1.0 - n)) * np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
        k2 = math.sqrt(n) * np.array([[sp, 0.0], [0.0, 1.0]], dtype=complex)
        k3 = math.sqrt(p * n) * np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
        return [k0, k1, k2, k3]


Channel = PauliChannel | GadChannel


@dataclass(frozen=True)
class OptimalCode:
    """Product encoding / projective decoding attaining ``M_Phi``.

    Bit 0 is sent as ``encoding``, bit 1 as its antipode; the receiver
    projects onto ``measurement`` and its complement.
    """

    axis: int
    encoding: BlochVector
    measurement: BlochVector
    m_phi: float


def apply_kraus(ops: Sequence[np.ndarray], state: State) -> BlochVector:
    rho = bloch_to_density(as_bloch(state)).matrix
    out = sum(k @ rho @ k.conj().T for k in ops)
    return density_to_bloch(DensityOperator(out))


def _same_kind(state: State, r: BlochVector) -> State:
    return bloch_to_density(r) if isinstance(state, DensityOperator) else r


def apply_pauli(ch: PauliChannel, state: State) -> State:
    """Bloch action ``r -> lambda * r`` (entrywise)."""
    r = as_bloch(state).as_array() * ch.attenuations
    return _same_kind(state, BlochVector.from_array(r))


def gad_bloch_map(p, n, r):
    """GAD action on Bloch coordinates; vectorized over the last axis of ``r``."""
    r = np.asarray(r, dtype=float)
    sp = np.sqrt(1.0 - np.asarray(p, dtype=float))
    out = np.empty(np.broadcast(r, np.asarray(p)[..., None]).shape)
    out[..., 0] = sp * r[..., 0]
    out[..., 1] = sp * r[..., 1]
    out[..., 2] = (1.0 - np.asarray(p)) * r[..., 2] + np.asarray(p) * (1.0 - 2.0 * np.asarray(n))
    return out


def apply_gad(ch: GadChannel, state: State) -> State:
    """Apply the GAD channel through its Kraus sum."""
    return _same_kind(state, apply_kraus(ch.kraus_operators(), state))


def apply_channel(ch: Channel, state: State) -> State:
    if isinstance(ch, PauliChannel):
        return apply_pauli(ch, state)
    if isinstance(ch, GadChannel):
        return apply_gad(ch, state)
    raise TypeError(f"unsupported channel {type(ch).__name__}")


def gad_to_pauli(p: float) -> PauliChannel:
    """Pauli form of the unital ``n = 1/2`` GAD channel."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p!r} outside [0, 1]")
    return PauliChannel(p / 4.0, p / 4.0, (1.0 - math.sqrt(1.0 - p)) ** 2 / 4.0)


def m_phi(ch: PauliChannel) -> float:
    """Largest output operator norm over all inputs, ``(1 + max|lambda_i|) / 2``."""
    return 0.5 * (1.0 + float(np.max(np.abs(ch.attenuations))))


def optimal_axes(ch: PauliChannel, tol: float = _TIE_TOL) -> List[int]:
    """All axes (1-based) whose ``|lambda_i|`` is maximal within ``tol``."""
    a = np.abs(ch.attenuations)
    return [i + 1 for i in range(3) if a[i] >= a.max() - tol]


def optimal_code(ch: PauliChannel) -> OptimalCode:
    """Encode on the Pauli axis with the largest ``|lambda_i|``.

    Ties go to the smallest index. When that attenuation is negative the
    measurement projector points along the flipped axis, so the
    measurement still clicks with probability ``M_Phi`` on the encoded state.
    """
    lam = ch.attenuations
    i = optimal_axes(ch)[0]
    e = np.zeros(3)
    e[i - 1] = 1.0
    sign = -1.0 if lam[i - 1] < 0.0 else 1.0
    return OptimalCode(
        axis=i,
        encoding=BlochVector.from_array(e),
        measurement=BlochVector.from_array(sign * e),
        m_phi=m_phi(ch),
    )


def is_unital(ch: Channel, tol: float = _TIE_TOL) -> bool:
    out = as_bloch(apply_channel(ch, BlochVector(0.0, 0.0, 0.0)))
    return out.norm <= tol


def eb_width(p: float) -> float:
    """``l(p)``; ``nan`` below the entanglement-breaking threshold."""
    disc = p * p + 4.0 * p - 4.0
    if p <= 0.0 or disc < 0.0:
        return float("nan")
    return math.sqrt(disc / (p * p))


def is_entanglement_breaking(ch: GadChannel) -> bool:
    if ch.p < EB_P_MIN - 1e-15:
        return False
    width = eb_width(max(ch.p, EB_P_MIN))
    if math.isnan(width):
        width = 0.0
    return abs(ch.n - 0.5) <= 0.5 * width + 1e-15


def eb_threshold(n: float) -> float:
    """Smallest ``p`` at which ``A_{p,n}`` is entanglement breaking."""
    x = n * (1.0 - n)
    if x == 0.0:
        return 1.0
    return max(EB_P_MIN, (math.sqrt(1.0 + 4.0 * x) - 1.0) / (2.0 * x))


def symmetric_gad_attenuations(p_eff) -> np.ndarray:
    """Attenuations of ``A_{p,1/2}``, ``(sqrt(1-p), sqrt(1-p), 1-p)``, vectorized."""
    p = np.asarray(p_eff, dtype=float)
    sp = np.sqrt(1.0 - p)
    return np.stack([sp, sp, 1.0 - p], axis=-1)


def _exp_decoherence(kappa: float, flight_time: float) -> Callable[[np.ndarray], np.ndarray]:
    def p_eff(w):
        return -np.expm1(-kappa * (np.asarray(w, dtype=float) + flight_time))

    return p_eff


@dataclass(frozen=True)
class ChannelFamily:
    """Waiting-time indexed family ``w -> Phi_w`` of Pauli channels.

    ``probs_fn`` maps an array of waiting times to an ``(..., 3)`` array of
    Pauli probabilities. For the symmetric-GAD family ``p_eff`` is kept as
    well so that capacity formulas can use it directly.
    """

    kind: str
    probs_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    kappa: Optional[float] = None
    flight_time: float = 0.0
    p_eff: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    @classmethod
    def symmetric_gad(
        cls,
        kappa: float,
        flight_time: float = 0.0,
        p_eff: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    ) -> "ChannelFamily":
        if kappa < 0.0:
            raise ValueError("kappa must be nonnegative")
        if flight_time < 0.0:
            raise ValueError("flight_time must be nonnegative")
        pe = p_eff if p_eff is not None else _exp_decoherence(kappa, flight_time)

        def probs(w):
            p = np.asarray(pe(w), dtype=float)
            q3 = (1.0 - np.sqrt(1.0 - p)) ** 2 / 4.0
            return np.stack([p / 4.0, p / 4.0, q3], axis=-1)

        return cls("symmetric-gad", probs, kappa=kappa, flight_time=flight_time, p_eff=pe)

    @classmethod
    def depolarizing(cls, kappa: float) -> "ChannelFamily":
        """``p_i(w) = (1 - exp(-kappa w)) / 4``: fully depolarizing as ``w -> inf``."""
        if kappa < 0.0:
            raise ValueError("kappa must be nonnegative")

        def probs(w):
            q = -np.expm1(-kappa * np.asarray(w, dtype=float)) / 4.0
            return np.stack([q, q, q], axis=-1)

        return cls("depolarizing", probs, kappa=kappa)

    @classmethod
    def from_callable(cls, fn: Callable[[float], PauliChannel], kind: str = "pauli-family") -> "ChannelFamily":
        def probs(w):
            w = np.asarray(w, dtype=float)
            flat = [fn(float(x)).probs for x in w.ravel()]
            return np.array(flat, dtype=float).reshape(w.shape + (3,))

        return cls(kind, probs)

    def probs(self, w) -> np.ndarray:
        return np.asarray(self.probs_fn(np.asarray(w, dtype=float)), dtype=float)

    def at(self, w: float) -> PauliChannel:
        return PauliChannel(*(float(v) for v in self.probs(w)))

    def attenuations(self, w) -> np.ndarray:
        if self.kind == "symmetric-gad":
            return symmetric_gad_attenuations(self.p_eff(w))
        p = self.probs(w)
        return 1.0 - 2.0 * (p.sum(axis=-1, keepdims=True) - p)

    def m_phi(self, w) -> np.ndarray:
        return 0.5 * (1.0 + np.max(np.abs(self.attenuations(w)), axis=-1))


def induced_axis_crossovers(probs: np.ndarray) -> np.ndarray:
    """``b_i = p_i + (1 - sum_j p_j)`` for the three Pauli-axis induced BSCs."""
    probs = np.asarray(probs, dtype=float)
    return probs + (1.0 - probs.sum(axis=-1, keepdims=True))


def _check_grid(w_grid: Iterable[float]) -> np.ndarray:
    w = np.asarray(list(w_grid), dtype=float)
    if w.size == 0:
        raise ValueError("waiting-time grid is empty")
    return w


def consistent_axis_order(fam: ChannelFamily, w_grid: Iterable[float], tol: float = _TIE_TOL) -> Optional[Tuple[int, int, int]]:
    """A permutation of the axes sorting induced-BSC capacities at every ``w``.

    Capacities equal within ``tol`` count as ties and fit either order.
    Returns ``None`` when no single permutation works across the grid.
    """
    w = _check_grid(w_grid)
    caps = 1.0 - _h(np.clip(induced_axis_crossovers(fam.probs(w)), 0.0, 1.0))
    caps = caps.reshape(-1, 3)
    for perm in itertools.permutations(range(3)):
        c = caps[:, perm]
        if np.all(c[:, 0] >= c[:, 1] - tol) and np.all(c[:, 1] >= c[:, 2] - tol):
            return tuple(i + 1 for i in perm)
    return None


def is_pauli_ordered(fam: ChannelFamily, w_grid: Iterable[float]) -> bool:
    return consistent_axis_order(fam, w_grid) is not None


def invariant_maximizer_axes(fam: ChannelFamily, w_grid: Iterable[float], tol: float = _TIE_TOL) -> List[int]:
    """Axes that attain ``M_{Phi_w}`` at every grid point."""
    w = _check_grid(w_grid)
    a = np.abs(fam.attenuations(w)).reshape(-1, 3)
    ok = np.all(a >= a.max(axis=1, keepdims=True) - tol, axis=0)
    return [i + 1 for i in range(3) if ok[i]]


def has_waiting_invariant_maximizer(fam: ChannelFamily, w_grid: Iterable[float]) -> bool:
    return bool(invariant_maximizer_axes(fam, w_grid))
