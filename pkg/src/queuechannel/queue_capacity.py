"""Capacity per unit time of unital qubit queue-channels.

Two evaluation routes are provided. The expectation route averages the
per-qubit unital capacity ``1 - h(1 - M_{Phi_W})`` over a Lindley sample. The
series route (exponential decoherence only) expands the symmetric-GAD
capacity in sojourn-time Laplace transforms:

    C = lam / ln 2 * sum_k E[exp(-kappa k W)] / (2k (2k - 1)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np

from ._optimize import golden_section_max
from .channels import ChannelFamily, has_waiting_invariant_maximizer
from .qubit_core import _h
from .queueing import (
    DEFAULT_BURN_IN,
    Distribution,
    QueueModel,
    WaitingSample,
    batch_means_stderr,
    gm1_sigma,
    lindley_simulate,
    mg1_laplace,
)

SERIES_TAIL_TARGET = 1e-10
SERIES_MAX_TERMS = 1 << 23
LN2 = math.log(2.0)

Laplace = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DecoherenceModel:
    """Exponential buffer decoherence ``p_eff(w) = 1 - exp(-kappa (w + t_f))``."""

    kappa: float
    flight_time: float = 0.0

    def __post_init__(self) -> None:
        if not self.kappa >= 0.0:
            raise ValueError("kappa must be nonnegative")
        if not self.flight_time >= 0.0:
            raise ValueError("flight_time must be nonnegative")

    def p_eff(self, w):
        return -np.expm1(-self.kappa * (np.asarray(w, dtype=float) + self.flight_time))

    def family(self) -> ChannelFamily:
        return ChannelFamily.symmetric_gad(self.kappa, self.flight_time)


@dataclass(frozen=True)
class QueueChannelSpec:
    queue: QueueModel
    family: ChannelFamily
    method: str = "analytic-series"

    def __post_init__(self) -> None:
        if self.method not in ("analytic-series", "monte-carlo"):
            raise ValueError(f"unknown evaluation method {self.method!r}")

    @classmethod
    def symmetric_gad(cls, queue: QueueModel, decoherence: DecoherenceModel, method: str = "analytic-series") -> "QueueChannelSpec":
        return cls(queue, decoherence.family(), method)


@dataclass(frozen=True)
class CapacityResult:
    """Capacity in bits per unit time.

    ``stderr`` is set for Monte Carlo estimates, ``tail_bound`` (an upper
    bound on the neglected part of the series) for series estimates.
    """

    capacity: float
    method: str
    lam: float
    mu: Optional[float] = None
    kappa: Optional[float] = None
    stderr: Optional[float] = None
    tail_bound: Optional[float] = None
    terms: Optional[int] = None

    @property
    def uncertainty(self) -> float:
        if self.stderr is not None:
            return self.stderr
        return self.tail_bound or 0.0


def _waiting_grid(values: np.ndarray) -> np.ndarray:
    qs = np.quantile(values, np.linspace(0.0, 1.0, 65))
    return np.unique(np.concatenate([[0.0], qs]))


def capacity_expectation(spec: QueueChannelSpec, sample: WaitingSample) -> CapacityResult:
    """``lam * mean_i (1 - h(1 - M_{Phi_{W_i}}))`` with a batch-means standard error.

    The family must have a single input state that is norm-maximizing for
    every waiting time seen in the sample; otherwise the formula is not an
    achievable rate and the call is rejected.
    """
    w = sample.values
    if w.size == 0:
        raise ValueError("empty waiting sample")
    fam = spec.family
    if not has_waiting_invariant_maximizer(fam, _waiting_grid(w)):
        raise ValueError("channel family has no waiting-invariant norm maximizer on the sampled waiting times")
    m = fam.m_phi(w)
    per_qubit = 1.0 - _h(np.clip(1.0 - m, 0.0, 0.5))
    lam = spec.queue.lam
    return CapacityResult(
        capacity=float(lam * per_qubit.mean()),
        method="monte-carlo",
        lam=lam,
        mu=spec.queue.mu,
        kappa=fam.kappa,
        stderr=lam * batch_means_stderr(per_qubit),
    )


def series_weights(k: np.ndarray) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    return 1.0 / (2.0 * k * (2.0 * k - 1.0))


def series_terms_needed(lam: float, kappa: float, laplace: Laplace, target: float = SERIES_TAIL_TARGET, flight_time: float = 0.0) -> int:
    """Smallest power-of-two ``K`` whose tail bound is below ``target``."""
    k = 16
    while k < SERIES_MAX_TERMS:
        if _tail_bound(lam, kappa, laplace, k, flight_time) < target:
            return k
        k *= 2
    return SERIES_MAX_TERMS


def _tail_bound(lam: float, kappa: float, laplace: Laplace, k: int, flight_time: float) -> float:
    # transform terms are decreasing in k and sum_{j>K} 1/(2j(2j-1)) <= 1/(4K)
    s = kappa * (k + 1)
    lt = float(laplace(s)) * math.exp(-s * flight_time)
    return lam / LN2 * lt / (4.0 * k)


def capacity_series(
    lam: float,
    kappa: float,
    laplace: Laplace,
    terms: Optional[int] = None,
    flight_time: float = 0.0,
    mu: Optional[float] = None,
    target: float = SERIES_TAIL_TARGET,
) -> CapacityResult:
    """Partial sum of the Laplace-transform series with a rigorous tail bound.

    ``laplace`` must be the stationary sojourn-time transform of the queue
    with arrival rate ``lam``. When ``terms`` is omitted it is chosen so that
    the tail bound is below ``target``. At ``kappa = 0`` every transform term
    is one and the series sums to ``ln 2`` exactly, so the result is ``lam``.
    """
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    if kappa < 0.0:
        raise ValueError("kappa must be nonnegative")
    if terms is not None and terms < 1:
        raise ValueError("terms must be at least 1")
    if kappa == 0.0:
        return CapacityResult(capacity=float(lam), method="analytic-series", lam=lam, mu=mu, kappa=kappa, tail_bound=0.0, terms=0)
    k_max = terms if terms is not None else series_terms_needed(lam, kappa, laplace, target, flight_time)
    k = np.arange(1, k_max + 1, dtype=float)
    s = kappa * k
    lt = np.asarray(laplace(s), dtype=float) * np.exp(-s * flight_time)
    partial = math.fsum((series_weights(k) * lt).tolist())
    return CapacityResult(
        capacity=lam / LN2 * partial,
        method="analytic-series",
        lam=lam,
        mu=mu,
        kappa=kappa,
        tail_bound=_tail_bound(lam, kappa, laplace, k_max, flight_time),
        terms=k_max,
    )


@dataclass(frozen=True)
class QueueTemplate:
    """Arrival/service kinds used to build a queue for any ``(lam, mu)``."""

    arrival: str = "exponential"
    service: str = "exponential"
    arrival_shape: float = 2.0
    service_shape: float = 2.0
    arrival_spread: float = 0.5
    service_spread: float = 0.5

    def build(self, lam: float, mu: float) -> QueueModel:
        return QueueModel(
            Distribution.with_mean(self.arrival, 1.0 / lam, self.arrival_shape, self.arrival_spread),
            Distribution.with_mean(self.service, 1.0 / mu, self.service_shape, self.service_spread),
        )


def queue_capacity(
    model: QueueModel,
    decoherence: DecoherenceModel,
    method: Optional[str] = None,
    n_samples: int = 1_000_000,
    burn_in: int = DEFAULT_BURN_IN,
    seed: Optional[int] = 0,
    terms: Optional[int] = None,
) -> CapacityResult:
    """Symmetric-GAD queue-channel capacity for ``model``.

    ``method=None`` picks the series when the queue has an analytic
    transform and Monte Carlo otherwise.
    """
    laplace = model.laplace()
    if method is None:
        method = "analytic-series" if laplace is not None else "monte-carlo"
    if method == "analytic-series":
        if laplace is None:
            raise ValueError("no analytic sojourn transform for this queue; use monte-carlo")
        return capacity_series(model.lam, decoherence.kappa, laplace, terms=terms, flight_time=decoherence.flight_time, mu=model.mu)
    spec = QueueChannelSpec.symmetric_gad(model, decoherence, "monte-carlo")
    return capacity_expectation(spec, lindley_simulate(model, n_samples, burn_in, seed))


@dataclass
class LambdaOptimum:
    lam_star: float
    capacity_star: float
    lambdas: np.ndarray = field(repr=False)
    capacities: np.ndarray = field(repr=False)


def optimize_lambda(
    mu: float,
    kappa: float,
    template: QueueTemplate = QueueTemplate(),
    lam_range: Optional[tuple[float, float]] = None,
    n_grid: int = 200,
    rel_tol: float = 1e-6,
    flight_time: float = 0.0,
    mc_samples: int = 200_000,
    seed: Optional[int] = 0,
) -> LambdaOptimum:
    """Maximize ``lam * E_pi[1 - h(q(W))]`` over the arrival rate.

    A 200-point grid over ``(0, mu)`` is refined by golden-section search to
    ``|d lam| < rel_tol * mu``. With an analytic transform the series is
    evaluated with a fixed number of terms across the search so that the
    objective is a smooth function of ``lam``.
    """
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    lo, hi = lam_range if lam_range is not None else (0.0, mu)
    if not 0.0 <= lo < hi <= mu:
        raise ValueError("lambda range must lie inside (0, mu)")
    step = (hi - lo) / (n_grid + 1)
    grid = lo + step * np.arange(1, n_grid + 1)
    decoherence = DecoherenceModel(kappa, flight_time)
    analytic = template.build(float(grid[0]), mu).laplace() is not None

    terms = None
    if analytic and kappa > 0.0:
        # smallest lam has the slowest-decaying transform, so it needs the most terms
        terms = max(
            series_terms_needed(float(l), kappa, template.build(float(l), mu).laplace(), flight_time=flight_time)
            for l in (grid[0], grid[-1])
        )

    def objective(lam: float) -> float:
        model = template.build(lam, mu)
        if analytic:
            return capacity_series(lam, kappa, model.laplace(), terms=terms, flight_time=flight_time, mu=mu).capacity
        return queue_capacity(model, decoherence, "monte-carlo", n_samples=mc_samples, burn_in=min(DEFAULT_BURN_IN, mc_samples), seed=seed).capacity

    caps = np.array([objective(float(l)) for l in grid])
    j = int(np.argmax(caps))
    a = grid[j - 1] if j > 0 else lo + 0.5 * step
    b = grid[j + 1] if j < n_grid - 1 else hi - 0.5 * step
    lam_star, cap_star = golden_section_max(objective, float(a), float(b), tol=rel_tol * mu)
    if caps[j] > cap_star:
        lam_star, cap_star = float(grid[j]), float(caps[j])
    return LambdaOptimum(lam_star, cap_star, grid, caps)


@dataclass(frozen=True)
class RankedCapacity:
    name: str
    distribution: Distribution
    capacity: float
    uncertainty: float
    sigma: Optional[float] = None


def _label(d: Distribution) -> str:
    return d.kind


def _check_means(dists: Sequence[Distribution], mean: float, what: str) -> None:
    if not dists:
        raise ValueError("no distributions to compare")
    for d in dists:
        if abs(d.mean - mean) > 1e-12 * max(1.0, mean):
            raise ValueError(f"{what} distribution {d.kind} has mean {d.mean!r}, expected {mean!r}")


def compare_service_dists(lam: float, mu: float, kappa: float, dists: Sequence[Distribution], flight_time: float = 0.0) -> List[RankedCapacity]:
    """Rank M/G/1 service distributions (common mean ``1/mu``) by capacity."""
    _check_means(dists, 1.0 / mu, "service")
    out = []
    for d in dists:
        res = capacity_series(lam, kappa, lambda s, d=d: mg1_laplace(s, lam, d), flight_time=flight_time, mu=mu)
        out.append(RankedCapacity(_label(d), d, res.capacity, res.uncertainty))
    return sorted(out, key=lambda r: -r.capacity)


def compare_arrival_dists(lam: float, mu: float, kappa: float, dists: Sequence[Distribution], flight_time: float = 0.0) -> List[RankedCapacity]:
    """Rank G/M/1 arrival distributions (common mean ``1/lam``) by capacity."""
    _check_means(dists, 1.0 / lam, "arrival")
    out = []
    for d in dists:
        sigma = gm1_sigma(d, mu)
        rate = mu * (1.0 - sigma)
        res = capacity_series(lam, kappa, lambda s, rate=rate: rate / (rate + np.asarray(s, dtype=float)), flight_time=flight_time, mu=mu)
        out.append(RankedCapacity(_label(d), d, res.capacity, res.uncertainty, sigma=sigma))
    return sorted(out, key=lambda r: -r.capacity)
