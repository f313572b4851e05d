"""End-to-end Monte Carlo of the product encoding/decoding protocol.

Classical bits are encoded on a Pauli axis, each qubit waits ``W_i`` in a
Lindley queue, passes through ``Phi_{W_i}`` and is measured projectively.
Outcomes are sampled from Born probabilities. Flip statistics are then
compared with the induced-BSC prediction ``1 - M_{Phi_W}`` in W-buckets.

The raw decoder labels the outcome "projector tau*" as bit 1, so its flip
probability is ``M_Phi >= 1/2``; the canonical decoder swaps labels and
sees ``1 - M_Phi``. Both are reported; buckets use the canonical one.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.stats import beta

from .channels import consistent_axis_order, invariant_maximizer_axes
from .qubit_core import _h
from .queue_capacity import QueueChannelSpec
from .queueing import DEFAULT_BURN_IN, batch_means_stderr, lindley_simulate, make_rng

CHUNK = 1 << 18
CI_LEVEL = 0.9973  # two-sided 3 sigma
_QUEUE_STREAM, _BITS_STREAM = 0, 1


@dataclass(frozen=True)
class SimConfig:
    spec: QueueChannelSpec
    n_bits: int
    seed: int = 0
    mode: str = "blind"
    bucket_edges: Optional[Sequence[float]] = None
    n_buckets: int = 10
    burn_in: int = DEFAULT_BURN_IN
    threads: int = 1

    def __post_init__(self) -> None:
        if self.n_bits <= 0:
            raise ValueError("n_bits must be positive")
        if self.mode not in ("blind", "waiting-aware"):
            raise ValueError(f"unknown encoder mode {self.mode!r}")
        if self.bucket_edges is not None:
            e = np.asarray(self.bucket_edges, dtype=float)
            if e.size < 2 or np.any(np.diff(e) <= 0.0):
                raise ValueError("bucket edges must be strictly ascending")
        if self.n_buckets < 1:
            raise ValueError("n_buckets must be positive")


@dataclass(frozen=True)
class BucketStats:
    lo: float
    hi: float
    n: int
    flips: int
    raw_flips: int
    predicted: float
    ci_lo: float
    ci_hi: float

    @property
    def crossover(self) -> float:
        return self.flips / self.n if self.n else float("nan")

    @property
    def raw_crossover(self) -> float:
        return self.raw_flips / self.n if self.n else float("nan")


@dataclass
class SimReport:
    buckets: List[BucketStats]
    total_qubits: int
    seed: int
    mode: str
    lam: float
    axis_counts: tuple
    flips_bit0: int
    flips_bit1: int
    n_bit0: int
    n_bit1: int
    achievable_rate: float = float("nan")
    predicted_rate: float = float("nan")
    rate_stderr: float = float("nan")
    empty_buckets: int = 0
    waiting: np.ndarray = field(default=None, repr=False)

    @property
    def flips(self) -> int:
        return sum(b.flips for b in self.buckets)

    @property
    def crossover(self) -> float:
        return self.flips / self.total_qubits

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["bucket_lo", "bucket_hi", "n", "flips", "crossover", "ci_lo", "ci_hi", "predicted"])
        for b in self.buckets:
            w.writerow([_fmt(b.lo), _fmt(b.hi), b.n, b.flips, _fmt(b.crossover), _fmt(b.ci_lo), _fmt(b.ci_hi), _fmt(b.predicted)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "mode": self.mode,
            "total_qubits": self.total_qubits,
            "lambda": self.lam,
            "flips": self.flips,
            "crossover": self.crossover,
            "raw_crossover": 1.0 - self.crossover,
            "flips_bit0": self.flips_bit0,
            "flips_bit1": self.flips_bit1,
            "n_bit0": self.n_bit0,
            "n_bit1": self.n_bit1,
            "axis_counts": list(self.axis_counts),
            "achievable_rate": self.achievable_rate,
            "predicted_rate": self.predicted_rate,
            "rate_stderr": self.rate_stderr,
            "empty_buckets": self.empty_buckets,
            "buckets": [
                {
                    "lo": b.lo,
                    "hi": b.hi,
                    "n": b.n,
                    "flips": b.flips,
                    "crossover": b.crossover,
                    "raw_crossover": b.raw_crossover,
                    "ci": [b.ci_lo, b.ci_hi],
                    "predicted": b.predicted,
                }
                for b in self.buckets
            ],
        }

    def checksum(self) -> str:
        return hashlib.sha256(self.to_csv().encode("utf-8")).hexdigest()


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def clopper_pearson(k: int, n: int, level: float = CI_LEVEL) -> tuple[float, float]:
    """Exact binomial confidence interval for ``k`` successes in ``n`` trials."""
    if n == 0:
        return (0.0, 1.0)
    a = 1.0 - level
    lo = 0.0 if k == 0 else float(beta.ppf(a / 2.0, k, n - k + 1))
    hi = 1.0 if k == n else float(beta.ppf(1.0 - a / 2.0, k + 1, n - k))
    return lo, hi


def born_probability(state, projector) -> np.ndarray:
    """``Tr(P rho)`` for Bloch vectors of a state and a rank-one projector, row-wise."""
    return 0.5 * (1.0 + np.sum(np.asarray(state) * np.asarray(projector), axis=-1))


def sample_measurement(rng: np.random.Generator, state, projector, size: Optional[int] = None) -> np.ndarray:
    """Draw projective outcomes: ``True`` where the projector clicks."""
    p = born_probability(state, projector)
    u = rng.random(size if size is not None else np.shape(p))
    return u < p


def _encoding_axes(cfg: SimConfig, w: np.ndarray) -> np.ndarray:
    fam = cfg.spec.family
    if cfg.mode == "waiting-aware":
        lam = np.abs(fam.attenuations(w)).reshape(-1, 3)
        return np.argmax(lam, axis=1)
    grid = np.unique(np.concatenate([[0.0], np.quantile(w, np.linspace(0.0, 1.0, 101))]))
    order = consistent_axis_order(fam, grid)
    if order is None:
        raise ValueError("blind encoding needs a Pauli-ordered channel family")
    axes = invariant_maximizer_axes(fam, grid)
    axis = axes[0] if axes else order[0]
    return np.full(w.size, axis - 1, dtype=np.int64)


def _run_chunk(cfg: SimConfig, idx: int, w: np.ndarray, axes: np.ndarray):
    # every chunk owns its stream, so results do not depend on worker count
    rng = make_rng(cfg.seed, _BITS_STREAM, idx)
    n = w.size
    bits = rng.integers(0, 2, n)
    lam = cfg.spec.family.attenuations(w).reshape(-1, 3)
    rows = np.arange(n)
    enc = np.zeros((n, 3))
    enc[rows, axes] = np.where(bits == 0, 1.0, -1.0)
    lam_axis = lam[rows, axes]
    tau = np.zeros((n, 3))
    tau[rows, axes] = np.where(lam_axis < 0.0, -1.0, 1.0)
    out = lam * enc
    clicks = sample_measurement(rng, out, tau)
    # raw labeling: tau* -> 1; canonical labeling: tau* -> 0
    raw_decoded = clicks.astype(np.int64)
    canonical_decoded = 1 - raw_decoded
    flips = canonical_decoded != bits
    raw_flips = raw_decoded != bits
    predicted = 0.5 * (1.0 - np.abs(lam_axis))
    return bits, flips, raw_flips, predicted


def run_end_to_end(cfg: SimConfig) -> SimReport:
    """Simulate ``cfg.n_bits`` qubits through the queue-channel."""
    queue = cfg.spec.queue
    sample = lindley_simulate(queue, cfg.n_bits, cfg.burn_in, cfg.seed, stream=(_QUEUE_STREAM,))
    w = sample.values
    axes = _encoding_axes(cfg, w)

    starts = list(range(0, w.size, CHUNK))
    jobs = [(i, slice(s, s + CHUNK)) for i, s in enumerate(starts)]
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            parts = list(pool.map(lambda j: _run_chunk(cfg, j[0], w[j[1]], axes[j[1]]), jobs))
    else:
        parts = [_run_chunk(cfg, i, w[sl], axes[sl]) for i, sl in jobs]
    bits = np.concatenate([p[0] for p in parts])
    flips = np.concatenate([p[1] for p in parts])
    raw_flips = np.concatenate([p[2] for p in parts])
    predicted = np.concatenate([p[3] for p in parts])

    if cfg.bucket_edges is not None:
        edges = np.asarray(cfg.bucket_edges, dtype=float)
    else:
        edges = np.unique(np.quantile(w, np.linspace(0.0, 1.0, cfg.n_buckets + 1)))
        if edges.size < 2:
            edges = np.array([edges[0], edges[0] + 1.0])
    which = np.clip(np.searchsorted(edges, w, side="right") - 1, 0, edges.size - 2)
    inside = (w >= edges[0]) & (w <= edges[-1])

    buckets = []
    for b in range(edges.size - 1):
        sel = inside & (which == b)
        n = int(sel.sum())
        k = int(flips[sel].sum())
        ci = clopper_pearson(k, n)
        buckets.append(
            BucketStats(
                lo=float(edges[b]),
                hi=float(edges[b + 1]),
                n=n,
                flips=k,
                raw_flips=int(raw_flips[sel].sum()),
                predicted=float(predicted[sel].mean()) if n else float("nan"),
                ci_lo=ci[0],
                ci_hi=ci[1],
            )
        )

    report = SimReport(
        buckets=buckets,
        total_qubits=int(inside.sum()),
        seed=cfg.seed,
        mode=cfg.mode,
        lam=queue.lam,
        axis_counts=tuple(int(c) for c in np.bincount(axes, minlength=3)),
        flips_bit0=int(flips[bits == 0].sum()),
        flips_bit1=int(flips[bits == 1].sum()),
        n_bit0=int((bits == 0).sum()),
        n_bit1=int((bits == 1).sum()),
        waiting=w,
    )
    report.achievable_rate = estimate_rate(report, queue.lam)
    per_qubit = queue.lam * (1.0 - _h(predicted))
    report.predicted_rate = float(np.mean(per_qubit))
    report.rate_stderr = math.hypot(_measurement_stderr(report, queue.lam), batch_means_stderr(per_qubit))
    return report


def _measurement_stderr(report: SimReport, lam: float) -> float:
    # delta method on each bucket's binomial crossover estimate
    used = [b for b in report.buckets if b.n > 0]
    total = sum(b.n for b in used)
    var = 0.0
    for b in used:
        q = min(max(b.crossover, 0.5 / b.n), 1.0 - 0.5 / b.n)
        slope = math.log2((1.0 - q) / q)
        var += (b.n / total) ** 2 * slope * slope * q * (1.0 - q) / b.n
    return lam * math.sqrt(var)


def estimate_rate(report: SimReport, lam: float) -> float:
    """Plug-in rate ``lam * mean_i (1 - h(q_hat(W_i)))`` from bucket crossovers.

    Buckets with no qubits are skipped and counted in ``report.empty_buckets``.
    """
    used = [b for b in report.buckets if b.n > 0]
    report.empty_buckets = len(report.buckets) - len(used)
    if report.empty_buckets:
        warnings.warn(f"{report.empty_buckets} empty W-buckets excluded from the rate estimate", RuntimeWarning)
    if not used:
        raise ValueError("report has no populated buckets")
    total = sum(b.n for b in used)
    acc = math.fsum(b.n * (1.0 - float(_h(b.crossover))) for b in used)
    return lam * acc / total


def report_json(report: SimReport) -> str:
    return json.dumps(report.summary(), indent=2, sort_keys=True)
