"""Single-server FCFS queues: Lindley simulation and stationary sojourn-time
Laplace transforms for M/M/1, G/M/1 and M/G/1.

Throughout, ``W`` is the sojourn time of a qubit (buffer wait plus its own
service), as produced by ``W_{i+1} = max(W_i - A_i, 0) + S_{i+1}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

DEFAULT_BURN_IN = 100_000
_BATCHES = 50


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Distribution:
    """Nonnegative inter-event distribution with a closed-form Laplace transform.

    ``kind`` is one of ``exponential(rate)``, ``deterministic(value)``,
    ``gamma(shape, rate)`` and ``uniform(lo, hi)``.
    """

    kind: str
    params: dict = field(default_factory=dict)

    KINDS = ("exponential", "deterministic", "gamma", "uniform")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        required = {
            "exponential": ("rate",),
            "deterministic": ("value",),
            "gamma": ("shape", "rate"),
            "uniform": ("lo", "hi"),
        }[self.kind]
        extra = set(self.params) - set(required)
        missing = [k for k in required if k not in self.params]
        if missing or extra:
            raise ValueError(f"{self.kind} needs parameters {required}, got {sorted(self.params)}")
        params = {k: float(v) for k, v in self.params.items()}
        if self.kind == "uniform":
            if not 0.0 <= params["lo"] < params["hi"]:
                raise ValueError("uniform needs 0 <= lo < hi")
        elif any(not v > 0.0 or not math.isfinite(v) for v in params.values()):
            raise ValueError(f"{self.kind} parameters must be positive and finite")
        object.__setattr__(self, "params", params)

    @classmethod
    def exponential(cls, rate: float) -> "Distribution":
        return cls("exponential", {"rate": rate})

    @classmethod
    def deterministic(cls, value: float) -> "Distribution":
        return cls("deterministic", {"value": value})

    @classmethod
    def gamma(cls, shape: float, rate: float) -> "Distribution":
        return cls("gamma", {"shape": shape, "rate": rate})

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "Distribution":
        return cls("uniform", {"lo": lo, "hi": hi})

    @classmethod
    def with_mean(cls, kind: str, mean: float, shape: float = 2.0, spread: float = 0.5) -> "Distribution":
        """Build a ``kind`` distribution with the given mean.

        ``shape`` is the gamma shape; ``spread`` is the uniform half-width as
        a fraction of the mean (at most 1).
        """
        if mean <= 0.0:
            raise ValueError("mean must be positive")
        if kind == "exponential":
            return cls.exponential(1.0 / mean)
        if kind == "deterministic":
            return cls.deterministic(mean)
        if kind == "gamma":
            return cls.gamma(shape, shape / mean)
        if kind == "uniform":
            if not 0.0 < spread <= 1.0:
                raise ValueError("uniform spread must lie in (0, 1]")
            return cls.uniform(mean * (1.0 - spread), mean * (1.0 + spread))
        raise ValueError(f"unknown distribution kind {kind!r}")

    @property
    def mean(self) -> float:
        p = self.params
        if self.kind == "exponential":
            return 1.0 / p["rate"]
        if self.kind == "deterministic":
            return p["value"]
        if self.kind == "gamma":
            return p["shape"] / p["rate"]
        return 0.5 * (p["lo"] + p["hi"])

    @property
    def rate(self) -> float:
        return 1.0 / self.mean

    def laplace(self, s):
        """``E[exp(-s X)]``, vectorized over ``s >= 0``."""
        s = np.asarray(s, dtype=float)
        p = self.params
        if self.kind == "exponential":
            out = p["rate"] / (p["rate"] + s)
        elif self.kind == "deterministic":
            out = np.exp(-s * p["value"])
        elif self.kind == "gamma":
            out = (p["rate"] / (p["rate"] + s)) ** p["shape"]
        else:
            lo, hi = p["lo"], p["hi"]
            with np.errstate(invalid="ignore", divide="ignore"):
                out = np.exp(-s * lo) * -np.expm1(-s * (hi - lo)) / (s * (hi - lo))
            out = np.where(s * (hi - lo) < 1e-12, np.exp(-s * 0.5 * (lo + hi)), out)
        return float(out) if np.ndim(out) == 0 else out

    def laplace_complement(self, s):
        """``1 - E[exp(-s X)]`` without cancellation at small ``s``."""
        s = np.asarray(s, dtype=float)
        p = self.params
        if self.kind == "exponential":
            out = s / (p["rate"] + s)
        elif self.kind == "deterministic":
            out = -np.expm1(-s * p["value"])
        elif self.kind == "gamma":
            out = -np.expm1(-p["shape"] * np.log1p(s / p["rate"]))
        else:
            out = 1.0 - np.asarray(self.laplace(s))
        return float(out) if np.ndim(out) == 0 else out

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        p = self.params
        if self.kind == "exponential":
            return rng.exponential(1.0 / p["rate"], size)
        if self.kind == "deterministic":
            return np.full(size, p["value"])
        if self.kind == "gamma":
            return rng.gamma(p["shape"], 1.0 / p["rate"], size)
        return rng.uniform(p["lo"], p["hi"], size)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}


@dataclass(frozen=True)
class QueueModel:
    arrival: Distribution
    service: Distribution

    def __post_init__(self) -> None:
        if not self.lam < self.mu:
            raise ValueError(f"unstable queue: arrival rate {self.lam!r} >= service rate {self.mu!r}")

    @property
    def lam(self) -> float:
        return self.arrival.rate

    @property
    def mu(self) -> float:
        return self.service.rate

    @property
    def load(self) -> float:
        return self.lam / self.mu

    def laplace(self) -> Optional[Callable[[np.ndarray], np.ndarray]]:
        """Stationary sojourn-time transform, or ``None`` if none is implemented.

        Exponential service selects the G/M/1 form (which includes M/M/1),
        exponential arrivals with general service the M/G/1 form.
        """
        if self.service.kind == "exponential":
            if self.arrival.kind == "exponential":
                return lambda s: mm1_laplace(s, self.lam, self.mu)
            sigma = gm1_sigma(self.arrival, self.mu)
            return lambda s: _exp_transform(s, self.mu * (1.0 - sigma))
        if self.arrival.kind == "exponential":
            return lambda s: mg1_laplace(s, self.lam, self.service)
        return None

    def to_dict(self) -> dict:
        return {"arrival": self.arrival.to_dict(), "service": self.service.to_dict()}


@dataclass(frozen=True, eq=False)
class WaitingSample:
    values: np.ndarray
    seed: Optional[int]
    burn_in: int

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("waiting sample must be one-dimensional")
        if np.any(v < 0.0):
            raise ValueError("waiting times must be nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    def to_csv(self) -> str:
        """``index,w`` rows, 12 significant digits, CRLF line ends."""
        lines = ["index,w"]
        lines.extend(f"{i},{w:.12g}" for i, w in enumerate(self.values.tolist()))
        return "\r\n".join(lines) + "\r\n"


def make_rng(seed: Optional[int], *stream: int) -> np.random.Generator:
    """PCG64 generator for the sub-stream ``stream`` of ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(stream))))


def lindley_recursion(inter_arrivals: np.ndarray, services: np.ndarray) -> np.ndarray:
    """Sojourn times from ``W_1 = S_1``, ``W_{i+1} = max(W_i - A_i, 0) + S_{i+1}``."""
    a = np.asarray(inter_arrivals, dtype=float).tolist()
    s = np.asarray(services, dtype=float).tolist()
    if len(a) < len(s) - 1:
        raise ValueError("need one inter-arrival time per successive pair")
    out = [0.0] * len(s)
    if not s:
        return np.empty(0)
    w = s[0]
    out[0] = w
    for i in range(1, len(s)):
        d = w - a[i - 1]
        w = (d if d > 0.0 else 0.0) + s[i]
        out[i] = w
    return np.array(out)


def lindley_simulate(
    model: QueueModel,
    n: int,
    burn_in: int = DEFAULT_BURN_IN,
    seed: Optional[int] = 0,
    stream: tuple = (),
) -> WaitingSample:
    """Simulate ``burn_in + n`` qubits and keep the last ``n`` sojourn times."""
    if n <= 0:
        raise ValueError("n must be positive")
    if burn_in < 0:
        raise ValueError("burn_in must be nonnegative")
    rng = make_rng(seed, *stream)
    total = n + burn_in
    services = model.service.sample(rng, total)
    arrivals = model.arrival.sample(rng, total - 1)
    w = lindley_recursion(arrivals, services)
    return WaitingSample(w[burn_in:], seed=seed, burn_in=burn_in)


def batch_means_stderr(x: np.ndarray, batches: int = _BATCHES) -> float:
    """Standard error of the mean of a correlated stationary series.

    Uses non-overlapping batch means; short series fall back to the i.i.d.
    formula.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        return float("nan")
    if n < 20 * batches:
        return float(np.std(x, ddof=1) / math.sqrt(n))
    m = n // batches
    means = x[: m * batches].reshape(batches, m).mean(axis=1)
    return float(np.std(means, ddof=1) / math.sqrt(batches))


def empirical_laplace(sample: WaitingSample, s: float) -> tuple[float, float]:
    """``(mean exp(-s W), standard error)`` over the sample."""
    if len(sample) == 0:
        raise ValueError("empty waiting sample")
    if s < 0.0:
        raise ValueError("s must be nonnegative")
    v = np.exp(-s * sample.values)
    return float(v.mean()), batch_means_stderr(v)


def _exp_transform(s, rate: float):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0.0):
        raise ValueError("s must be nonnegative")
    out = rate / (rate + s)
    return float(out) if out.ndim == 0 else out


def mm1_laplace(s, lam: float, mu: float):
    """Transform of the ``Exp(mu - lam)`` M/M/1 sojourn time."""
    if not 0.0 < lam < mu:
        raise ValueError("M/M/1 needs 0 < lam < mu")
    return _exp_transform(s, mu - lam)


def gm1_sigma(arrival: Distribution, mu: float, damping: float = 1.0, max_iter: int = 10_000, tol: float = 1e-13) -> float:
    """Root in ``(0, 1)`` of ``sigma = E[exp(-mu (1 - sigma) A)]``.

    Fixed-point iteration from 0.5; if it has not settled within
    ``max_iter`` steps (slow near heavy traffic) the root is bracketed and
    bisected.
    """
    if not arrival.mean * mu > 1.0:
        raise ValueError("unstable G/M/1 queue: need E[A] > 1/mu")

    def g(x):
        return arrival.laplace(mu * (1.0 - x))

    sigma = 0.5
    for _ in range(max_iter):
        nxt = (1.0 - damping) * sigma + damping * g(sigma)
        if abs(nxt - g(nxt)) < tol:
            return _aitken_polish(g, float(nxt))
        sigma = nxt

    lo, hi = 0.0, 1.0 - 1e-3
    while g(hi) - hi >= 0.0:
        hi = 1.0 - (1.0 - hi) * 1e-2
        if 1.0 - hi < 1e-15:
            raise ConvergenceError("cannot bracket the G/M/1 root below 1")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) - mid > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16:
            break
    sigma = 0.5 * (lo + hi)
    if abs(sigma - g(sigma)) >= 1e-12:
        raise ConvergenceError(f"G/M/1 fixed point did not converge (residual {abs(sigma - g(sigma))!r})")
    return float(sigma)


def _aitken_polish(g, x: float, steps: int = 4) -> float:
    # a small residual still leaves an error of residual / (1 - g'(x)), which
    # grows near heavy traffic; Aitken steps remove it
    best, best_res = x, abs(g(x) - x)
    for _ in range(steps):
        x1 = g(best)
        x2 = g(x1)
        den = x2 - 2.0 * x1 + best
        if den == 0.0:
            break
        cand = best - (x1 - best) ** 2 / den
        if not 0.0 < cand < 1.0:
            break
        res = abs(g(cand) - cand)
        if res >= best_res:
            break
        best, best_res = cand, res
    return float(best)


def gm1_laplace(s, arrival: Distribution, mu: float):
    """``mu(1-sigma) / (mu(1-sigma) + s)``: the G/M/1 sojourn is exponential."""
    sigma = gm1_sigma(arrival, mu)
    return _exp_transform(s, mu * (1.0 - sigma))


def mg1_laplace(s, lam: float, service: Distribution):
    """Pollaczek-Khinchine sojourn transform ``(1-rho) s B(s) / (s - lam (1 - B(s)))``."""
    rho = lam * service.mean
    if not (lam > 0.0 and rho < 1.0):
        raise ValueError("unstable M/G/1 queue: need lam * E[S] < 1")
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0.0):
        raise ValueError("s must be nonnegative")
    b = np.asarray(service.laplace(s_arr), dtype=float)
    b_c = np.asarray(service.laplace_complement(s_arr), dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (1.0 - rho) * s_arr * b / (s_arr - lam * b_c)
    out = np.where(s_arr == 0.0, 1.0, out)
    return float(out) if out.ndim == 0 else out
