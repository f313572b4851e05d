"""Channel capacities: unital qubit channels, GAD Holevo information, and the
three natural induced classical channels of the GAD channel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._optimize import grid_golden_max
from .channels import GadChannel, PauliChannel, eb_threshold, gad_bloch_map, m_phi
from .qubit_core import BinaryChannel, BlochVector, _h, bac_capacity


@dataclass(frozen=True)
class HolevoSolution:
    """Optimal two-state ensemble for ``chi^(1)(A_{p,n})``.

    ``u`` is the z-coordinate of the averaged output state and ``r_out`` the
    Bloch norm of either ensemble output; ``closed_form`` re-evaluates the
    optimum through ``(f(r) - log2(1-u^2) - u f'(u)) / 2``.
    """

    chi: float
    z_star: float
    r_plus: BlochVector
    r_minus: BlochVector
    u: float
    r_out: float
    closed_form: float


@dataclass(frozen=True)
class InducedChannelReport:
    p: float
    n: float
    chi: float
    c_n1: float
    c_n2: float
    c_n3: float
    n1: BinaryChannel
    n2: BinaryChannel
    n3_flip: float
    delta: float
    p_star: float


def unital_capacity(ch: PauliChannel) -> float:
    """Classical capacity ``1 - h(M_Phi)``."""
    return 1.0 - float(_h(m_phi(ch)))


def holevo_objective(p: float, n: float, z):
    """Holevo quantity of the ensemble ``{(+-sqrt(1-z^2), 0, z)}`` with equal weights.

    Vectorized over ``z``. The output states are obtained from the Bloch map
    of :func:`gad_bloch_map`; entropies are ``h((1 - |r|)/2)``.
    """
    z = np.asarray(z, dtype=float)
    x = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    zeros = np.zeros_like(z)
    avg = gad_bloch_map(p, n, np.stack([zeros, zeros, z], axis=-1))
    plus = gad_bloch_map(p, n, np.stack([x, zeros, z], axis=-1))
    minus = gad_bloch_map(p, n, np.stack([-x, zeros, z], axis=-1))
    s_avg = _h(0.5 * (1.0 - np.minimum(np.linalg.norm(avg, axis=-1), 1.0)))
    s_plus = _h(0.5 * (1.0 - np.minimum(np.linalg.norm(plus, axis=-1), 1.0)))
    s_minus = _h(0.5 * (1.0 - np.minimum(np.linalg.norm(minus, axis=-1), 1.0)))
    out = s_avg - 0.5 * (s_plus + s_minus)
    return float(out) if out.ndim == 0 else out


def _f(x: float) -> float:
    # (1+x) log2(1+x) + (1-x) log2(1-x), continuous at |x| = 1
    x = min(abs(x), 1.0)
    a = (1.0 + x) * math.log2(1.0 + x)
    b = (1.0 - x) * math.log2(1.0 - x) if x < 1.0 else 0.0
    return a + b


def holevo_closed_form(u: float, r_out: float) -> float:
    """``(f(r) - log2(1 - u^2) - u f'(u)) / 2``, written as ``(f(r) - f(u)) / 2``.

    The two forms coincide since ``f(u) = log2(1-u^2) + u log2((1+u)/(1-u))``;
    the second stays finite at ``|u| = 1``.
    """
    return 0.5 * (_f(r_out) - _f(u))


def gad_holevo(p: float, n: float, grid_step: float = 1e-3, tol: float = 1e-10) -> HolevoSolution:
    """Holevo information ``chi^(1)(A_{p,n})`` by direct maximization over ``z``."""
    GadChannel(p, n)
    n_grid = int(round(2.0 / grid_step)) + 1
    z, chi = grid_golden_max(
        lambda t: holevo_objective(p, n, t),
        -1.0,
        1.0,
        n_grid=n_grid,
        tol=tol,
        f_vec=lambda t: holevo_objective(p, n, t),
    )
    x = math.sqrt(max(1.0 - z * z, 0.0))
    u = (1.0 - p) * z + p * (1.0 - 2.0 * n)
    r_out = math.sqrt(max((1.0 - p) * x * x + u * u, 0.0))
    return HolevoSolution(
        chi=min(max(chi, 0.0), 1.0),
        z_star=z,
        r_plus=BlochVector(x, 0.0, z),
        r_minus=BlochVector(-x, 0.0, z),
        u=u,
        r_out=r_out,
        closed_form=holevo_closed_form(u, r_out),
    )


def holevo_stationarity_residual(p: float, n: float, u: float, r_out: float) -> float:
    """``(p u - p(1-2n)) f'(r) + r (1-p) f'(u)``, zero at an interior optimum.

    Obtained by differentiating the objective in ``z``. Not used by the
    solver; reported as a diagnostic.
    """

    def fprime(x):
        x = max(min(x, 1.0 - 1e-16), -1.0 + 1e-16)
        return math.log2((1.0 + x) / (1.0 - x))

    return (p * u - p * (1.0 - 2.0 * n)) * fprime(r_out) + r_out * (1.0 - p) * fprime(u)


def induced_n1(p: float, n: float) -> tuple[BinaryChannel, float]:
    """Computational-basis encoding and measurement: ``BAC(pn, p(1-n))``."""
    GadChannel(p, n)
    ch = BinaryChannel(p * n, p * (1.0 - n))
    return ch, bac_capacity(ch)


def _n2_direct(p: float, n: float) -> BinaryChannel:
    # encode on the norm-maximizing state, project on its normalized output
    c = 1.0 - 2.0 * n
    rho = np.array([2.0 * math.sqrt(n * (1.0 - n)), 0.0, c])
    out0 = gad_bloch_map(p, n, rho)
    out1 = gad_bloch_map(p, n, -rho)
    norm0 = float(np.linalg.norm(out0))
    if norm0 == 0.0:
        return BinaryChannel(0.5, 0.5)
    tau = out0 / norm0
    q01 = 1.0 - 0.5 * (1.0 + norm0)
    q10 = 0.5 * (1.0 + float(out1 @ tau))
    return BinaryChannel(min(max(q01, 0.0), 1.0), min(max(q10, 0.0), 1.0))


def induced_n2(p: float, n: float) -> tuple[BinaryChannel, float]:
    """Norm-maximizing encoding ``rho*`` / ``I - rho*`` with projection on ``tau*``.

    ``|r'|^2 = 4n(1-n)(1-p) + (1-2n)^2`` gives ``q01 = (1 - |r'|)/2`` and
    ``q10 = (1 + (p(1 + (1-2n)^2) - 1)/|r'|)/2``.
    """
    GadChannel(p, n)
    r2 = 4.0 * n * (1.0 - n) * (1.0 - p) + (1.0 - 2.0 * n) ** 2
    r = math.sqrt(max(r2, 0.0))
    if r == 0.0:
        ch = _n2_direct(p, n)
    else:
        q01 = 0.5 * (1.0 - r)
        q10 = 0.5 * (1.0 + (p * (1.0 + (1.0 - 2.0 * n) ** 2) - 1.0) / r)
        ch = BinaryChannel(min(max(q01, 0.0), 1.0), min(max(q10, 0.0), 1.0))
    return ch, bac_capacity(ch)


def induced_n3(p: float) -> tuple[float, float]:
    """Equatorial encoding ``(+-1, 0, 0)`` measured in the ``|x+>`` basis."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p!r} outside [0, 1]")
    q = 0.5 * (1.0 - math.sqrt(1.0 - p))
    return q, 1.0 - float(_h(q))


def induced_report(p: float, n: float) -> InducedChannelReport:
    n1, c1 = induced_n1(p, n)
    n2, c2 = induced_n2(p, n)
    q3, c3 = induced_n3(p)
    chi = gad_holevo(p, n).chi
    return InducedChannelReport(
        p=p,
        n=n,
        chi=chi,
        c_n1=c1,
        c_n2=c2,
        c_n3=c3,
        n1=n1,
        n2=n2,
        n3_flip=q3,
        delta=chi - c3,
        p_star=eb_threshold(n),
    )
