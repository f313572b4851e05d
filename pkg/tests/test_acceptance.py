"""Acceptance gate.

Each test prints one ``PASS``/``FAIL`` line (criterion, measured value,
tolerance, wall time) straight to the terminal, then asserts. Wall-time
budgets count toward the verdict.
"""
import math
import time

import numpy as np
import pytest

from queuechannel.capacity import gad_holevo, induced_report
from queuechannel.channels import ChannelFamily, GadChannel, PauliChannel, apply_gad, gad_bloch_map, optimal_code
from queuechannel.cli import DEFAULT_SEED
from queuechannel.qubit_core import BinaryChannel, BlochVector, bac_capacity
from queuechannel.queue_capacity import (
    DecoherenceModel,
    QueueChannelSpec,
    capacity_expectation,
    capacity_series,
    optimize_lambda,
    queue_capacity,
)
from queuechannel.queueing import (
    Distribution,
    QueueModel,
    WaitingSample,
    batch_means_stderr,
    gm1_laplace,
    gm1_sigma,
    lindley_simulate,
    mg1_laplace,
    mm1_laplace,
)
from queuechannel.simulator import SimConfig, clopper_pearson, run_end_to_end

from oracles import h, mi_grid_capacity, pauli_max_overlap


@pytest.fixture
def verdict(capsys):
    start = time.perf_counter()

    def emit(number: int, title: str, ok: bool, detail: str, budget: float) -> None:
        elapsed = time.perf_counter() - start
        ok = bool(ok) and elapsed < budget
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number} {title}: {detail}; {elapsed:.1f}s of {budget:.0f}s")
        assert ok, f"criterion {number} {title}: {detail}"

    return emit


def mm1(lam=0.5, mu=1.0):
    return QueueModel(Distribution.exponential(lam), Distribution.exponential(mu))


def test_unital_coincidence(verdict):
    worst = 0.0
    for p in np.linspace(0.0, 1.0, 21):
        target = 1.0 - float(h((1.0 - math.sqrt(1.0 - p)) / 2.0))
        worst = max(worst, abs(gad_holevo(float(p), 0.5).chi - target))
    verdict(1, "unital coincidence", worst <= 1e-6, f"max error {worst:.2e} (tol 1e-6)", 5)


def test_induced_ordering(verdict):
    grid = np.linspace(0.0, 1.0, 21)
    bad = []
    for p in grid:
        for n in grid:
            r = induced_report(float(p), float(n))
            if not (r.c_n1 <= r.c_n2 + 1e-9 <= r.c_n3 + 2e-9 and r.delta >= -1e-9):
                bad.append((float(p), float(n)))
    gap = induced_report(0.5, 0.25).delta
    verdict(2, "induced ordering", not bad and gap > 1e-4, f"{len(bad)} violations on 21x21, delta(0.5, 0.25) = {gap:.6f}", 60)


def test_product_decoding(verdict):
    # constant damping p = 0.5 regardless of waiting time, so every bit is i.i.d.
    fam = ChannelFamily.symmetric_gad(0.0, p_eff=lambda w: np.full(np.shape(w), 0.5))
    queue = QueueModel(Distribution.deterministic(2.0), Distribution.deterministic(1.0))
    rep = run_end_to_end(SimConfig(QueueChannelSpec(queue, fam, "monte-carlo"), 1_000_000, seed=DEFAULT_SEED))
    target = (1.0 - math.sqrt(0.5)) / 2.0
    lo, hi = clopper_pearson(rep.flips, rep.total_qubits)
    rate = rep.flips / rep.total_qubits
    verdict(3, "product decoding", lo <= target <= hi, f"flip rate {rate:.6f}, exact 3-sigma interval [{lo:.6f}, {hi:.6f}], target {target:.6f}", 30)


def test_series_vs_simulation(verdict):
    lam, kappa = 0.5, 0.2
    series = capacity_series(lam, kappa, lambda s: mm1_laplace(s, lam, 1.0))
    mc = queue_capacity(mm1(lam), DecoherenceModel(kappa), "monte-carlo", n_samples=10_000_000, seed=DEFAULT_SEED)
    diff = abs(series.capacity - mc.capacity)
    ok = series.tail_bound < 1e-10 and diff <= 3 * mc.stderr
    verdict(4, "series vs simulation", ok, f"series {series.capacity:.8f} (tail {series.tail_bound:.1e}), mc {mc.capacity:.8f} +- {mc.stderr:.1e}, |diff| = {diff / mc.stderr:.2f} SE", 120)


def test_noiseless_limit(verdict):
    errs = []
    for lam in (0.1, 0.5, 0.9):
        series = capacity_series(lam, 0.0, lambda s: mm1_laplace(s, lam, 1.0))
        spec = QueueChannelSpec.symmetric_gad(mm1(lam), DecoherenceModel(0.0), "monte-carlo")
        sample = WaitingSample(np.random.default_rng(DEFAULT_SEED).exponential(1.0 / (1.0 - lam), 10_000), seed=None, burn_in=0)
        expect = capacity_expectation(spec, sample)
        errs += [abs(series.capacity - lam), abs(expect.capacity - lam)]
    worst = max(errs)
    verdict(5, "noiseless limit", worst <= 1e-12, f"max error over series and expectation {worst:.1e} (tol 1e-12)", 1)


def test_lambda_sweep_shape(verdict):
    low = optimize_lambda(1.0, 0.1)
    high = optimize_lambda(1.0, 0.5)
    edge = [capacity_series(0.999, k, lambda s: mm1_laplace(s, 0.999, 1.0)).capacity for k in (0.1, 0.5)]
    interior = all(0.0 < o.lam_star < 0.999 for o in (low, high))
    below = np.array_equal(low.lambdas, high.lambdas) and bool(np.all(high.capacities < low.capacities))
    ok = interior and max(edge) < 0.01 and below
    detail = (
        f"lam* = {low.lam_star:.4f} / {high.lam_star:.4f}, C(0.999) = {edge[0]:.5f} / {edge[1]:.5f}, "
        f"kappa=0.5 curve below kappa=0.1: {below}"
    )
    verdict(6, "lambda sweep shape", ok, detail, 60)


def test_distribution_optimality(verdict):
    lam, mu, kappa = 0.5, 1.0, 0.2
    det_s, exp_s = Distribution.deterministic(1.0 / mu), Distribution.exponential(mu)
    det_a, exp_a = Distribution.deterministic(1.0 / lam), Distribution.exponential(lam)
    svc = [capacity_series(lam, kappa, lambda s, d=d: mg1_laplace(s, lam, d)) for d in (det_s, exp_s)]
    arr = [capacity_series(lam, kappa, lambda s, d=d: gm1_laplace(s, d, mu)) for d in (det_a, exp_a)]
    svc_margin = svc[0].capacity - svc[1].capacity
    arr_margin = arr[0].capacity - arr[1].capacity
    svc_se = math.hypot(svc[0].uncertainty, svc[1].uncertainty)
    arr_se = math.hypot(arr[0].uncertainty, arr[1].uncertainty)

    # simulated cross-check with a Monte Carlo error bar
    dec = DecoherenceModel(kappa)
    mc = {
        name: queue_capacity(QueueModel(a, s), dec, "monte-carlo", n_samples=2_000_000, seed=DEFAULT_SEED)
        for name, a, s in [("det_s", exp_a, det_s), ("exp", exp_a, exp_s), ("det_a", det_a, exp_s)]
    }
    mc_svc = mc["det_s"].capacity - mc["exp"].capacity
    mc_arr = mc["det_a"].capacity - mc["exp"].capacity
    mc_svc_se = math.hypot(mc["det_s"].stderr, mc["exp"].stderr)
    mc_arr_se = math.hypot(mc["det_a"].stderr, mc["exp"].stderr)

    ok = (
        svc_margin > 10 * svc_se and svc_margin > 0
        and arr_margin > 10 * arr_se and arr_margin > 0
        and mc_svc > 10 * mc_svc_se and mc_arr > 10 * mc_arr_se
    )
    detail = (
        f"service margin {svc_margin:.6f} (series bound {svc_se:.1e}, mc {mc_svc / mc_svc_se:.0f} SE), "
        f"arrival margin {arr_margin:.6f} (series bound {arr_se:.1e}, mc {mc_arr / mc_arr_se:.0f} SE)"
    )
    verdict(7, "distribution optimality", ok, detail, 120)


def test_queue_correctness(verdict):
    w = lindley_simulate(mm1(), 1_000_000, seed=DEFAULT_SEED).values
    se = batch_means_stderr(w)
    z = (w.mean() - 2.0) / se
    sigma_err = max(abs(gm1_sigma(Distribution.exponential(lam), 1.0) - lam) for lam in (0.1, 0.3, 0.5, 0.7, 0.9))
    ok = abs(z) <= 3 and sigma_err <= 1e-12
    verdict(8, "queue correctness", ok, f"mean sojourn {w.mean():.5f} +- {se:.5f} ({z:+.2f} SE), sigma error {sigma_err:.1e}", 30)


def test_oracle_suites(verdict):
    qs = np.linspace(0.0, 1.0, 50)
    bac_err = max(abs(bac_capacity(BinaryChannel(float(a), float(b))) - mi_grid_capacity(a, b)) for a in qs for b in qs)

    rng = np.random.default_rng(DEFAULT_SEED)
    code_err = 0.0
    for _ in range(100):
        probs = rng.dirichlet(np.ones(4))[:3]
        ch = PauliChannel(*probs)
        code_err = max(code_err, abs(optimal_code(ch).m_phi - pauli_max_overlap(ch.probs)))

    pn = rng.random((10_000, 2))
    rs = rng.normal(size=(10_000, 3))
    rs *= (rng.random(10_000) ** (1 / 3) / np.linalg.norm(rs, axis=1))[:, None]
    bloch = gad_bloch_map(pn[:, 0], pn[:, 1], rs)
    kraus_err = max(
        float(np.max(np.abs(apply_gad(GadChannel(p, n), BlochVector(*r)).as_array() - b)))
        for (p, n), r, b in zip(pn, rs, bloch)
    )
    ok = bac_err <= 1e-6 and code_err <= 1e-6 and kraus_err <= 1e-12
    verdict(9, "oracle suites", ok, f"bac {bac_err:.1e}, optimal code {code_err:.1e}, kraus vs bloch {kraus_err:.1e}", 120)
