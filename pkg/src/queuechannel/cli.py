"""Command-line interface.

Every subcommand accepts ``--config FILE`` (YAML or JSON); explicit flags
override values from the file. Errors are reported on stderr as one JSON
object and a nonzero exit code: 2 for bad input, 3 when an internal
invariant check fails.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Iterable, List, Optional

import numpy as np
import yaml

from .capacity import gad_holevo, induced_report, unital_capacity
from .channels import (
    ChannelFamily,
    GadChannel,
    PauliChannel,
    consistent_axis_order,
    gad_to_pauli,
    invariant_maximizer_axes,
    is_entanglement_breaking,
    is_unital,
    m_phi,
    optimal_code,
)
from .queue_capacity import (
    DecoherenceModel,
    QueueChannelSpec,
    QueueTemplate,
    compare_arrival_dists,
    compare_service_dists,
    optimize_lambda,
    queue_capacity,
)
from .queueing import DEFAULT_BURN_IN, ConvergenceError, Distribution, QueueModel, WaitingSample
from .simulator import SimConfig, report_json, run_end_to_end

DEFAULT_SEED = 20220214
DIGITS = 12


class ConfigError(ValueError):
    """Bad configuration value; ``field`` names the offending key path."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        super().__init__(message)
        self.field = field
        self.line = line


class InvariantError(RuntimeError):
    pass


def fmt(x: Any) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.{DIGITS}g}"


def csv_text(header: List[str], rows: Iterable[Iterable[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def json_text(obj: Any) -> str:
    def default(o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(f"not JSON serializable: {type(o).__name__}")

    return json.dumps(obj, indent=2, sort_keys=True, default=default) + "\n"


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}", field="--config")
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8"))
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark is not None else None
        raise ConfigError(f"cannot parse {path}: {exc.problem}", field="--config", line=line) from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping", field="--config")
    return data


def _number(d: dict, key: str, where: str) -> float:
    if key not in d:
        raise ConfigError(f"missing field {key!r}", field=f"{where}.{key}")
    try:
        return float(d[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{d[key]!r} is not a number", field=f"{where}.{key}") from exc


def parse_channel(d: Any, where: str = "channel"):
    """``{type: pauli, p: [..]}``, ``{type: gad, p, n}`` or ``{type: gad-family, kappa}``."""
    if not isinstance(d, dict) or "type" not in d:
        raise ConfigError("channel config needs a 'type'", field=where)
    kind = d["type"]
    try:
        if kind == "pauli":
            p = d.get("p")
            if not isinstance(p, (list, tuple)) or len(p) != 3:
                raise ConfigError("pauli channel needs p: [p1, p2, p3]", field=f"{where}.p")
            return PauliChannel(*(float(v) for v in p))
        if kind == "gad":
            return GadChannel(_number(d, "p", where), _number(d, "n", where))
        if kind == "gad-family":
            return ChannelFamily.symmetric_gad(_number(d, "kappa", where), float(d.get("flight_time", 0.0)))
        if kind == "depolarizing-family":
            return ChannelFamily.depolarizing(_number(d, "kappa", where))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc), field=where) from exc
    raise ConfigError(f"unknown channel type {kind!r}", field=f"{where}.type")


def parse_distribution(d: Any, where: str) -> Distribution:
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError("distribution needs a 'kind'", field=where)
    try:
        return Distribution(d["kind"], dict(d.get("params", {})))
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), field=where) from exc


def parse_queue(d: Any, where: str = "queue") -> QueueModel:
    if not isinstance(d, dict):
        raise ConfigError("queue config must be a mapping", field=where)
    arrival = parse_distribution(d.get("arrival"), f"{where}.arrival")
    service = parse_distribution(d.get("service"), f"{where}.service")
    try:
        return QueueModel(arrival, service)
    except ValueError as exc:
        raise ConfigError(str(exc), field=where) from exc


class Settings:
    """Flag values layered over the config file layered over defaults."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self.args = args
        self.config = config

    def get(self, name: str, default: Any = None) -> Any:
        v = getattr(self.args, name, None)
        if v is not None:
            return v
        return self.config.get(name, default)


def _template(st: Settings) -> QueueTemplate:
    return QueueTemplate(
        arrival=st.get("arrival", "exponential"),
        service=st.get("service", "exponential"),
        arrival_shape=float(st.get("shape", 2.0)),
        service_shape=float(st.get("shape", 2.0)),
        arrival_spread=float(st.get("spread", 0.5)),
        service_spread=float(st.get("spread", 0.5)),
    )


def _queue(st: Settings) -> QueueModel:
    if getattr(st.args, "lam", None) is None and "queue" in st.config:
        return parse_queue(st.config["queue"])
    lam, mu = st.get("lam"), st.get("mu", 1.0)
    if lam is None:
        raise ConfigError("arrival rate not given (use --lam or a 'queue' config block)", field="lam")
    try:
        return _template(st).build(float(lam), float(mu))
    except ValueError as exc:
        raise ConfigError(str(exc), field="queue") from exc


# ---------------------------------------------------------------- commands


def _plain(v: Any) -> str:
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_plain(t) for t in v) + "]"
    if isinstance(v, (bool, float, int, np.generic)):
        return fmt(v)
    return str(v)


def cmd_chan_info(st: Settings) -> str:
    args = st.args
    if args.pauli is not None:
        ch = PauliChannel(*args.pauli)
    elif args.gad is not None:
        ch = GadChannel(*args.gad)
    elif args.gad_family is not None:
        ch = ChannelFamily.symmetric_gad(args.gad_family)
    elif "channel" in st.config:
        ch = parse_channel(st.config["channel"])
    else:
        raise ConfigError("no channel given (use --pauli, --gad, --gad-family or a 'channel' config block)", field="channel")

    info: dict = {}
    if isinstance(ch, PauliChannel):
        code = optimal_code(ch)
        info = {
            "type": "pauli",
            "p": list(ch.probs),
            "attenuations": ch.attenuations.tolist(),
            "m_phi": m_phi(ch),
            "optimal_axis": code.axis,
            "chi": unital_capacity(ch),
            "unital": is_unital(ch),
        }
    elif isinstance(ch, GadChannel):
        sol = gad_holevo(ch.p, ch.n)
        rep = induced_report(ch.p, ch.n)
        info = {
            "type": "gad",
            "p": ch.p,
            "n": ch.n,
            "chi": sol.chi,
            "z_star": sol.z_star,
            "unital": is_unital(ch),
            "entanglement_breaking": is_entanglement_breaking(ch),
            "c_n1": rep.c_n1,
            "c_n2": rep.c_n2,
            "c_n3": rep.c_n3,
            "delta": rep.delta,
            "p_star": rep.p_star,
        }
        if info["unital"]:
            pc = gad_to_pauli(ch.p)
            info.update(
                attenuations=pc.attenuations.tolist(),
                m_phi=m_phi(pc),
                optimal_axis=optimal_code(pc).axis,
            )
    else:
        grid = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, 61)])
        ws = [float(w) for w in (args.w or [0.0, 1.0, 10.0])]
        info = {
            "type": ch.kind,
            "kappa": ch.kappa,
            "pauli_ordered": consistent_axis_order(ch, grid) is not None,
            "invariant_axes": invariant_maximizer_axes(ch, grid),
            "at": [
                {
                    "w": w,
                    "p": list(ch.at(w).probs),
                    "m_phi": m_phi(ch.at(w)),
                    "chi": unital_capacity(ch.at(w)),
                }
                for w in ws
            ],
        }
    if st.get("format") == "json":
        return json_text(info)
    lines = []
    for k, v in info.items():
        if k == "at":
            for entry in v:
                lines.append("at w=" + fmt(entry["w"]) + ": " + ", ".join(f"{key}={_plain(val)}" for key, val in entry.items() if key != "w"))
        else:
            lines.append(f"{k}: {_plain(v)}")
    return "\n".join(lines) + "\n"


def cmd_gadc_sweep(st: Settings) -> str:
    p_min, p_max = float(st.get("p_min", 0.0)), float(st.get("p_max", 1.0))
    steps = int(st.get("p_steps", 21))
    ns = [float(v) for v in st.get("n", [0.0, 0.1, 0.25, 0.5])]
    if steps < 1 or not 0.0 <= p_min <= p_max <= 1.0:
        raise ConfigError("invalid p range", field="p")
    if not ns or any(not 0.0 <= n <= 1.0 for n in ns):
        raise ConfigError("n values must lie in [0, 1]", field="n")
    points = [(float(p), n) for n in ns for p in np.linspace(p_min, p_max, steps)]
    threads = max(1, int(st.get("threads", 1)))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            reports = list(pool.map(lambda pn: induced_report(*pn), points))
    else:
        reports = [induced_report(*pn) for pn in points]

    bad = []
    for r in reports:
        if r.delta < -1e-9:
            bad.append(f"delta {r.delta!r} < 0 at p={r.p}, n={r.n}")
        if r.n == 0.5 and abs(r.delta) > 1e-6:
            bad.append(f"delta {r.delta!r} != 0 at n=0.5, p={r.p}")
    header = ["p", "n", "chi", "c_n1", "c_n2", "c_n3", "delta", "p_star", "is_eb"]
    rows = [
        [r.p, r.n, r.chi, r.c_n1, r.c_n2, r.c_n3, r.delta, r.p_star, is_entanglement_breaking(GadChannel(r.p, r.n))]
        for r in reports
    ]
    if st.get("format") == "json":
        out = json_text([dict(zip(header, row)) for row in rows])
    else:
        out = csv_text(header, rows)
    if bad:
        raise InvariantError("; ".join(bad[:5]), out)
    return out


def _result_dict(r) -> dict:
    return {
        "capacity": r.capacity,
        "method": r.method,
        "lambda": r.lam,
        "mu": r.mu,
        "kappa": r.kappa,
        "stderr": r.stderr,
        "tail_bound": r.tail_bound,
        "terms": r.terms,
    }


def cmd_queue_capacity(st: Settings) -> str:
    model = _queue(st)
    kappa = float(st.get("kappa", 0.0))
    deco = DecoherenceModel(kappa, float(st.get("flight_time", 0.0)))
    method = st.get("method", "auto")
    samples = int(st.get("samples", 1_000_000))
    burn_in = int(st.get("burn_in", DEFAULT_BURN_IN))
    seed = int(st.get("seed", DEFAULT_SEED))
    out: dict = {"queue": model.to_dict()}
    if method in ("series", "both"):
        out["series"] = _result_dict(queue_capacity(model, deco, "analytic-series"))
    if method in ("monte-carlo", "both"):
        out["monte_carlo"] = _result_dict(queue_capacity(model, deco, "monte-carlo", samples, burn_in, seed))
    if method == "auto":
        r = queue_capacity(model, deco, None, samples, burn_in, seed)
        out["series" if r.method == "analytic-series" else "monte_carlo"] = _result_dict(r)
    if method == "both":
        s, m = out["series"], out["monte_carlo"]
        z = (m["capacity"] - s["capacity"]) / m["stderr"] if m["stderr"] else 0.0
        out["agreement"] = {"z": z, "within_3se": abs(z) <= 3.0}
    if st.get("format") == "csv":
        rows = [[k, v["capacity"], v["stderr"] if v["stderr"] is not None else "", v["tail_bound"] if v["tail_bound"] is not None else ""] for k, v in out.items() if k in ("series", "monte_carlo")]
        return csv_text(["method", "capacity", "stderr", "tail_bound"], rows)
    return json_text(out)


def cmd_sweep_lambda(st: Settings) -> str:
    mu = float(st.get("mu", 1.0))
    kappas = [float(k) for k in st.get("kappa", [0.1, 0.5])]
    points = int(st.get("points", 200))
    tmpl = _template(st)
    seed = int(st.get("seed", DEFAULT_SEED))
    samples = int(st.get("samples", 200_000))
    if points < 3:
        raise ConfigError("need at least 3 sweep points", field="points")
    rows = []
    for kappa in [0.0] + [k for k in kappas if k != 0.0]:
        opt = optimize_lambda(mu, kappa, tmpl, n_grid=points, mc_samples=samples, seed=seed)
        for lam, cap in zip(opt.lambdas, opt.capacities):
            rows.append([kappa, lam, cap, 0])
        rows.append([kappa, opt.lam_star, opt.capacity_star, 1])
    header = ["kappa", "lambda", "capacity", "is_optimal"]
    if st.get("format") == "json":
        return json_text([dict(zip(header, r)) for r in rows])
    return csv_text(header, rows)


def _dists(st: Settings, mean: float) -> List[Distribution]:
    kinds = st.get("dists", ["deterministic", "exponential"])
    try:
        return [Distribution.with_mean(k, mean, float(st.get("shape", 2.0)), float(st.get("spread", 0.5))) for k in kinds]
    except ValueError as exc:
        raise ConfigError(str(exc), field="dists") from exc


def _ranking_output(st: Settings, ranked, kappa: float, with_sigma: bool, check_first: bool) -> str:
    header = ["rank", "name", "capacity", "uncertainty"] + (["sigma"] if with_sigma else [])
    rows = []
    for i, r in enumerate(ranked, 1):
        row = [i, r.name, r.capacity, r.uncertainty]
        if with_sigma:
            row.append(r.sigma)
        rows.append(row)
    if st.get("format") == "json":
        out = json_text([dict(zip(header, row)) for row in rows])
    else:
        out = csv_text(header, rows)
    if check_first and kappa > 0.0 and "deterministic" in [r.name for r in ranked] and ranked[0].name != "deterministic":
        raise InvariantError("deterministic distribution does not rank first", out)
    return out


def cmd_compare_service(st: Settings) -> str:
    lam, mu, kappa = float(st.get("lam", 0.5)), float(st.get("mu", 1.0)), float(st.get("kappa", 0.2))
    ranked = compare_service_dists(lam, mu, kappa, _dists(st, 1.0 / mu))
    # no ranking check here: with W counting the own service time, exponential
    # service overtakes deterministic once kappa is large compared with lam
    return _ranking_output(st, ranked, kappa, with_sigma=False, check_first=False)


def cmd_compare_arrival(st: Settings) -> str:
    lam, mu, kappa = float(st.get("lam", 0.5)), float(st.get("mu", 1.0)), float(st.get("kappa", 0.2))
    ranked = compare_arrival_dists(lam, mu, kappa, _dists(st, 1.0 / lam))
    return _ranking_output(st, ranked, kappa, with_sigma=True, check_first=True)


def cmd_simulate(st: Settings):
    model = _queue(st)
    if "channel" in st.config and getattr(st.args, "kappa", None) is None:
        fam = parse_channel(st.config["channel"])
        if not isinstance(fam, ChannelFamily):
            raise ConfigError("simulate needs a channel family", field="channel.type")
    else:
        fam = ChannelFamily.symmetric_gad(float(st.get("kappa", 0.0)), float(st.get("flight_time", 0.0)))
    edges = st.get("bucket_edges")
    cfg = SimConfig(
        spec=QueueChannelSpec(model, fam, "monte-carlo"),
        n_bits=int(st.get("n_bits", 100_000)),
        seed=int(st.get("seed", DEFAULT_SEED)),
        mode=st.get("mode", "blind"),
        bucket_edges=[float(e) for e in edges] if edges else None,
        n_buckets=int(st.get("buckets", 10)),
        burn_in=int(st.get("burn_in", DEFAULT_BURN_IN)),
        threads=max(1, int(st.get("threads", 1))),
    )
    report = run_end_to_end(cfg)
    sample_out = st.get("sample_out")
    if sample_out:
        with open(sample_out, "w", encoding="utf-8", newline="") as fh:
            fh.write(WaitingSample(report.waiting, cfg.seed, cfg.burn_in).to_csv())
    for b in report.buckets:
        if b.n and not 0.0 <= b.crossover <= 1.0:
            raise InvariantError("crossover outside [0, 1]", None)
    if st.get("format") == "json":
        return report_json(report) + "\n"
    return report.to_csv(), report_json(report) + "\n"


# ------------------------------------------------------------------ parser


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("common options")
    g.add_argument("--config", default=argparse.SUPPRESS, help="YAML/JSON config file; flags override it")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help=f"RNG seed (default {DEFAULT_SEED})")
    g.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker cap")
    g.add_argument("--out", default=argparse.SUPPRESS, help="output file (default stdout)")
    g.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS)


def _queue_flags(p: argparse.ArgumentParser, lam_default: bool = False) -> None:
    p.add_argument("--lam", type=float, help="arrival (qubit preparation) rate")
    p.add_argument("--mu", type=float, help="service rate (default 1)")
    kinds = Distribution.KINDS
    p.add_argument("--arrival", choices=kinds, help="inter-arrival distribution kind (default exponential)")
    p.add_argument("--service", choices=kinds, help="service distribution kind (default exponential)")
    p.add_argument("--shape", type=float, help="gamma shape parameter (default 2)")
    p.add_argument("--spread", type=float, help="uniform half-width relative to the mean (default 0.5)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="queuechannel", description=__doc__.splitlines()[0])
    _common(parser)
    groups = parser.add_subparsers(dest="group", required=True)

    chan = groups.add_parser("chan", help="single-channel properties").add_subparsers(dest="cmd", required=True)
    p = chan.add_parser("info", help="attenuations, M_Phi, optimal axis, capacity, unitality, EB status")
    _common(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--pauli", type=float, nargs=3, metavar=("P1", "P2", "P3"))
    src.add_argument("--gad", type=float, nargs=2, metavar=("P", "N"))
    src.add_argument("--gad-family", type=float, metavar="KAPPA")
    p.add_argument("--w", type=float, nargs="+", help="waiting times at which to evaluate a family")
    p.set_defaults(func=cmd_chan_info)

    gadc = groups.add_parser("gadc", help="GAD channel sweeps").add_subparsers(dest="cmd", required=True)
    p = gadc.add_parser("sweep", help="Holevo information vs induced channels over p")
    _common(p)
    p.add_argument("--p-min", type=float)
    p.add_argument("--p-max", type=float)
    p.add_argument("--p-steps", type=int)
    p.add_argument("--n", type=float, nargs="+")
    p.set_defaults(func=cmd_gadc_sweep)

    queue = groups.add_parser("queue", help="queue-channel capacity").add_subparsers(dest="cmd", required=True)
    p = queue.add_parser("capacity", help="capacity per unit time of a symmetric GAD queue-channel")
    _common(p)
    _queue_flags(p)
    p.add_argument("--kappa", type=float, help="decoherence rate")
    p.add_argument("--flight-time", type=float)
    p.add_argument("--method", choices=("auto", "series", "monte-carlo", "both"))
    p.add_argument("--samples", type=int, help="Lindley samples for Monte Carlo")
    p.add_argument("--burn-in", type=int)
    p.set_defaults(func=cmd_queue_capacity)

    p = queue.add_parser("sweep-lambda", help="capacity vs arrival rate, one curve per kappa")
    _common(p)
    _queue_flags(p)
    p.add_argument("--kappa", type=float, nargs="+")
    p.add_argument("--points", type=int)
    p.add_argument("--samples", type=int, help="Lindley samples per point when no transform exists")
    p.set_defaults(func=cmd_sweep_lambda)

    for name, func, help_ in (
        ("compare-service", cmd_compare_service, "M/G/1: rank service distributions"),
        ("compare-arrival", cmd_compare_arrival, "G/M/1: rank arrival distributions"),
    ):
        p = queue.add_parser(name, help=help_)
        _common(p)
        p.add_argument("--lam", type=float)
        p.add_argument("--mu", type=float)
        p.add_argument("--kappa", type=float)
        p.add_argument("--dists", nargs="+", choices=Distribution.KINDS)
        p.add_argument("--shape", type=float)
        p.add_argument("--spread", type=float)
        p.set_defaults(func=func)

    p = groups.add_parser("simulate", help="end-to-end Monte Carlo of the product protocol")
    _common(p)
    _queue_flags(p)
    p.add_argument("--kappa", type=float)
    p.add_argument("--flight-time", type=float)
    p.add_argument("--n-bits", type=int)
    p.add_argument("--mode", choices=("blind", "waiting-aware"))
    p.add_argument("--buckets", type=int, help="number of equal-population W-buckets (default 10)")
    p.add_argument("--bucket-edges", type=float, nargs="+")
    p.add_argument("--burn-in", type=int)
    p.add_argument("--sample-out", help="also write the waiting times as index,w CSV")
    p.set_defaults(func=cmd_simulate)
    return parser


def _write(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _fail(kind: str, exc: BaseException, code: int) -> int:
    err = {"error": kind, "message": str(exc)}
    for attr in ("field", "line"):
        v = getattr(exc, attr, None)
        if v is not None:
            err[attr] = v
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return code


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    out = getattr(args, "out", None)
    try:
        config = load_config(getattr(args, "config", None))
        st = Settings(args, config)
        out = st.get("out")
        result = args.func(st)
    except InvariantError as exc:
        message, partial = exc.args
        if partial:
            _write(partial, out)
        return _fail("invariant", RuntimeError(message), 3)
    except ConfigError as exc:
        return _fail("config", exc, 2)
    except ConvergenceError as exc:
        return _fail("convergence", exc, 3)
    except ValueError as exc:
        return _fail("input", exc, 2)
    if isinstance(result, tuple):
        text, summary = result
        _write(text, out)
        if out is not None:
            _write(summary, str(Path(out).with_suffix(".json")))
    else:
        _write(result, out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
