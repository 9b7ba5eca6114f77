"""overlapq command line: analytic | simulate | verify | convolve.

Settings resolve as defaults < $OVERLAPQ_SEED (seed only) < --config file < flags.
A config file is either flat ``key=value`` lines or a report.json written by
a previous run, whose embedded ``config`` object is reused.

Exit codes: 0 ok, 1 validation error, 2 runtime/quadrature failure,
3 verification failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import mm1, semi_analytic, stats
from .dist_core import Exponential, RngStream, parse_spec
from .experiment import run_replications, verify_mm1
from .mm1 import QueueParams
from .semi_analytic import QuadratureError
from .sim import simulate as simulate_trajectory, write_raw_csv

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_VERIFY_FAIL = 0, 1, 2, 3
COMMANDS = ("analytic", "simulate", "verify", "convolve")
THETA_GRID = (0.0, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0)
T_POINTS = 200


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str = "analytic"
    lam: float = 0.8
    mu: float = 1.0
    arrival: str | None = None
    service: str | None = None
    n: int = 1_000_000
    burn_in: int = stats.DEFAULT_BURN_IN
    seed: int = 0
    replications: int = 4
    bins: int = stats.DEFAULT_BINS
    stride: int = stats.DEFAULT_STRIDE
    batches: int = stats.DEFAULT_BATCHES
    output_dir: str = "overlapq-out"
    paper_exact: bool = False
    threads: int = 0
    inject_mu: float | None = None
    dump_raw: bool = False

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        for name in ("n", "replications", "bins", "stride", "batches"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.burn_in < 0 or self.threads < 0:
            raise ConfigError("burn_in and threads must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.command in ("simulate", "verify") and self.n <= self.burn_in + 100:
            raise ConfigError(f"n={self.n} leaves too few samples after burn_in={self.burn_in}")
        if self.command == "verify" and self.n - self.burn_in < 100 * self.batches:
            raise ConfigError(f"n - burn_in must be >= 100 * batches = {100 * self.batches}")
        if self.command in ("analytic", "convolve", "verify"):
            self.queue()  # raises StabilityError
        if self.arrival:
            parse_spec(self.arrival)
        if self.service:
            parse_spec(self.service)

    def queue(self) -> QueueParams:
        return QueueParams(self.lam, self.mu)

    def specs(self):
        arr = parse_spec(self.arrival) if self.arrival else Exponential(self.lam)
        svc = parse_spec(self.service) if self.service else Exponential(self.mu)
        return arr, svc

    def to_dict(self) -> dict:
        d = asdict(self)
        return {("lambda" if k == "lam" else k): v for k, v in d.items()}


_KEY_ALIASES = {"lambda": "lam", "lambda_": "lam"}
_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(key: str, value):
    if value is None:
        return None
    default = _FIELDS[key].default
    kind = _FIELDS[key].type
    if isinstance(value, str):
        text = value.strip()
        if text.lower() in ("", "none", "null"):
            return None
        if isinstance(default, bool):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ConfigError(f"{key}: expected a boolean, got {value!r}")
        value = text
    try:
        if isinstance(default, bool):
            return bool(value)
        if isinstance(default, int):
            f = float(value)
            if f != int(f):
                raise ValueError
            return int(f)
        if isinstance(default, float) or "float" in str(kind):
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {value!r}") from None
    return str(value)


def _normalize_key(key: str) -> str:
    k = key.strip().replace("-", "_")
    k = _KEY_ALIASES.get(k, k)
    if k not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    return k


def load_config_file(path) -> dict:
    """Read ``key=value`` lines, or the ``config`` object of a report.json."""
    text = Path(path).read_text()
    out = {}
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        items = data.get("config", data).items()
    else:
        items = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            items.append((k, v))
    for k, v in items:
        key = _normalize_key(k)
        out[key] = _coerce(key, v)
    return out


def resolve_config(command: str, flags: dict, env=None) -> RunConfig:
    env = os.environ if env is None else env
    values = {}
    if env.get("OVERLAPQ_SEED"):
        values["seed"] = _coerce("seed", env["OVERLAPQ_SEED"])
    config_path = flags.pop("config", None)
    if config_path:
        file_vals = load_config_file(config_path)
        file_vals.pop("command", None)
        values.update(file_vals)
    values.update({k: v for k, v in flags.items() if v is not None})
    cfg = RunConfig(command=command, **values)
    cfg.validate()
    return cfg


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _write_csv(path: Path, header, rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _write_json(path: Path, obj) -> None:
    try:
        path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=False) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
    return out


def analytic_table(q: QueueParams, paper_exact: bool = False) -> dict:
    table = {
        "lambda": q.lam,
        "mu": q.mu,
        "rate": q.gap,
        "wait_coefficient": mm1.wait_coefficient(q),
        "max": {
            "tail_coefficient": mm1.max_coefficient(q),
            "tail_at_zero": mm1.max_tail(q, 0.0),
            "atom_at_zero": mm1.max_atom_zero(q),
            "moments": {str(p): mm1.max_moment(q, p) for p in range(1, 5)},
            "variance": mm1.max_variance(q),
            "transform": [[th, mm1.max_transform(q, th)] for th in THETA_GRID],
        },
        "min": {
            "tail_coefficient": mm1.min_coefficient(q),
            "tail_at_zero": mm1.min_tail(q, 0.0),
            "atom_at_zero": mm1.min_atom_zero(q),
            "moments": {str(p): mm1.min_moment(q, p) for p in range(1, 5)},
            "variance": mm1.min_variance(q),
            "transform": [[th, mm1.min_transform(q, th)] for th in THETA_GRID],
        },
    }
    if paper_exact:
        table["printed_transforms"] = {
            "note": "as printed; not normalized at theta=0, shown for comparison only",
            "max": [[th, mm1.max_transform_printed(q, th)] for th in THETA_GRID],
            "min": [[th, mm1.min_transform_printed(q, th)] for th in THETA_GRID],
        }
    return table


def cmd_analytic(cfg: RunConfig) -> int:
    q = cfg.queue()
    out = _outdir(cfg)
    t = semi_analytic.tail_grid(q, T_POINTS)
    rows = zip(t, mm1.max_tail(q, t), mm1.min_tail(q, t), mm1.wait_tail(q, t))
    _write_csv(out / "tails.csv", ["t", "max_tail", "min_tail", "wait_tail"], rows)
    report = {"command": "analytic", "config": cfg.to_dict(), "analytic": analytic_table(q, cfg.paper_exact)}
    _write_json(out / "report.json", report)
    print(f"P(M>0) = {_fmt(mm1.max_tail(q, 0.0))}  P(M*>0) = {_fmt(mm1.min_tail(q, 0.0))}  "
          f"E[M] = {_fmt(mm1.max_moment(q, 1))}  E[M*] = {_fmt(mm1.min_moment(q, 1))}")
    return EXIT_OK


def _hist_rows(h: stats.Histogram):
    return [(a, b, d) for a, b, d in h.rows()]


def cmd_simulate(cfg: RunConfig) -> int:
    arrival, service = cfg.specs()
    out = _outdir(cfg)
    runs = run_replications(arrival, service, cfg.n, cfg.seed, cfg.replications, cfg.threads)
    report = {"command": "simulate", "config": cfg.to_dict(), "arrival": str(arrival), "service": str(service)}
    mm1_ref = None
    if isinstance(arrival, Exponential) and isinstance(service, Exponential) and arrival.rate < service.rate:
        mm1_ref = QueueParams(arrival.rate, service.rate, max_load=1.0)
    for idx, kind in enumerate(("max", "min")):
        pooled = np.concatenate([r[idx][cfg.burn_in:] for r in runs])
        summary = stats.summarize(pooled, burn_in=0, bins=cfg.bins)
        summary.burn_in = cfg.burn_in
        _write_csv(out / f"hist_{kind}.csv", ["bin_left", "bin_right", "density"], _hist_rows(summary.histogram))
        _write_csv(out / f"hist_{kind}_positive.csv", ["bin_left", "bin_right", "density"],
                   _hist_rows(summary.histogram.conditional()))
        entry = summary.to_dict()
        if mm1_ref is not None:
            entry["analytic"] = {
                "atom_at_zero": 1.0 - (mm1.max_coefficient(mm1_ref) if kind == "max" else mm1.min_coefficient(mm1_ref)),
                "mean": (mm1.max_moment if kind == "max" else mm1.min_moment)(mm1_ref, 1),
                "rate": mm1_ref.gap,
            }
        report[kind] = entry
        print(f"{kind}: atom_at_zero = {_fmt(entry['atom_at_zero'])}  mean = {_fmt(entry['mean'])}  "
              f"samples = {entry['count_used']}")
    if cfg.dump_raw:
        traj = simulate_trajectory(arrival, service, cfg.n, RngStream(cfg.seed, 0))
        write_raw_csv(traj, out / "raw.csv")
    _write_json(out / "report.json", report)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    if cfg.arrival or cfg.service:
        arrival, service = cfg.specs()
        if not (isinstance(arrival, Exponential) and isinstance(service, Exponential)):
            raise ConfigError("verify needs exponential arrival and service (M/M/1); use `simulate` for G/G/1 runs")
        cfg.lam, cfg.mu = arrival.rate, service.rate
        cfg.arrival = cfg.service = None
    q = cfg.queue()
    ref = QueueParams(q.lam, cfg.inject_mu) if cfg.inject_mu is not None else q
    res = verify_mm1(q, cfg.n, cfg.seed, cfg.replications, cfg.burn_in, cfg.stride, cfg.batches,
                     cfg.bins, cfg.threads, reference=ref)
    report = {"command": "verify", "config": cfg.to_dict(), "analytic": analytic_table(ref)}
    report.update(res.to_dict())
    _write_json(_outdir(cfg) / "report.json", report)
    for kind, r in res.reports.items():
        print(f"{kind}: KS {_fmt(r.ks_statistic)} < {_fmt(r.ks_threshold)} (rate {_fmt(r.rate)}, n_eff {r.effective_n}); "
              f"P(>0) {_fmt(r.frac_positive)} vs {_fmt(r.tail_coefficient)}; "
              + "; ".join(f"E[X^{m['p']}] {_fmt(m['analytic'])} in {_fmt(m['estimate'])}±{_fmt(m['halfwidth'])}: {m['covered']}"
                          for m in r.moments)
              + f" -> {'PASS' if r.pass_ else 'FAIL'}")
    print("PASS" if res.passed else "FAIL")
    return EXIT_OK if res.passed else EXIT_VERIFY_FAIL


def cmd_convolve(cfg: RunConfig) -> int:
    q = cfg.queue()
    out = _outdir(cfg)
    rows, failures, worst = [], [], 0.0
    for t in semi_analytic.tail_grid(q, T_POINTS):
        cf_max, cf_min = mm1.max_tail(q, t), mm1.min_tail(q, t)
        try:
            nu_max = semi_analytic.mm1_max_tail_numeric(q, t)
            nu_min = semi_analytic.mm1_min_tail_numeric(q, t)
        except QuadratureError as exc:
            failures.append(f"t={_fmt(t)}: {exc}")
            nu_max = nu_min = float("nan")
        err = max(abs(nu_max - cf_max), abs(nu_min - cf_min))
        worst = max(worst, err) if np.isfinite(err) else worst
        rows.append((t, cf_max, nu_max, cf_min, nu_min, err))
    _write_csv(out / "convolve.csv",
               ["t", "closed_form_max", "numeric_max", "closed_form_min", "numeric_min", "abs_error"], rows)
    print(f"max abs_error = {worst:.3e}")
    for f in failures:
        print(f"quadrature failure at {f}", file=sys.stderr)
    return EXIT_RUNTIME if failures else EXIT_OK


HANDLERS = {"analytic": cmd_analytic, "simulate": cmd_simulate, "verify": cmd_verify, "convolve": cmd_convolve}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="overlapq", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False, argument_default=None)
    common.add_argument("--config", help="key=value file or a previous report.json")
    common.add_argument("--lambda", dest="lam", type=float, help="arrival rate")
    common.add_argument("--mu", type=float, help="service rate")
    common.add_argument("--output-dir", help="directory for CSV/JSON artifacts")
    sim = argparse.ArgumentParser(add_help=False, argument_default=None)
    sim.add_argument("--arrival", help="interarrival spec (exp:rate, det:v, erlang:k:rate, unif:a:b)")
    sim.add_argument("--service", help="service spec, same syntax")
    sim.add_argument("--n", type=int, help="customers per replication")
    sim.add_argument("--burn-in", type=int)
    sim.add_argument("--seed", type=int, help="base seed (fallback: $OVERLAPQ_SEED)")
    sim.add_argument("--replications", type=int)
    sim.add_argument("--bins", type=int)
    sim.add_argument("--stride", type=int, help="KS thinning stride")
    sim.add_argument("--batches", type=int, help="batch-means batches per replication")
    sim.add_argument("--threads", type=int, help="worker processes (0 = all cores)")

    p = sub.add_parser("analytic", parents=[common], help="closed-form tables")
    p.add_argument("--paper-exact", action="store_const", const=True,
                   help="also report the transforms exactly as printed")
    p = sub.add_parser("simulate", parents=[common, sim], help="histograms from G/G/1 simulation")
    p.add_argument("--dump-raw", action="store_const", const=True, help="write raw.csv for replication 0")
    p = sub.add_parser("verify", parents=[common, sim], help="M/M/1 simulation vs closed forms")
    p.add_argument("--inject-mu", type=float, help="negative control: wrong mu for the reference")
    sub.add_parser("convolve", parents=[common], help="quadrature vs closed-form tails")
    return parser


def main(argv=None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    try:
        cfg = resolve_config(command, args)
        return HANDLERS[command](cfg)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (QuadratureError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
