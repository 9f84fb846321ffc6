"""``smdo-tune`` command line: run, simulate, compare and batch.

Exit codes: 0 success, 2 usage or scenario error, 3 I/O failure,
4 degenerate comparison baseline.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

from ._validation import ConfigurationError
from .objective import DegenerateBaselineError, MetricKind, evaluate, j_index, loop_metrics, metric
from .scenarios import Scenario, builtin_scenarios, load_scenario_file, split_gains
from .simulation import SimulationTrace
from .tuner import SmdoTuner

log = logging.getLogger("smdo_tune")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DEGENERATE = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class RunSummary:
    scenario: str
    seed: int | None
    iterations: int
    max_iterations: int
    final_gains: list[dict]
    final_cost: float | None
    weights: list[float]
    target_cost: float | None
    target_reached: bool
    ci: bool | None
    j_vs_baseline: float | None
    divergence_count: int
    evaluations: int
    wall_clock_s: float

    def to_dict(self) -> dict:
        return asdict(self)


# -- helpers ---------------------------------------------------------------


def _num(x: float) -> float | None:
    """JSON has no infinities; they are written as null."""
    return x if math.isfinite(x) else None


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    return repr(float(x))


def _load(path: str) -> Scenario:
    try:
        return load_scenario_file(path)
    except FileNotFoundError:
        raise CliError(f"scenario file not found: {path}", EXIT_CONFIG) from None
    except (ConfigurationError, UnicodeDecodeError) as exc:
        raise CliError(f"invalid scenario {path}: {exc}", EXIT_CONFIG) from None
    except OSError as exc:
        raise CliError(f"cannot read scenario {path}: {exc}", EXIT_CONFIG) from None


def _parse_gains(text: str, scenario: Scenario) -> list[float]:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise CliError(f"malformed gains {text!r}: expected comma-separated numbers", EXIT_CONFIG) from None
    if len(values) != 2 * scenario.n_loops or not all(math.isfinite(v) for v in values):
        raise CliError(
            f"malformed gains {text!r}: expected {2 * scenario.n_loops} finite values "
            f"(kp,ki per loop)",
            EXIT_CONFIG,
        )
    return values


def _parse_ci(value: str | None) -> bool | None:
    return None if value is None else value == "on"


def _parse_config_gains(text: str, scenario: Scenario) -> tuple[list[float], bool | None]:
    """``kp1,ki1,...[@ci|@noci]``; without a suffix the scenario's CI setting applies."""
    gains, _, flag = text.partition("@")
    if flag not in ("", "ci", "noci"):
        raise CliError(f"malformed gains {text!r}: suffix must be @ci or @noci", EXIT_CONFIG)
    return _parse_gains(gains, scenario), {"": None, "ci": True, "noci": False}[flag]


def _mkdir(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {path}: {exc}", EXIT_IO) from None


def _write_text(path: Path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from None


def _write_json(path: Path, doc) -> None:
    _write_text(path, json.dumps(doc, indent=2) + "\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from None


def trace_rows(trace: SimulationTrace) -> tuple[list[str], list[list[str]]]:
    header = ["t"]
    for i in range(1, trace.n_loops + 1):
        header += [f"r_{i}", f"y_{i}", f"u_{i}", f"e_{i}", f"sat_{i}"]
    rows = []
    for k in range(len(trace)):
        row = [_fmt(trace.t[k])]
        for i in range(trace.n_loops):
            row += [
                _fmt(trace.r[i, k]),
                _fmt(trace.y[i, k]),
                _fmt(trace.u[i, k]),
                _fmt(trace.e[i, k]),
                _fmt(bool(trace.saturated[i, k])),
            ]
        rows.append(row)
    return header, rows


def all_metrics(trace: SimulationTrace) -> list[dict]:
    out = []
    for i in range(trace.n_loops):
        entry = {kind.value: _num(metric(trace.e[i], trace.t, kind, trace.dt)) for kind in MetricKind}
        entry["terminal_error"] = float(trace.e[i, -1])
        out.append(entry)
    return out


def _gains_dicts(gains) -> list[dict]:
    return [{"kp": g.kp, "ki": g.ki} for g in gains]


def _j_weights(scenario: Scenario) -> list[float]:
    w = scenario.cost.weights
    total = math.fsum(w)
    return [x / total for x in w] if total > 0 else [1.0 / len(w)] * len(w)


# -- run -------------------------------------------------------------------


def tune(scenario: Scenario, seed, iters, target, ci) -> tuple[SmdoTuner, float]:
    start = time.perf_counter()
    tuner = SmdoTuner(max_iter=iters, target_cost=target, random_state=seed, ci=ci).fit(scenario)
    return tuner, time.perf_counter() - start


def summarize(tuner: SmdoTuner, scenario: Scenario, elapsed: float, baseline=None) -> RunSummary:
    config = tuner.scenario_.optimizer
    j = None
    if baseline is not None:
        gains, ci = baseline
        base = scenario.simulate(gains, ci=ci)
        try:
            j = _num(j_index(tuner.predict(), base, _j_weights(scenario), scenario.cost.metrics))
        except DegenerateBaselineError as exc:
            log.warning("J not reported: %s", exc)
    return RunSummary(
        scenario=scenario.name,
        seed=config.seed,
        iterations=tuner.n_iter_,
        max_iterations=config.max_iterations,
        final_gains=_gains_dicts(tuner.gains_),
        final_cost=_num(tuner.cost_),
        weights=list(tuner.weights_),
        target_cost=config.target_cost,
        target_reached=tuner.target_reached_,
        ci=tuner.ci,
        j_vs_baseline=j,
        divergence_count=tuner.n_diverged_,
        evaluations=tuner.n_evaluations_,
        wall_clock_s=round(elapsed, 6),
    )


def convergence_rows(tuner: SmdoTuner) -> tuple[list[str], list[list[str]]]:
    n = tuner.scenario_.n_loops
    names = [f"{g}_{i}" for i in range(1, n + 1) for g in ("kp", "ki")]
    n_w = len(tuner.weights_)
    header = ["iteration", "cost"] + [f"w_{i}" for i in range(1, n_w + 1)] + names + [f"outcome_{x}" for x in names]
    pv = tuner.scenario_.parameter_vector()
    rows = [
        ["0", _fmt(tuner.initial_cost_)]
        + [_fmt(w) for w in tuner.initial_weights_]
        + [_fmt(v) for v in pv.values.tolist()]
        + [""] * len(names)
    ]
    for rec in tuner.history_:
        rows.append(
            [str(rec.iteration), _fmt(rec.cost)]
            + [_fmt(w) for w in rec.weights]
            + [_fmt(v) for v in rec.values]
            + [o.value for o in rec.outcomes]
        )
    return header, rows


def cmd_run(args) -> int:
    scenario = _load(args.scenario)
    baseline = _parse_config_gains(args.baseline, scenario) if args.baseline else None
    out = Path(args.out)
    try:
        tuner, elapsed = tune(scenario, args.seed, args.iters, args.target, _parse_ci(args.ci))
    except ConfigurationError as exc:
        raise CliError(f"invalid optimizer settings: {exc}", EXIT_CONFIG) from None
    summary = summarize(tuner, scenario, elapsed, baseline)
    _mkdir(out)
    _write_csv(out / "convergence.csv", *convergence_rows(tuner))
    _write_csv(out / "trace_final.csv", *trace_rows(tuner.predict()))
    _write_json(out / "summary.json", summary.to_dict())
    log.info(
        "%s: %d iterations, cost %.6g, gains %s",
        scenario.name,
        summary.iterations,
        tuner.cost_,
        summary.final_gains,
    )
    return EXIT_OK


# -- simulate --------------------------------------------------------------


def cmd_simulate(args) -> int:
    scenario = _load(args.scenario)
    gains = _parse_gains(args.gains, scenario)
    ci = _parse_ci(args.ci)
    ev = evaluate(scenario, gains, ci=ci)
    out = Path(args.out)
    _mkdir(out)
    _write_csv(out / "trace.csv", *trace_rows(ev.trace))
    _write_json(
        out / "metrics.json",
        {
            "scenario": scenario.name,
            "gains": _gains_dicts(split_gains(gains, scenario.n_loops)),
            "ci": ci,
            "diverged": ev.diverged,
            "samples": len(ev.trace),
            "cost": _num(ev.cost),
            "loops": all_metrics(ev.trace),
        },
    )
    return EXIT_OK


# -- compare ---------------------------------------------------------------


def compare(scenario: Scenario, baseline, candidates) -> list[dict]:
    """Rows for the baseline and each candidate with their J relative to the baseline."""
    weights = _j_weights(scenario)
    kinds = scenario.cost.metrics
    base_gains, base_ci = baseline
    base_trace = scenario.simulate(base_gains, ci=base_ci)
    if base_trace.diverged:
        raise CliError("degenerate baseline: baseline simulation diverged", EXIT_DEGENERATE)
    rows = []
    for label, (gains, ci) in [("baseline", baseline)] + [
        (f"candidate_{i}", c) for i, c in enumerate(candidates, start=1)
    ]:
        trace = base_trace if label == "baseline" else scenario.simulate(gains, ci=ci)
        try:
            j = j_index(trace, base_trace, weights, kinds)
        except DegenerateBaselineError as exc:
            raise CliError(str(exc), EXIT_DEGENERATE) from None
        rows.append(
            {
                "label": label,
                "gains": _gains_dicts(split_gains(gains, scenario.n_loops)),
                "ci": ci,
                "diverged": trace.diverged,
                "metric": [k.value for k in kinds],
                "loop_metrics": [_num(m) for m in loop_metrics(trace, kinds)],
                "all_metrics": all_metrics(trace),
                "J": _num(j),
            }
        )
    return rows


def cmd_compare(args) -> int:
    scenario = _load(args.scenario)
    baseline = _parse_config_gains(args.baseline, scenario)
    candidates = [_parse_config_gains(c, scenario) for c in args.candidate]
    rows = compare(scenario, baseline, candidates)
    width = max(len(r["label"]) for r in rows)
    print(f"{'configuration':<{max(width, 13)}}  J")
    for r in rows:
        j = "inf" if r["J"] is None else f"{r['J']:.6g}"
        print(f"{r['label']:<{max(width, 13)}}  {j}")
    out = Path(args.out)
    _mkdir(out)
    _write_json(out / "compare.json", {"scenario": scenario.name, "rows": rows})
    return EXIT_OK


# -- batch -----------------------------------------------------------------


def _parse_seeds(text: str) -> list[int]:
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError:
        raise CliError(f"malformed seed range {text!r}: expected a..b", EXIT_CONFIG) from None
    if lo < 0 or hi < lo:
        raise CliError(f"empty or negative seed range {text!r}", EXIT_CONFIG)
    return list(range(lo, hi + 1))


def _batch_one(scenario: Scenario, seed: int, iters, ci) -> dict:
    try:
        tuner, elapsed = tune(scenario, seed, iters, None, ci)
    except (ConfigurationError, ArithmeticError, ValueError) as exc:
        return {"seed": seed, "status": "failed", "error": str(exc)}
    return {"seed": seed, "status": "ok", "summary": summarize(tuner, scenario, elapsed).to_dict()}


def _workers(n_jobs: int) -> int:
    env = os.environ.get("SMDO_TUNE_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise CliError(f"SMDO_TUNE_THREADS must be an integer, got {env!r}", EXIT_CONFIG) from None
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_jobs))


def cmd_batch(args) -> int:
    scenario = _load(args.scenario)
    seeds = _parse_seeds(args.seeds)
    ci = _parse_ci(args.ci)
    workers = _workers(len(seeds))
    if workers == 1:
        results = [_batch_one(scenario, s, args.iters, ci) for s in seeds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_batch_one, scenario, s, args.iters, ci) for s in seeds]
            results = [f.result() for f in futures]

    out = Path(args.out)
    _mkdir(out / "summaries")
    runs = []
    for res in results:
        if res["status"] == "ok":
            summary = res["summary"]
            _write_json(out / "summaries" / f"seed_{res['seed']}.json", summary)
            runs.append(
                {
                    "seed": res["seed"],
                    "status": "ok",
                    "iterations": summary["iterations"],
                    "final_cost": summary["final_cost"],
                    "final_gains": summary["final_gains"],
                }
            )
        else:
            runs.append(res)
    costs = [r["final_cost"] for r in runs if r["status"] == "ok"]
    finite = [math.inf if c is None else c for c in costs]
    aggregate = {
        "n_ok": len(costs),
        "n_failed": len(runs) - len(costs),
        "min": _num(min(finite)) if finite else None,
        "median": _num(statistics.median(finite)) if finite else None,
        "max": _num(max(finite)) if finite else None,
    }
    _write_json(
        out / "batch.json",
        {"scenario": scenario.name, "seeds": [seeds[0], seeds[-1]], "runs": runs, "aggregate": aggregate},
    )
    return EXIT_OK if costs else EXIT_CONFIG


# -- builtin ---------------------------------------------------------------


def cmd_builtin(args) -> int:
    fixtures = builtin_scenarios()
    if args.name is None:
        for name in fixtures:
            print(name)
        return EXIT_OK
    if args.name not in fixtures:
        raise CliError(f"unknown built-in scenario {args.name!r}", EXIT_CONFIG)
    text = fixtures[args.name].to_json()
    if args.out:
        _write_text(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smdo-tune",
        description="Tune discrete PI loops by stochastic multi-parameter divergence optimization.",
        epilog="Scenario paths may be 'builtin:<name>' (see 'smdo-tune builtin').",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    ci_help = "force conditional integration on/off in every loop (default: scenario setting)"

    p = sub.add_parser("run", help="optimize the gains of a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default: scenario's)")
    p.add_argument("--iters", type=int, default=None, help="iteration budget (default: scenario's, usually 100)")
    p.add_argument("--target", type=float, default=None, help="stop once the cost drops below this")
    p.add_argument("--ci", choices=("on", "off"), default=None, help=ci_help)
    p.add_argument("--baseline", default=None, help="gains to report J against, kp1,ki1[,kp2,ki2][@ci|@noci]")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("simulate", help="simulate fixed gains")
    p.add_argument("--scenario", required=True)
    p.add_argument("--gains", required=True, help="kp1,ki1[,kp2,ki2]")
    p.add_argument("--ci", choices=("on", "off"), default=None, help=ci_help)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="J index of candidate gains against a baseline")
    p.add_argument("--scenario", required=True)
    p.add_argument("--baseline", required=True, help="kp1,ki1[,kp2,ki2][@ci|@noci]")
    p.add_argument("--candidate", action="append", required=True, help="repeatable; same format as --baseline")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("batch", help="independent runs over a seed range")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seeds", required=True, help="inclusive range a..b")
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--ci", choices=("on", "off"), default=None, help=ci_help)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("builtin", help="list built-in scenarios or dump one as JSON")
    p.add_argument("name", nargs="?")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_builtin)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CliError as exc:
        print(f"smdo-tune: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
