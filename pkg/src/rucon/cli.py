"""Command-line front end: single runs, batches, deviation sweeps, and
offline re-checking of recorded traces.

Exit codes: 0 success, 1 property failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .deviations import DEVIATION_TYPES, make_deviation
from .simulator import FailurePattern, RunConfig, deviation_experiment, run


def load_pattern(path: str) -> FailurePattern:
    crash, send_om, recv_om = {}, {}, {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            agent = int(rec["agent"])
            onset = int(rec["from_round"])
            kind = rec["kind"]
            if kind == "crash":
                crash[agent] = onset
            elif kind == "send":
                send_om[(agent, int(rec["peer"]))] = onset
            elif kind == "receive":
                recv_om[(agent, int(rec["peer"]))] = onset
            else:
                raise ValueError(f"unknown failure kind {kind!r}")
    return FailurePattern(crash=crash, send_om=send_om, recv_om=recv_om)


def write_trace(path: str, records: list):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def _build_config(args) -> RunConfig:
    domain = tuple(args.domain.split(","))
    values = args.values.split(",") if args.values else None
    pattern = load_pattern(args.pattern) if args.pattern else None
    utilities = tuple(float(x) for x in args.utilities.split(","))
    if len(utilities) != 3:
        raise ValueError("utilities must be three comma-separated numbers")
    return RunConfig(n=args.n, t=args.t, seed=args.seed, values=values,
                     value_domain=domain, pattern=pattern,
                     sample_pattern=args.sample_pattern, utilities=utilities)


def _print_result(res, out):
    print(f"decisions: {res.decisions}", file=out)
    print(f"outcome: {res.outcome}", file=out)
    print(f"m*: {res.m_star}  D: {res.d_set}", file=out)
    print(f"utilities: {res.utilities}", file=out)
    for name, (ok, detail) in res.invariants.items():
        line = f"invariant {name}: {'ok' if ok else 'FAIL'}"
        if detail and not ok:
            line += f" ({detail})"
        print(line, file=out)


def cmd_run(args, out=None) -> int:
    out = out or sys.stdout
    config = _build_config(args)
    sink = [] if args.trace else None
    config.trace = sink
    res = run(config)
    if args.trace:
        write_trace(args.trace, sink)
    _print_result(res, out)
    return 0 if res.invariants_ok else 1


def cmd_batch(args, out=None) -> int:
    out = out or sys.stdout
    base = _build_config(args)
    failures = 0
    for k in range(args.runs):
        cfg = RunConfig(n=base.n, t=base.t, seed=base.seed + k,
                        value_domain=base.value_domain,
                        sample_pattern=True, utilities=base.utilities)
        res = run(cfg)
        ok = res.invariants_ok
        failures += not ok
        print(f"seed={cfg.seed} outcome={res.outcome} "
              f"invariants={'ok' if ok else 'FAIL'}", file=out)
    print(f"{args.runs - failures}/{args.runs} runs clean", file=out)
    return 0 if failures == 0 else 1


def _parse_params(pairs):
    params = {}
    for pair in pairs or ():
        key, _, raw = pair.partition("=")
        try:
            params[key] = json.loads(raw)
        except json.JSONDecodeError:
            params[key] = raw
    return params


def cmd_deviate(args, out=None) -> int:
    out = out or sys.stdout
    if args.type not in DEVIATION_TYPES:
        print(f"unknown deviation type {args.type}", file=sys.stderr)
        return 2
    base = _build_config(args)
    params = _parse_params(args.param)
    summary = deviation_experiment(
        base,
        lambda: make_deviation(args.type, agent=args.agent,
                               seed=args.seed, **params),
        args.runs)
    print(f"deviation: {summary.deviation}  runs: {summary.runs}", file=out)
    print(f"mean utility honest:  {summary.mean_honest:.4f}", file=out)
    print(f"mean utility deviant: {summary.mean_deviant:.4f}", file=out)
    print(f"paired diff: {summary.mean_diff:+.4f} "
          f"(se {summary.se_diff:.4f})", file=out)
    print(f"detection rate: {summary.detection_rate:.3f}  "
          f"applied rate: {summary.applied_rate:.3f}", file=out)
    if summary.guess_trials:
        print(f"guesses: {summary.guess_hits}/{summary.guess_trials} "
              f"hit ({summary.guess_rate:.4f})", file=out)
    verdict = "no profitable gain" if summary.gain_within_noise else "GAIN DETECTED"
    print(f"verdict: {verdict}", file=out)
    return 0 if summary.gain_within_noise else 1


def cmd_verify_trace(args, out=None) -> int:
    out = out or sys.stdout
    try:
        records = []
        with open(args.trace_file) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
    except (OSError, json.JSONDecodeError) as exc:
        print(f"unreadable trace: {exc}", file=sys.stderr)
        return 2
    meta = next((r for r in records
                 if r.get("phase") == "meta" and r.get("event") == "config"), None)
    if meta is None:
        print("trace has no config record", file=sys.stderr)
        return 2
    n = meta["payload"]["n"]
    values = meta["payload"]["values"]
    result = next((r for r in records if r.get("event") == "result"), None)
    decisions = dict(result["payload"]["decisions"]) if result else {}
    labels = [decisions.get(str(i), decisions.get(i, "undecided"))
              for i in range(1, n + 1)]
    decided = {d for d in labels if d not in ("bot", "no_decision", "undecided")}
    problems = []
    if any(d == "undecided" for d in labels):
        problems.append("termination: some agent never decided")
    if len(decided) > 1:
        problems.append(f"agreement: distinct values {sorted(decided)}")
    if not decided <= set(values):
        problems.append(f"validity: {sorted(decided)} not among initial values")
    for p in problems:
        print(p, file=out)
    if not problems:
        print("trace clean", file=out)
    return 0 if not problems else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rucon",
        description="Synchronous consensus simulator with omission failures")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--t", type=int, required=True)
        p.add_argument("--seed", type=int, required=True)
        p.add_argument("--values", default=None,
                       help="comma-separated initial values, one per agent")
        p.add_argument("--domain", default="a,b,c")
        p.add_argument("--pattern", default=None, help="failure pattern file")
        p.add_argument("--sample-pattern", action="store_true")
        p.add_argument("--utilities", default="2,1,0")

    p_run = sub.add_parser("run", help="execute one run")
    add_common(p_run)
    p_run.add_argument("--trace", default=None, help="trace output path")
    p_run.set_defaults(func=cmd_run)

    p_batch = sub.add_parser("batch", help="many seeded runs with sampled patterns")
    add_common(p_batch)
    p_batch.add_argument("--runs", type=int, default=100)
    p_batch.set_defaults(func=cmd_batch)

    p_dev = sub.add_parser("deviate", help="paired deviation experiment")
    add_common(p_dev)
    p_dev.add_argument("--type", type=int, required=True)
    p_dev.add_argument("--agent", type=int, default=1)
    p_dev.add_argument("--runs", type=int, default=200)
    p_dev.add_argument("--param", action="append",
                       help="deviation parameter key=value (repeatable)")
    p_dev.set_defaults(func=cmd_deviate)

    p_vt = sub.add_parser("verify-trace", help="re-check a recorded trace")
    p_vt.add_argument("trace_file")
    p_vt.set_defaults(func=cmd_verify_trace)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
