#!/usr/bin/env python3
"""Run the paired deviation experiment for every deviation strategy and
print a table of utility differences against the honest baseline."""

import argparse

from rucon.deviations import DEVIATION_TYPES, make_deviation
from rucon.simulator import RunConfig, deviation_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=5)
    parser.add_argument("--t", type=int, default=1)
    parser.add_argument("--runs", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--agent", type=int, default=1)
    parser.add_argument("--types", default=None,
                        help="comma-separated type ids, default all")
    args = parser.parse_args()

    type_ids = ([int(x) for x in args.types.split(",")] if args.types
                else sorted(DEVIATION_TYPES))
    base = RunConfig(n=args.n, t=args.t, seed=args.seed)

    print(f"n={args.n} t={args.t} runs={args.runs} deviant={args.agent}")
    print(f"{'type':>6} {'honest':>8} {'deviant':>8} {'diff':>8} "
          f"{'2*se':>7} {'detect':>7} verdict")
    any_gain = False
    for tid in type_ids:
        summary = deviation_experiment(
            base,
            lambda: make_deviation(tid, agent=args.agent, seed=args.seed),
            args.runs)
        verdict = "ok" if summary.gain_within_noise else "GAIN"
        any_gain |= not summary.gain_within_noise
        line = (f"{tid:>6} {summary.mean_honest:>8.4f} "
                f"{summary.mean_deviant:>8.4f} {summary.mean_diff:>+8.4f} "
                f"{2 * summary.se_diff:>7.4f} {summary.detection_rate:>7.3f} "
                f"{verdict}")
        if summary.guess_trials:
            line += (f"  guesses {summary.guess_hits}/{summary.guess_trials}"
                     f" ({summary.guess_rate:.3f}, chance {1 / args.n:.3f})")
        print(line)
    print("verdict: " + ("some strategy gained" if any_gain
                         else "no strategy gained"))


if __name__ == "__main__":
    main()
