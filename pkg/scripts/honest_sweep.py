#!/usr/bin/env python3
"""Sweep seeded runs with sampled failure patterns and report outcome
frequencies plus any invariant violations."""

import argparse
from collections import Counter

from rucon.simulator import RunConfig, run


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=5)
    parser.add_argument("--t", type=int, default=1)
    parser.add_argument("--runs", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    outcomes = Counter()
    m_stars = Counter()
    violations = []
    for k in range(args.runs):
        res = run(RunConfig(n=args.n, t=args.t, seed=args.seed + k,
                            sample_pattern=True))
        outcomes[res.outcome[0]] += 1
        m_stars[res.m_star] += 1
        for name, (ok, detail) in res.invariants.items():
            if not ok:
                violations.append((res.config.seed, name, detail))

    print(f"n={args.n} t={args.t} runs={args.runs}")
    for outcome, count in outcomes.most_common():
        print(f"  outcome {outcome}: {count}")
    for m, count in sorted(m_stars.items(), key=lambda kv: str(kv[0])):
        print(f"  decision round {m}: {count}")
    if violations:
        print(f"  INVARIANT VIOLATIONS: {len(violations)}")
        for seed, name, detail in violations[:10]:
            print(f"    seed={seed} {name}: {detail}")
    else:
        print("  all invariants held")


if __name__ == "__main__":
    main()
