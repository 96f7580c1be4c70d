"""Run-time instrumentation of the knowledge-propagation guarantees.

The monitor watches an honest run from outside: after each round it snapshots
ground-truth faults from the agents' lost sets and checks that the agents'
views actually converge as fast as the analysis promises. All checks are
observational: the monitor never feeds anything back into the protocol.
"""

from __future__ import annotations

from .links import R, X, classify, link_of
from . import decision as decision_mod


def all_links(n: int):
    return [(k, p) for k in range(1, n) for p in range(k + 1, n + 1)]


def broken_pairs(agents: dict):
    """Links severed so far, judged from the agents' own lost sets."""
    pairs = set()
    for a, st in agents.items():
        for b in st.lost:
            pairs.add(link_of(a, b))
    return pairs


def ground_faulty(agents: dict, t: int):
    """Agents with more than t severed links; honest agents never qualify."""
    broken = broken_pairs(agents)
    count = {a: 0 for a in agents}
    for (a, b) in broken:
        count[a] += 1
        count[b] += 1
    return {a for a, c in count.items() if c > t}


def risk_count(pattern, agents: dict, r: int) -> int:
    """Scripted-faulty agents still in the game at round r.

    An agent stops being a propagation risk once it is silenced: crashed,
    or terminated by its own give-up rule. Until then it may hold link
    knowledge hostage for one extra round each.
    """
    count = 0
    for a in pattern.faulty_agents():
        if pattern.crash.get(a, float("inf")) <= r:
            continue
        if agents[a].decision is not None:
            continue
        count += 1
    return count


def view(state, link, r: int) -> str:
    """One agent's opinion of a link's status at round r: 'R', 'X' or 'O'."""
    entry = state.ns.get(link)
    if entry is not None and entry[0][0] == X and entry[0][1] <= r:
        return X
    reports = state.hs.get((link, r))
    if reports:
        return X if any(ta[0] == X for ta in reports) else R
    return "O"


class InvariantMonitor:
    """Collects per-round evidence and renders a pass/fail report."""

    def __init__(self, n: int, t: int, pattern):
        self.n = n
        self.t = t
        self.pattern = pattern
        self.links = all_links(n)
        self.pending = []          # (check round, source round, bound name)
        self.failures = []
        self.faulty_by_round = {}

    def _check_views(self, agents, source_round, check_round, bound):
        faulty = self.faulty_by_round[check_round]
        observers = [st for a, st in sorted(agents.items()) if a not in faulty]
        for link in self.links:
            seen = {view(st, link, source_round) for st in observers}
            if len(seen) > 1:
                self.failures.append(
                    f"{bound}: round-{source_round} state of {link} still "
                    f"disputed at round {check_round}: {sorted(seen)}")

    def after_round(self, agents: dict, r: int):
        """Call once per round, after every agent's compute phase."""
        t = self.t
        faulty = ground_faulty(agents, t)
        self.faulty_by_round[r] = faulty
        if r + t + 1 <= t + 3:
            self.pending.append((r + t + 1, r, "message-passing bound"))
        sharp = r + risk_count(self.pattern, agents, r) + 1
        if sharp < r + t + 1 and sharp <= t + 3:
            self.pending.append((sharp, r, "sharper bound"))
        due = [p for p in self.pending if p[0] == r]
        self.pending = [p for p in self.pending if p[0] > r]
        for check_round, source_round, bound in due:
            self._check_views(agents, source_round, check_round, bound)

    def finalize(self, agents: dict) -> dict:
        """End-of-run checks; returns {invariant name: (ok, detail)}."""
        n, t = self.n, self.t
        report = {}
        bound_fails = [f for f in self.failures if "bound" in f]
        report["message_passing_bound"] = (not bound_fails, "; ".join(bound_fails))

        faulty = self.faulty_by_round.get(t + 3, ground_faulty(agents, t))
        observers = {a: st for a, st in agents.items() if a not in faulty}
        ref = observers[min(observers)]

        timeline = decision_mod.status_timeline(ref.hs, n, t)
        cleans = decision_mod.clean_rounds(timeline)
        density_ok = len([c for c in cleans if c <= t + 2]) >= 2
        detail = ""
        for start in range(1, t + 4 - t):
            window = range(start, start + t + 1)
            if not any(c in window for c in cleans):
                density_ok = False
                detail = f"no fault-quiet round in {list(window)}"
        report["clean_round_density"] = (density_ok, detail or str(cleans))

        # All still-working agents must judge every link identically for
        # rounds up to the second fault-quiet round. Raw report sets may
        # differ (a report received directly is kept even when it is never
        # relayed onward), so the comparison is on classifications.
        horizon = min(cleans[1] if len(cleans) >= 2 else t + 3, t + 3)
        hs_ok, hs_detail = True, ""
        def class_map(st):
            return {(link, rr): classify(st.hs, link, rr)
                    for link in self.links for rr in range(1, horizon + 1)}
        ref_map = class_map(ref)
        for a, st in sorted(observers.items()):
            if class_map(st) != ref_map:
                hs_ok = False
                hs_detail = f"agent {a} judges some link differently through round {horizon}"
                break
        report["hs_convergence"] = (hs_ok, hs_detail)

        m_stars = {st.m_star for st in observers.values()}
        d_sets = {tuple(st.d_set) if st.d_set else None
                  for st in observers.values()}
        mach_ok = len(m_stars) == 1 and None not in m_stars and len(d_sets) == 1
        report["machinery_agreement"] = (
            mach_ok, f"m*={sorted(m_stars, key=str)} D={sorted(d_sets, key=str)}")
        return report
