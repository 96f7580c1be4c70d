"""Round-lockstep execution of the protocol under scripted failures.

A run advances all agents through t+4 rounds of send, deliver, receive and
compute. Failures are scripted ahead of time by a FailurePattern drawn
independently of values and seeds used by the agents, so the environment
cannot condition on message contents.
"""

from __future__ import annotations

import math
import random
import statistics
from dataclasses import dataclass, field, replace

from .agent import (BOT, NO_DECISION, UNDECIDED, compute_phase, init_agent,
                    receive_phase, send_phase)
from .invariants import InvariantMonitor
from .sharing import DEFAULT_PRIME

INF = float("inf")


@dataclass(frozen=True)
class FailurePattern:
    """Omission/crash schedule. Failures never recover: each entry is an
    onset round and applies from then on."""

    crash: dict = field(default_factory=dict)      # agent -> round
    send_om: dict = field(default_factory=dict)    # (sender, receiver) -> round
    recv_om: dict = field(default_factory=dict)    # (receiver, sender) -> round

    def faulty_agents(self):
        out = set(self.crash)
        out |= {s for s, _ in self.send_om}
        out |= {r for r, _ in self.recv_om}
        return out

    def validate(self, n: int, t: int):
        agents = self.faulty_agents()
        if len(agents) > t:
            raise ValueError(f"{len(agents)} faulty agents exceed t={t}")
        for a in agents | {x for pair in list(self.send_om) + list(self.recv_om)
                           for x in pair}:
            if not 1 <= a <= n:
                raise ValueError(f"agent {a} out of range")

    def blocks(self, r: int, sender: int, receiver: int) -> bool:
        return (self.crash.get(sender, INF) <= r
                or self.crash.get(receiver, INF) <= r
                or self.send_om.get((sender, receiver), INF) <= r
                or self.recv_om.get((receiver, sender), INF) <= r)


def sample_blind_pattern(seed: int, n: int, t: int) -> FailurePattern:
    """A value-independent random schedule with at most t faulty agents."""
    rng = random.Random(f"{seed}:pattern")
    count = rng.randint(0, t)
    chosen = sorted(rng.sample(range(1, n + 1), count))
    crash, send_om, recv_om = {}, {}, {}
    for a in chosen:
        onset = rng.randint(1, t + 3)
        kind = rng.choice(("crash", "send", "receive", "mixed"))
        if kind == "crash":
            crash[a] = onset
            continue
        for peer in range(1, n + 1):
            if peer == a or rng.random() >= 0.6:
                continue
            start = rng.randint(onset, t + 3)
            direction = kind if kind != "mixed" else rng.choice(
                ("send", "receive", "both"))
            if direction in ("send", "both"):
                send_om[(a, peer)] = start
            if direction in ("receive", "both"):
                recv_om[(a, peer)] = start
    return FailurePattern(crash=crash, send_om=send_om, recv_om=recv_om)


def deliver(r: int, outboxes: dict, pattern: FailurePattern, n: int) -> dict:
    inboxes = {a: {} for a in range(1, n + 1)}
    for sender in sorted(outboxes):
        for receiver, msg in sorted(outboxes[sender].items()):
            if pattern.blocks(r, sender, receiver):
                continue
            inboxes[receiver][sender] = msg
    return inboxes


@dataclass
class RunConfig:
    n: int
    t: int
    seed: int
    values: list = None            # encoded later against value_domain
    value_domain: tuple = ("a", "b", "c")
    pattern: FailurePattern = None
    sample_pattern: bool = False
    deviation: object = None
    utilities: tuple = (2.0, 1.0, 0.0)
    check_invariants: bool = True
    field_p: int = DEFAULT_PRIME
    trace: object = None           # list-like sink for trace records

    def validate(self):
        if not (self.n >= 3 and self.n > 2 * self.t + 1):
            raise ValueError(f"need n>2t+1 and n>=3, got n={self.n}, t={self.t}")
        b0, b1, b2 = self.utilities
        if not b0 > b1 > b2:
            raise ValueError("utilities must be strictly decreasing")
        if self.values is not None and len(self.values) != self.n:
            raise ValueError("values must list one value per agent")
        if self.values is not None:
            bad = [v for v in self.values if v not in self.value_domain]
            if bad:
                raise ValueError(f"values outside the domain: {bad}")


@dataclass
class RunResult:
    config: RunConfig
    pattern: FailurePattern
    values: list                       # decoded, index 0 is agent 1
    decisions: dict                    # agent -> 'bot' | 'no_decision' | value
    utilities: dict
    outcome: tuple                     # ('consensus', v) | ('bot',) | ('no_value',)
    invariants: dict                   # name -> (ok, detail)
    m_star: object
    d_set: object
    errors: dict                       # agent -> stringified inconsistency
    guesses: list = field(default_factory=list)
    deviation_applied: bool = False

    @property
    def invariants_ok(self) -> bool:
        return all(ok for ok, _ in self.invariants.values())


def sample_values(seed: int, n: int, domain) -> list:
    rng = random.Random(f"{seed}:values")
    return [rng.choice(list(domain)) for _ in range(n)]


def _emit(sink, run_id, round_, phase, agent, event, payload):
    if sink is not None:
        sink.append({"run_id": run_id, "round": round_, "phase": phase,
                     "agent": agent, "event": event, "payload": payload})


def _decode(domain, v):
    # a deviant's shares can reconstruct to any field element, so the
    # elected value may fall outside the encoded domain
    return domain[v] if 0 <= v < len(domain) else f"#{v}"


def _decision_label(decision):
    if decision is UNDECIDED:
        return "undecided"
    if decision == BOT:
        return "bot"
    if decision == NO_DECISION:
        return "no_decision"
    return decision[1]


def run(config: RunConfig) -> RunResult:
    config.validate()
    n, t, seed = config.n, config.t, config.seed
    pattern = config.pattern
    if pattern is None:
        pattern = (sample_blind_pattern(seed, n, t) if config.sample_pattern
                   else FailurePattern())
    pattern.validate(n, t)
    values = config.values or sample_values(seed, n, config.value_domain)
    domain = list(config.value_domain)
    encoded = [domain.index(v) for v in values]

    agents = {}
    for i in range(1, n + 1):
        rng = random.Random(f"{seed}:agent:{i}")
        agents[i] = init_agent(i, n, t, encoded[i - 1], rng, config.field_p)

    dev = config.deviation
    if dev is not None:
        dev.bind(n=n, t=t, domain_size=len(domain))
        dev.after_init(agents[dev.agent])

    sink = config.trace
    run_id = f"{n}-{t}-{seed}"
    _emit(sink, run_id, 0, "meta", 0, "config",
          {"n": n, "t": t, "seed": seed, "values": values,
           "domain": domain, "deviation": dev.describe() if dev else None})

    monitor = (InvariantMonitor(n, t, pattern)
               if config.check_invariants else None)
    total = t + 4
    for r in range(1, total + 1):
        outboxes = {}
        for i in sorted(agents):
            st = agents[i]
            msgs = send_phase(st, r)
            if dev is not None and i == dev.agent:
                msgs = dev.mutate_outgoing(st, r, msgs)
            outboxes[i] = msgs
            _emit(sink, run_id, r, "send", i, "sent",
                  {"to": sorted(msgs)})
        inboxes = deliver(r, outboxes, pattern, n)
        for i in sorted(agents):
            st = agents[i]
            inbox = inboxes[i]
            if dev is not None and i == dev.agent:
                inbox = dev.filter_inbox(st, r, inbox)
            before = st.decision
            receive_phase(st, r, inbox)
            if dev is not None and i == dev.agent:
                dev.after_receive(st, r)
            _emit(sink, run_id, r, "receive", i, "received",
                  {"from": sorted(inbox), "lost": sorted(st.lost),
                   "decision": _decision_label(st.decision)})
            if st.decision is not before and st.decision == BOT:
                _emit(sink, run_id, r, "receive", i, "inconsistency",
                      _error_payload(st))
        for i in sorted(agents):
            st = agents[i]
            before = st.decision
            compute_phase(st, r)
            if dev is not None and i == dev.agent:
                dev.after_compute(st, r)
            if st.decision is not before and st.decision == BOT:
                _emit(sink, run_id, r, "compute", i, "inconsistency",
                      _error_payload(st))
            if r == t + 3 and st.m_star is not None:
                _emit(sink, run_id, r, "compute", i, "election",
                      {"m_star": st.m_star, "D": list(st.d_set),
                       "elected": (_decode(domain, st.elected)
                                   if st.elected is not None else None)})
        if monitor is not None:
            monitor.after_round(agents, r)

    decisions, utilities, errors = {}, {}, {}
    decided_values = set()
    any_bot = False
    for i, st in sorted(agents.items()):
        d = st.decision
        if d == BOT:
            decisions[i] = "bot"
            any_bot = True
        elif d == NO_DECISION:
            decisions[i] = "no_decision"
        elif d is UNDECIDED:
            decisions[i] = "undecided"
            any_bot = True
        else:
            decisions[i] = _decode(domain, d[1])
            decided_values.add(d[1])
        if st.last_error is not None:
            errors[i] = str(st.last_error)

    if any_bot or len(decided_values) != 1:
        outcome = ("bot",) if any_bot else ("no_value",)
        b2 = config.utilities[2]
        utilities = {i: b2 for i in agents}
    else:
        v_star = next(iter(decided_values))
        outcome = ("consensus", _decode(domain, v_star))
        b0, b1, _ = config.utilities
        utilities = {i: (b0 if encoded[i - 1] == v_star else b1)
                     for i in agents}

    invariants = _basic_invariants(agents, decisions, values, domain)
    if monitor is not None:
        invariants.update(monitor.finalize(agents))

    guesses = []
    applied = False
    if dev is not None:
        applied = dev.applied
        for (peer, round_, guess) in dev.guesses:
            actual = agents[peer].own_randoms.get(round_)
            if actual is None:
                continue  # the peer never drew that round's random
            guesses.append({"peer": peer, "round": round_, "guess": guess,
                            "hit": guess == actual})

    ms = {st.m_star for st in agents.values() if st.m_star is not None}
    ds = {tuple(st.d_set) for st in agents.values() if st.d_set is not None}
    result = RunResult(
        config=config, pattern=pattern, values=values, decisions=decisions,
        utilities=utilities, outcome=outcome, invariants=invariants,
        m_star=(next(iter(ms)) if len(ms) == 1 else sorted(ms) or None),
        d_set=(list(next(iter(ds))) if len(ds) == 1 else None),
        errors=errors, guesses=guesses, deviation_applied=applied)
    _emit(sink, run_id, total, "summary", 0, "result",
          {"decisions": decisions, "outcome": list(outcome),
           "utilities": utilities,
           "invariants": {k: ok for k, (ok, _) in invariants.items()}})
    return result


def _error_payload(st):
    err = st.last_error
    payload = {"agent": st.id, "error": str(err)}
    if hasattr(err, "category"):
        payload["category"] = err.category
        payload["rule"] = err.rule
    return payload


def _basic_invariants(agents, decisions, values, domain):
    """Safety properties checkable from decisions alone."""
    decided = {d for d in decisions.values()
               if d not in ("bot", "no_decision", "undecided")}
    agreement = len(decided) <= 1
    termination = all(d != "undecided" for d in decisions.values())
    validity = decided <= set(values)
    return {
        "uniform_agreement": (agreement, f"decided values {sorted(decided)}"),
        "termination": (termination, ""),
        "validity": (validity, f"{sorted(decided)} vs initial {sorted(set(values))}"),
    }


@dataclass
class ExperimentSummary:
    deviation: str
    runs: int
    mean_honest: float
    mean_deviant: float
    mean_diff: float
    se_diff: float
    gain_within_noise: bool        # deviant gain <= 2 standard errors
    detection_rate: float          # fraction of deviant runs with any bot
    applied_rate: float
    guess_trials: int = 0
    guess_hits: int = 0

    @property
    def guess_rate(self):
        return self.guess_hits / self.guess_trials if self.guess_trials else None


def deviation_experiment(base: RunConfig, make_dev, runs: int) -> ExperimentSummary:
    """Paired comparison of the deviant's utility against its honest self.

    Every trial replays the same seed, failure pattern and values twice,
    once honest and once with the deviation installed, and records the
    utility difference for the deviating agent.
    """
    diffs, honest_u, dev_u = [], [], []
    detected = 0
    applied = 0
    guess_trials = guess_hits = 0
    label = None
    for k in range(runs):
        seed = base.seed + k
        pattern = sample_blind_pattern(seed, base.n, base.t)
        values = sample_values(seed, base.n, base.value_domain)
        honest_cfg = replace(base, seed=seed, pattern=pattern, values=values,
                             deviation=None, check_invariants=False,
                             trace=None)
        dev = make_dev()
        label = dev.describe()
        dev_cfg = replace(honest_cfg, deviation=dev)
        rh = run(honest_cfg)
        rd = run(dev_cfg)
        hu = rh.utilities[dev.agent]
        du = rd.utilities[dev.agent]
        honest_u.append(hu)
        dev_u.append(du)
        diffs.append(du - hu)
        if "bot" in rd.decisions.values():
            detected += 1
        if rd.deviation_applied:
            applied += 1
        for g in rd.guesses:
            guess_trials += 1
            guess_hits += g["hit"]
    mean_diff = statistics.fmean(diffs)
    se = (statistics.stdev(diffs) / math.sqrt(len(diffs))
          if len(diffs) > 1 else 0.0)
    return ExperimentSummary(
        deviation=label, runs=runs,
        mean_honest=statistics.fmean(honest_u),
        mean_deviant=statistics.fmean(dev_u),
        mean_diff=mean_diff, se_diff=se,
        gain_within_noise=mean_diff <= 2 * se,
        detection_rate=detected / runs,
        applied_rate=applied / runs,
        guess_trials=guess_trials, guess_hits=guess_hits)
