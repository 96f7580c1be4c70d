"""Per-agent protocol state machine: init, send, receive, compute.

An agent lives for t+4 synchronous rounds. Rounds 1..t+3 exchange value
shares and link-state tables; round t+4 exchanges the locally computed
consensus set. Decisions are terminal: a decided agent goes silent.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .errors import InconsistencyError, ProtocolViolationError
from .links import R, X, last_update, link_of
from .sharing import (DEFAULT_PRIME, LinearPolynomial, Share,
                      ShareInconsistencyError, make_polynomial, reconstruct,
                      share_for)
from .verification import register_random, register_xrandom, verify_and_update
from . import decision as decision_mod

UNDECIDED = None
BOT = ("bot",)           # punishment decision: an inconsistency was detected
NO_DECISION = ("no_decision",)


def value_decision(v):
    return ("value", v)


class MalformedMessageError(Exception):
    """An inbound message does not have the shape this round requires."""


@dataclass
class AgentState:
    id: int
    n: int
    t: int
    p: int
    value: int                 # own value, encoded as a field element
    proposal: int
    q_poly: LinearPolynomial
    b_poly: LinearPolynomial
    rng: random.Random
    lost: set = field(default_factory=set)
    ns: dict = field(default_factory=dict)
    hs: dict = field(default_factory=dict)
    shares: dict = field(default_factory=dict)       # generator -> {point -> (q, b)}
    randoms: dict = field(default_factory=dict)      # (agent, round) -> int
    xrandoms: dict = field(default_factory=dict)     # (gen, round, link) -> {recipient -> bit}
    own_randoms: dict = field(default_factory=dict)  # round -> int
    own_xbits: dict = field(default_factory=dict)    # round -> {link -> {recipient -> bit}}
    conn_history: dict = field(default_factory=dict)
    pending_ns: dict = field(default_factory=dict)   # sender -> its table, this round
    consensus: set = field(default_factory=set)
    decision: object = UNDECIDED
    last_error: object = None
    m_star: object = None
    d_set: object = None
    elected: object = None


def _gen_randoms(state: AgentState, r: int):
    """Draw and register the message random and fault-evidence bits for round r."""
    i, n = state.id, state.n
    rand = state.rng.randrange(n)
    state.own_randoms[r] = rand
    register_random(state.randoms, i, r, rand)
    bits: dict = {}
    for j in range(1, n + 1):
        if j == i:
            continue
        link = link_of(i, j)
        per_recipient = {}
        slot = state.xrandoms.setdefault((i, r, link), {})
        for k in range(1, n + 1):
            if k == i:
                continue
            bit = state.rng.getrandbits(1)
            per_recipient[k] = bit
            slot[k] = bit
        bits[link] = per_recipient
    state.own_xbits[r] = bits


def init_agent(i: int, n: int, t: int, value: int, rng: random.Random,
               p: int = DEFAULT_PRIME) -> AgentState:
    if not (n >= 3 and n > 2 * t + 1 and 1 <= i <= n):
        raise ValueError(f"bad parameters n={n}, t={t}, id={i}")
    if not 0 <= value < p:
        raise ValueError("value outside the field")
    proposal = rng.randrange(p)
    q_poly = make_polynomial(value, rng, p)
    b_poly = make_polynomial(proposal, rng, p)
    state = AgentState(id=i, n=n, t=t, p=p, value=value, proposal=proposal,
                       q_poly=q_poly, b_poly=b_poly, rng=rng)
    state.shares[i] = {i: (share_for(q_poly, i).value, share_for(b_poly, i).value)}
    _gen_randoms(state, 1)
    return state


def _xbits_vector(state: AgentState, r: int, link) -> tuple:
    """This round's evidence bits for one own link, recipients ascending."""
    per_recipient = state.own_xbits[r][link]
    return tuple(per_recipient[k] for k in sorted(per_recipient))


def build_message(state: AgentState, r: int, recipient: int) -> dict:
    i, t = state.id, state.t
    msg = {"sender": i, "round": r}
    if r <= t + 3:
        msg["rand"] = state.own_randoms[r]
    if r <= t + 2:
        msg["ns"] = dict(state.ns)
        msg["xr"] = {link: bits[recipient]
                     for link, bits in state.own_xbits[r].items()}
    if r == 1:
        msg["q"] = share_for(state.q_poly, recipient).value
        msg["b"] = share_for(state.b_poly, recipient).value
    elif r == t + 3:
        msg["ns"] = dict(state.ns)
        msg["shares"] = {gen: pts[i] for gen, pts in sorted(state.shares.items())
                         if gen != recipient and i in pts}
    elif r == t + 4:
        msg["consensus"] = frozenset(state.consensus)
    return msg


def send_phase(state: AgentState, r: int) -> dict:
    """Messages for round r, keyed by recipient. Decided agents send nothing."""
    if state.decision is not UNDECIDED:
        return {}
    msgs = {}
    for j in range(1, state.n + 1):
        if j == state.id or j in state.lost:
            continue
        msgs[j] = build_message(state, r, j)
    return msgs


def _require(cond, what):
    if not cond:
        raise MalformedMessageError(what)


def _ingest(state: AgentState, j: int, r: int, msg: dict):
    n, t, p = state.n, state.t, state.p
    _require(isinstance(msg, dict) and msg.get("sender") == j
             and msg.get("round") == r, "bad envelope")
    if r <= t + 3:
        rand = msg.get("rand")
        _require(isinstance(rand, int) and 0 <= rand < n, "bad message random")
        register_random(state.randoms, j, r, rand)
        ns = msg.get("ns")
        _require(isinstance(ns, dict), "missing link-state table")
        state.pending_ns[j] = ns
    if r <= t + 2:
        xr = msg.get("xr")
        _require(isinstance(xr, dict) and len(xr) == n - 1, "bad evidence bits")
        for link, bit in xr.items():
            _require(isinstance(link, tuple) and len(link) == 2 and j in link
                     and bit in (0, 1), "bad evidence bit")
            register_xrandom(state.xrandoms, j, r, link, state.id, bit)
    if r == 1:
        q, b = msg.get("q"), msg.get("b")
        _require(isinstance(q, int) and 0 <= q < p
                 and isinstance(b, int) and 0 <= b < p, "bad shares")
        state.shares.setdefault(j, {})[state.id] = (q, b)
    elif r == t + 3:
        shares = msg.get("shares")
        _require(isinstance(shares, dict), "missing forwarded shares")
        for gen, pair in shares.items():
            _require(isinstance(gen, int) and 1 <= gen <= n and gen != state.id
                     and isinstance(pair, tuple) and len(pair) == 2
                     and all(isinstance(x, int) and 0 <= x < p for x in pair),
                     "bad forwarded share")
            state.shares.setdefault(gen, {})[j] = pair
    elif r == t + 4:
        cons = msg.get("consensus")
        _require(isinstance(cons, frozenset), "bad consensus set")
        state.consensus |= cons


def receive_phase(state: AgentState, r: int, inbox: dict):
    """Take round-r messages; punish silence, give up on malformed input."""
    if state.decision is not UNDECIDED:
        return
    state.pending_ns = {}
    heard = []
    for j in range(1, state.n + 1):
        if j == state.id or j in state.lost:
            continue
        msg = inbox.get(j)
        if msg is None:
            state.lost.add(j)
            continue
        try:
            _ingest(state, j, r, msg)
        except (MalformedMessageError, InconsistencyError) as exc:
            state.decision = BOT
            state.last_error = exc
            return
        heard.append(j)
    state.conn_history[r] = frozenset(heard)
    if len(state.lost) > state.t:
        state.decision = NO_DECISION


def _finalize(state: AgentState):
    """End of round t+3: settle the history, elect, fill the consensus set."""
    total = state.t + 3
    last_update(state.hs, state.ns, total)
    try:
        m_star = decision_mod.decision_round(state.hs, state.n, state.t)
    except ProtocolViolationError as exc:
        state.decision = BOT
        state.last_error = exc
        return
    d_set = decision_mod.decision_set(state.hs, m_star, state.n, state.t)
    state.m_star, state.d_set = m_star, d_set
    values, proposals = {}, {}
    for a in d_set:
        if a == state.id:
            values[a], proposals[a] = state.value, state.proposal
            continue
        pts = state.shares.get(a, {})
        if len(pts) < 2:
            return  # not enough shares: leave consensus empty
        try:
            values[a] = reconstruct(
                [Share(pt, qb[0]) for pt, qb in pts.items()], state.p)
            proposals[a] = reconstruct(
                [Share(pt, qb[1]) for pt, qb in pts.items()], state.p)
        except ShareInconsistencyError as exc:
            state.decision = BOT
            state.last_error = exc
            return
    elected = decision_mod.elect(d_set, values, proposals)
    state.elected = elected
    state.consensus.add(elected)


def compute_phase(state: AgentState, r: int):
    if state.decision is not UNDECIDED:
        return
    t = state.t
    if r <= t + 3:
        ctx_base = {
            "n": state.n, "t": t, "self_id": state.id, "round": r,
            "ns": state.ns, "hs": state.hs, "randoms": state.randoms,
            "xrandoms": state.xrandoms, "conn_history": state.conn_history,
        }
        own_bits = {link: _xbits_vector(state, r, link)
                    for link in state.own_xbits[r]}
        try:
            verify_and_update(ctx_base, state.pending_ns, own_bits)
        except InconsistencyError as exc:
            state.decision = BOT
            state.last_error = exc
            return
        state.pending_ns = {}
        if r <= t + 2:
            _gen_randoms(state, r + 1)
        else:
            _finalize(state)
    else:
        if len(state.consensus) == 1:
            state.decision = value_decision(next(iter(state.consensus)))
        else:
            state.decision = BOT
