"""Unilateral deviations for the equilibrium experiments.

Each deviation wraps one agent with hooks the simulator calls around the
normal phases. Deviations never touch other agents or the environment, so
a paired honest/deviant comparison isolates exactly the strategy change.

Types:
  1  inconsistent shares of a fake value to a subset of peers
  2  non-reconstructible garbage shares
  3  derandomized proposal, message randoms and evidence bits (all zero)
  4  structurally malformed messages from a chosen round
  5  ignore t+1 peers and keep running, optionally faking their link
     states with uniformly guessed message randoms
  6  lie about one link state (eight selectable sub-cases)
  7  alter the random carried by a relayed correct-report
  8  corrupt forwarded shares in the reconstruction round
  9  send a wrong consensus set in the final round
  10 fall silent from a chosen round (pretend crash)
"""

from __future__ import annotations

import random

from .agent import UNDECIDED, NO_DECISION, build_message
from .links import R, X, link_of
from .sharing import make_polynomial, share_for


class Deviation:
    """Base: an honest agent in disguise. Subclasses override hooks."""

    type_id = 0

    def __init__(self, agent: int = 1, seed: int = 0, **params):
        self.agent = agent
        self.params = params
        self.rng = random.Random(f"deviation:{self.type_id}:{agent}:{seed}")
        self.applied = False
        self.guesses = []       # (peer, round, guessed random)
        self.n = self.t = self.domain_size = None

    def bind(self, n: int, t: int, domain_size: int):
        self.n, self.t, self.domain_size = n, t, domain_size

    def describe(self) -> str:
        extra = f" {self.params}" if self.params else ""
        return f"type{self.type_id}{extra}"

    def after_init(self, st):
        pass

    def mutate_outgoing(self, st, r: int, msgs: dict) -> dict:
        return msgs

    def filter_inbox(self, st, r: int, inbox: dict) -> dict:
        return inbox

    def after_receive(self, st, r: int):
        pass

    def after_compute(self, st, r: int):
        pass

    def _targets(self, default):
        return self.params.get("targets", default)


class FakeValueShares(Deviation):
    """Round 1: a subset of peers gets shares of a different value."""

    type_id = 1

    def mutate_outgoing(self, st, r, msgs):
        if r != 1:
            return msgs
        fake = (st.value + 1) % self.domain_size
        poly = make_polynomial(fake, self.rng, st.p)
        peers = sorted(msgs)
        for j in self._targets(peers[:len(peers) // 2]):
            if j in msgs:
                msgs[j]["q"] = share_for(poly, j).value
                self.applied = True
        return msgs


class GarbageShares(Deviation):
    """Round 1: shares that lie on no single line."""

    type_id = 2

    def mutate_outgoing(self, st, r, msgs):
        if r != 1:
            return msgs
        for j in self._targets(sorted(msgs)):
            if j in msgs:
                msgs[j]["q"] = (msgs[j]["q"] + 1 + j) % st.p
                self.applied = True
        return msgs


class Derandomized(Deviation):
    """All 'random' choices pinned to zero; messages stay well-formed."""

    type_id = 3

    def _zero_round(self, st, r):
        st.own_randoms[r] = 0
        st.randoms[(st.id, r)] = 0
        for link, per_recipient in st.own_xbits[r].items():
            for k in per_recipient:
                per_recipient[k] = 0
                st.xrandoms[(st.id, r, link)][k] = 0

    def after_init(self, st):
        st.proposal = 0
        st.b_poly = make_polynomial(0, self.rng, st.p)
        q_at = st.shares[st.id][st.id][0]
        st.shares[st.id][st.id] = (q_at, share_for(st.b_poly, st.id).value)
        self._zero_round(st, 1)
        self.applied = True

    def after_compute(self, st, r):
        if st.decision is UNDECIDED and r + 1 in st.own_xbits:
            self._zero_round(st, r + 1)


class MalformedMessages(Deviation):
    """From round m, targeted peers receive structural garbage."""

    type_id = 4

    def mutate_outgoing(self, st, r, msgs):
        if r < self.params.get("round", 2):
            return msgs
        for j in self._targets(sorted(msgs)):
            if j in msgs:
                msgs[j] = {"sender": st.id, "round": r, "kind": "garbage"}
                self.applied = True
        return msgs


class IgnorePeers(Deviation):
    """Drop t+1 inboxes, override the give-up rule, keep participating.

    With guessing enabled the deviant also rewrites the dropped links in
    its outgoing table to look correct, which requires inventing the
    dropped peers' message randoms; every invented random is recorded so
    the hit rate can be compared against uniform chance.
    """

    type_id = 5

    def __init__(self, agent=1, seed=0, **params):
        super().__init__(agent, seed, **params)
        self.dropped = None
        self._guess_cache = {}

    def _guess(self, st, peer, round_):
        key = (peer, round_)
        if key not in self._guess_cache:
            g = self.rng.randrange(self.n)
            self._guess_cache[key] = g
            self.guesses.append((peer, round_, g))
        return self._guess_cache[key]

    def filter_inbox(self, st, r, inbox):
        m = self.params.get("round", 2)
        if r < m:
            return inbox
        if self.dropped is None:
            candidates = [j for j in range(1, self.n + 1)
                          if j != st.id and j not in st.lost]
            self.dropped = set(candidates[:self.t + 1])
            self.applied = True
        return {j: msg for j, msg in inbox.items() if j not in self.dropped}

    def after_receive(self, st, r):
        if st.decision == NO_DECISION:
            st.decision = UNDECIDED

    def mutate_outgoing(self, st, r, msgs):
        # The give-up rule would have silenced us towards lost peers; a
        # deviant bent on staying in the game keeps sending to everyone.
        if st.decision is not UNDECIDED:
            return msgs
        for q in sorted(st.lost):
            msgs[q] = build_message(st, r, q)
        return msgs

    def after_compute(self, st, r):
        if not self.params.get("guess", True):
            return
        if st.decision is not UNDECIDED or self.dropped is None or r > self.t + 2:
            return
        dropped = sorted(self.dropped)
        for q in dropped:
            link = link_of(st.id, q)
            st.ns[link] = ((R, r, st.id, self._guess(st, q, r)), None)
        for a_idx in range(len(dropped)):
            for b_idx in range(a_idx + 1, len(dropped)):
                qa, qb = dropped[a_idx], dropped[b_idx]
                if r < 2:
                    continue
                st.ns[(qa, qb)] = (
                    (R, r - 1, qa, self._guess(st, qb, r - 1)), (qa, r))


def _fabricate_bits(st, rng, reporter, round_, link, n):
    """An evidence vector that matches whatever bits we genuinely know."""
    known = st.xrandoms.get((reporter, round_, link), {})
    return tuple(known.get(w, rng.randrange(2))
                 for w in range(1, n + 1) if w != reporter)


class LinkStateLie(Deviation):
    """One-shot lie about a single link state in the outgoing table.

    Sub-cases: 1 own correct link reported faulty; 2 own faulty link
    reported correct; 3 foreign correct link reported faulty; 4 foreign
    faulty link reported correct; 5 own link omitted; 6 foreign link
    omitted; 7 foreign failure round lowered; 8 evidence bits altered.
    """

    type_id = 6

    def mutate_outgoing(self, st, r, msgs):
        m = self.params.get("round", 3)
        case = self.params.get("case", 1)
        if r != m or not msgs:
            return msgs
        lie = self._build_lie(st, r, case)
        if lie is None:
            return msgs
        link, entry = lie
        self.applied = True
        for j in msgs:
            ns = dict(msgs[j]["ns"])
            if entry is None:
                ns.pop(link, None)
            else:
                ns[link] = entry
            msgs[j]["ns"] = ns
        return msgs

    def _pick(self, st, want_direct, want_kind):
        i, n = st.id, self.n
        for k in range(1, n):
            for p in range(k + 1, n + 1):
                link = (k, p)
                direct = i in link
                if direct != want_direct:
                    continue
                entry = st.ns.get(link)
                if entry is None or entry[0][0] != want_kind:
                    continue
                return link, entry
        return None

    def _build_lie(self, st, r, case):
        i, n = st.id, self.n
        if case == 1:
            pick = self._pick(st, True, R)
            if pick is None:
                return None
            link, _ = pick
            ro = r - 2 if r >= 3 else r - 1
            bits = tuple(st.own_xbits[ro][link][w]
                         for w in sorted(st.own_xbits[ro][link]))
            return link, ((X, ro, i, bits), None)
        if case == 2:
            pick = self._pick(st, True, X)
            if pick is None:
                return None
            link, _ = pick
            return link, ((R, r - 1, i, self.rng.randrange(n)), None)
        if case == 3:
            pick = self._pick(st, False, R)
            if pick is None:
                return None
            link, entry = pick
            ro = entry[0][1]
            z = link[0]
            bits = _fabricate_bits(st, self.rng, z, ro, link, n)
            return link, ((X, ro, z, bits), (z, min(ro + 1, r - 1)))
        if case == 4:
            pick = self._pick(st, False, X)
            if pick is None:
                return None
            link, entry = pick
            ro = entry[0][1]
            z = link[0]
            if ro + 1 > r - 1:
                return None
            return link, ((R, ro, z, self.rng.randrange(n)), (z, ro + 1))
        if case == 5:
            pick = self._pick(st, True, R) or self._pick(st, True, X)
            return (pick[0], None) if pick else None
        if case == 6:
            pick = self._pick(st, False, R) or self._pick(st, False, X)
            return (pick[0], None) if pick else None
        if case == 7:
            pick = self._pick(st, False, X)
            if pick is None:
                return None
            link, entry = pick
            ta, tb = entry
            if ta[1] < 2:
                return None
            bits = _fabricate_bits(st, self.rng, ta[2], ta[1] - 1, link, n)
            return link, ((X, ta[1] - 1, ta[2], bits), tb)
        if case == 8:
            pick = self._pick(st, True, X)
            if pick is None:
                return None
            link, entry = pick
            ta, tb = entry
            bits = list(ta[3])
            bits[0] ^= 1
            return link, ((X, ta[1], ta[2], tuple(bits)), tb)
        raise ValueError(f"unknown lie sub-case {case}")


class WrongRandomRelay(Deviation):
    """Alter the random inside one relayed correct-report."""

    type_id = 7

    def mutate_outgoing(self, st, r, msgs):
        if r != self.params.get("round", 3) or not msgs:
            return msgs
        i, n = st.id, self.n
        for k in range(1, n):
            for p in range(k + 1, n + 1):
                link = (k, p)
                if i in link:
                    continue
                entry = st.ns.get(link)
                if entry is None or entry[0][0] != R:
                    continue
                ta, tb = entry
                fake = ((R, ta[1], ta[2], (ta[3] + 1) % n), tb)
                for j in msgs:
                    ns = dict(msgs[j]["ns"])
                    ns[link] = fake
                    msgs[j]["ns"] = ns
                self.applied = True
                return msgs
        return msgs


class CorruptShareRelay(Deviation):
    """Reconstruction round: one forwarded share is shifted off the line."""

    type_id = 8

    def mutate_outgoing(self, st, r, msgs):
        if r != self.t + 3:
            return msgs
        for j in self._targets(sorted(msgs)):
            if j not in msgs:
                continue
            shares = dict(msgs[j]["shares"])
            if not shares:
                continue
            gen = min(shares)
            q, b = shares[gen]
            shares[gen] = ((q + 1) % st.p, b)
            msgs[j]["shares"] = shares
            self.applied = True
        return msgs


class WrongConsensus(Deviation):
    """Final round: announce a consensus set nobody computed."""

    type_id = 9

    def mutate_outgoing(self, st, r, msgs):
        if r != self.t + 4:
            return msgs
        if st.consensus:
            fake = (next(iter(st.consensus)) + 1) % self.domain_size
        else:
            fake = 0
        for j in msgs:
            msgs[j]["consensus"] = frozenset({fake})
        self.applied = bool(msgs)
        return msgs


class PretendCrash(Deviation):
    """Send nothing from round m on; keep listening."""

    type_id = 10

    def mutate_outgoing(self, st, r, msgs):
        if r >= self.params.get("round", 1):
            self.applied = True
            return {}
        return msgs


DEVIATION_TYPES = {cls.type_id: cls for cls in (
    FakeValueShares, GarbageShares, Derandomized, MalformedMessages,
    IgnorePeers, LinkStateLie, WrongRandomRelay, CorruptShareRelay,
    WrongConsensus, PretendCrash)}


def make_deviation(type_id: int, agent: int = 1, seed: int = 0, **params) -> Deviation:
    try:
        cls = DEVIATION_TYPES[type_id]
    except KeyError:
        raise ValueError(f"unknown deviation type {type_id}") from None
    return cls(agent=agent, seed=seed, **params)
