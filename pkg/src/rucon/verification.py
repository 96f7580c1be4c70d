"""Inconsistency detection and the merge of received link-state reports.

Each round, every agent cross-checks the link-state tables it receives
against what a legal relay history could have produced, then folds them
into its own tables. Anything that no honest execution can explain makes
the checking agent give up with the punishment decision; the error names
the rule that fired so the behaviour is testable rule by rule.

Rule identifiers:

  chain/claim1..claim7   -- message-chain structure of a received table
  round/claim8           -- a report's reporter must be a link endpoint
  round/claim9..claim12  -- round relations for direct-link merge cases
  round/case7..case9     -- round relations for indirect-link merge cases
  source/claim13,claim14 -- provenance tags must match observed connectivity
  format/*               -- structural validity of a report
  random/*               -- report payloads must match registered randoms
  merge/case2            -- a faulty report for a link observed correct now
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InconsistencyError
from .links import R, X, append_hs, link_of


def register_random(randoms: dict, agent: int, round_: int, value: int) -> None:
    """Record one message random; re-registration must agree."""
    key = (agent, round_)
    known = randoms.get(key)
    if known is None:
        randoms[key] = value
    elif known != value:
        raise InconsistencyError(
            "random", "random-conflict", None, round_,
            f"agent {agent} round {round_}: {value} vs registered {known}",
        )


def register_xrandom(xrandoms: dict, gen: int, round_: int, link, recipient: int,
                     bit: int) -> None:
    """Record one fault-evidence bit; re-registration must agree."""
    slot = xrandoms.setdefault((gen, round_, link), {})
    known = slot.get(recipient)
    if known is None:
        slot[recipient] = bit
    elif known != bit:
        raise InconsistencyError(
            "random", "xrandom-conflict", link, round_,
            f"generator {gen} recipient {recipient}: {bit} vs {known}",
        )


@dataclass
class MergeContext:
    """Everything one agent needs to verify and merge one sender's table."""

    n: int
    t: int
    self_id: int
    round: int                      # the round in which the merge runs
    ns: dict                        # local NS, already holding this round's direct detections
    hs: dict                        # local HS
    sender: int
    recv_ns: dict                   # the sender's table (its previous-round NS)
    randoms: dict
    xrandoms: dict
    conn_history: dict = field(default_factory=dict)  # round -> frozenset of heard peers


def _knows_round(t_a, r: int) -> bool:
    """Whether a stored report pins down the link state at round r.

    A correct-link report covers every round up to its own; a faulty-link
    report covers all rounds, because it records the earliest failure round
    (correct before, faulty from then on).
    """
    if t_a is None:
        return False
    if t_a[0] == X:
        return True
    return t_a[1] >= r


def verify_msg_chain(ctx: MergeContext):
    """Check a received table against the legal relay histories (claims 1-7).

    The sender's connectivity partition (still-connected vs disconnected
    peers) is reconstructed from the table's own direct-link entries, then
    every indirect entry's round number is checked against what relays
    through that partition could have carried.
    """
    m = ctx.round - 1
    recv = ctx.recv_ns
    j = ctx.sender
    n, t = ctx.n, ctx.t
    if m == 0:
        if recv:
            raise InconsistencyError(
                "chain", "claim2", None, 0, "nonempty table before round 1")
        return

    connected: set = set()
    x_round: dict = {}   # disconnected peer -> earliest failure round of the direct link
    r_count = 0
    for p in range(1, n + 1):
        if p == j:
            continue
        link = link_of(j, p)
        entry = recv.get(link)
        t_a = entry[0] if entry is not None else None
        if t_a is None:
            raise InconsistencyError(
                "chain", "claim1", link, m, "direct-link state unknown")
        if t_a[1] > m:
            raise InconsistencyError(
                "chain", "claim2", link, t_a[1], "direct-link state from the future")
        if t_a[0] == R:
            if t_a[1] < m:
                raise InconsistencyError(
                    "chain", "claim1", link, m, "direct-link round-m state unknown")
            connected.add(p)
            r_count += 1
        else:
            x_round[p] = t_a[1]
    if r_count < n - t - 1:
        raise InconsistencyError(
            "chain", "claim1", None, m,
            f"only {r_count} correct direct links, need {n - t - 1}")

    for k in range(1, n):
        for p in range(k + 1, n + 1):
            if k == j or p == j:
                continue
            link = (k, p)
            entry = recv.get(link)
            t_a = entry[0] if entry is not None else None
            k_conn = k in connected
            p_conn = p in connected
            if k_conn or p_conn:
                # Claim 5: known at m-1, unknown from m on.
                if t_a is None:
                    if m - 1 >= 1:
                        raise InconsistencyError(
                            "chain", "claim5", link, m - 1,
                            "link of a connected agent unknown at the previous round")
                elif t_a[0] == R:
                    if t_a[1] != m - 1:
                        raise InconsistencyError(
                            "chain", "claim5", link, t_a[1],
                            "connected-agent link must be reported for the previous round")
                elif t_a[1] > m - 1:
                    raise InconsistencyError(
                        "chain", "claim5", link, t_a[1],
                        "failure round beyond what relays could carry")
                if k_conn != p_conn and t_a is not None:
                    conn_end, dis_end = (k, p) if k_conn else (p, k)
                    if t_a[0] == R:
                        # Claim 6: the disconnected end was alive at m-1, so its
                        # other links must be known through m-2 and no further.
                        for q in x_round:
                            if q == dis_end:
                                continue
                            l2 = link_of(dis_end, q)
                            e2 = recv.get(l2)
                            t2 = e2[0] if e2 is not None else None
                            if t2 is None:
                                if m - 2 >= 1:
                                    raise InconsistencyError(
                                        "chain", "claim6", l2, m - 2,
                                        "link of a recently alive agent unknown")
                            elif t2[0] == R:
                                if t2[1] != m - 2:
                                    raise InconsistencyError(
                                        "chain", "claim6", l2, t2[1],
                                        "round must be exactly two behind")
                            elif t2[1] > m - 2:
                                raise InconsistencyError(
                                    "chain", "claim6", l2, t2[1],
                                    "failure round beyond what relays could carry")
                    else:
                        # Claim 7: the link failed at m'; the disconnected end
                        # was reachable until then, so its other links must be
                        # known through m'-2.
                        m_prime = t_a[1]
                        if m_prime - 2 >= 1:
                            for q in x_round:
                                if q == dis_end:
                                    continue
                                l2 = link_of(dis_end, q)
                                e2 = recv.get(l2)
                                t2 = e2[0] if e2 is not None else None
                                if not _knows_round(t2, m_prime - 2):
                                    raise InconsistencyError(
                                        "chain", "claim7", l2, m_prime - 2,
                                        "state implied reachable is unknown")
            else:
                # Both endpoints disconnected.
                if t_a is not None and t_a[1] > m - 2:
                    raise InconsistencyError(
                        "chain", "claim3", link, t_a[1],
                        "state of a doubly disconnected pair too recent")
                m1 = max(x_round[k], x_round[p])
                if m1 - 2 >= 1 and not _knows_round(t_a, m1 - 2):
                    raise InconsistencyError(
                        "chain", "claim4", link, m1 - 2,
                        "state reachable before both disconnections is unknown")


def _check_format(ctx: MergeContext, link, t_a, t_b):
    n, r = ctx.n, ctx.round
    ok = (
        type(t_a) is tuple and len(t_a) == 4
        and (t_a[0] == R or t_a[0] == X)
        and type(t_a[1]) is int and 1 <= t_a[1] < r
        and type(t_a[2]) is int and 1 <= t_a[2] <= n
    )
    if ok:
        if t_a[0] == R:
            ok = type(t_a[3]) is int and 0 <= t_a[3] < n
        else:
            bits = t_a[3]
            ok = (type(bits) is tuple and len(bits) == n - 1
                  and bits.count(0) + bits.count(1) == n - 1)
    if not ok:
        raise InconsistencyError("format", "bad-state", link, None,
                                 f"malformed report {t_a!r}")
    if t_b is None:
        # A self-observed state: only on the sender's own links, by itself.
        if ctx.sender not in link or t_a[2] != ctx.sender:
            raise InconsistencyError(
                "format", "bad-source", link, t_a[1],
                "self-observed tag on a foreign link")
    else:
        ok = (isinstance(t_b, tuple) and len(t_b) == 2
              and isinstance(t_b[0], int) and 1 <= t_b[0] <= n
              and t_b[0] != ctx.sender
              and isinstance(t_b[1], int) and 1 <= t_b[1] <= r - 1
              and t_a[1] < t_b[1])
        if not ok:
            raise InconsistencyError("format", "bad-source", link, t_a[1],
                                     f"malformed source tag {t_b!r}")


def _check_source(ctx: MergeContext, link, t_a, t_b):
    if t_b is None:
        return
    src, m_src = t_b
    # Claim 14: adopted from src in the immediately previous round means the
    # sender must itself show its link to src correct at that round.
    if m_src == ctx.round - 1:
        e = ctx.recv_ns.get(link_of(ctx.sender, src))
        if e is None or e[0][0] != R:
            raise InconsistencyError(
                "source", "claim14", link, m_src,
                f"sender adopted from {src} at round {m_src} without a correct link")
    # Claim 13: if we heard src in that round too (or the tag names us), the
    # report must already sit in our own history.
    if src == ctx.self_id or src in ctx.conn_history.get(m_src, ()):
        if t_a not in ctx.hs.get((link, t_a[1]), ()):
            raise InconsistencyError(
                "source", "claim13", link, t_a[1],
                f"report tagged from {src} round {m_src} is not in local history")


def _check_random(ctx: MergeContext, link, t_a):
    if t_a[0] == R:
        reporter = t_a[2]
        other = link[0] if link[1] == reporter else link[1]
        register_random(ctx.randoms, other, t_a[1], t_a[3])
    else:
        gen, bits = t_a[2], t_a[3]
        slot = ctx.xrandoms.setdefault((gen, t_a[1], link), {})
        idx = 0
        for w in range(1, ctx.n + 1):
            if w == gen:
                continue
            known = slot.get(w)
            if known is not None and known != bits[idx]:
                raise InconsistencyError(
                    "random", "xrandom-mismatch", link, t_a[1],
                    f"evidence bit for recipient {w} is wrong")
            slot[w] = bits[idx]
            idx += 1


def _check_round_relations(ctx: MergeContext, link, t_a):
    i = ctx.self_id
    local = ctx.ns.get(link)
    if local is None:
        return
    lta = local[0]
    lr, li = lta[1], lta[2]
    rr, ri = t_a[1], t_a[2]
    if link[0] == i or link[1] == i:
        partner = link[0] if link[1] == i else link[1]
        if lta[0] == R and t_a[0] == R:
            if rr >= lr:
                raise InconsistencyError(
                    "round", "claim9", link, rr,
                    "relayed correct-report at or beyond the current round")
        elif lta[0] == X and t_a[0] == R:
            if rr > lr:
                raise InconsistencyError(
                    "round", "claim10", link, rr,
                    "correct-report newer than the known failure round")
        elif lta[0] == X and t_a[0] == X:
            if li == i:
                if ri == i:
                    if t_a != lta:
                        raise InconsistencyError(
                            "round", "claim11", link, rr,
                            "our own report came back altered")
                elif abs(lr - rr) > 1:
                    raise InconsistencyError(
                        "round", "claim11", link, rr,
                        "endpoint failure rounds differ by more than one")
            else:  # local report by the partner
                if ri == partner:
                    if t_a != lta:
                        raise InconsistencyError(
                            "round", "claim12", link, rr,
                            "partner's report came back altered")
                elif rr != lr + 1:
                    raise InconsistencyError(
                        "round", "claim12", link, rr,
                        "our detection must trail the partner's by one round")
        # local R / recv X is Case 2, handled at merge
    else:
        if lta[0] == R and t_a[0] == X:
            if (ri == li and lr >= rr) or (ri != li and lr > rr):
                raise InconsistencyError(
                    "round", "case7", link, rr,
                    "failure round contradicts a correct-report we hold")
        elif lta[0] == X and t_a[0] == R:
            if (ri == li and lr <= rr) or (ri != li and lr < rr):
                raise InconsistencyError(
                    "round", "case8", link, rr,
                    "correct-report contradicts a failure round we hold")
        elif lta[0] == X and t_a[0] == X:
            if ri == li:
                if t_a != lta:
                    raise InconsistencyError(
                        "round", "case9", link, rr,
                        "same reporter, different failure report")
            elif abs(lr - rr) > 1:
                raise InconsistencyError(
                    "round", "case9", link, rr,
                    "endpoint failure rounds differ by more than one")


def verify_state(ctx: MergeContext, link, recv, checked_format=False):
    """All four verification categories for one received report."""
    t_a, t_b = recv
    if not checked_format:
        _check_format(ctx, link, t_a, t_b)
    if t_a[2] != link[0] and t_a[2] != link[1]:
        raise InconsistencyError(
            "round", "claim8", link, t_a[1],
            f"reporter {t_a[2]} is not an endpoint")
    _check_source(ctx, link, t_a, t_b)
    _check_random(ctx, link, t_a)
    _check_round_relations(ctx, link, t_a)


def merge_state(ctx: MergeContext, link, recv):
    """Fold one verified report into the local tables (the 11-case table).

    Case 10 (received unknown) never reaches here: absence of the entry is
    handled by the caller. The only error path left after verification is
    Case 2, a faulty report for a direct link we observed correct this very
    round.
    """
    t_a, _ = recv
    ns, hs = ctx.ns, ctx.hs
    i, j, r = ctx.self_id, ctx.sender, ctx.round
    local = ns.get(link)
    if local is None:  # Case 11
        ns[link] = (t_a, (j, r))
        append_hs(hs, link, t_a)
        return
    lta = local[0]
    if link[0] == i or link[1] == i:
        if lta[0] == R and t_a[0] == R:          # Case 1
            append_hs(hs, link, t_a)
        elif lta[0] == R and t_a[0] == X:        # Case 2
            raise InconsistencyError(
                "merge", "case2", link, t_a[1],
                "faulty report for a link observed correct this round")
        elif lta[0] == X and t_a[0] == R:        # Case 3
            append_hs(hs, link, t_a)
        else:                                    # Cases 4 and 5
            if lta[2] == i:                      # Case 4
                if t_a[1] == lta[1] or t_a[1] == lta[1] + 1:
                    append_hs(hs, link, t_a)
                elif t_a[1] == lta[1] - 1:
                    ns[link] = (t_a, (j, r))
                    append_hs(hs, link, t_a)
            # Case 5 (local report by the partner): nothing to do.
    else:
        if lta[0] == R and t_a[0] == R:          # Case 6
            if t_a[1] > lta[1]:
                ns[link] = (t_a, (j, r))
            append_hs(hs, link, t_a)
        elif lta[0] == R and t_a[0] == X:        # Case 7
            ns[link] = (t_a, (j, r))
            append_hs(hs, link, t_a)
        elif lta[0] == X and t_a[0] == R:        # Case 8
            append_hs(hs, link, t_a)
        else:                                    # Case 9
            if t_a[2] != lta[2]:
                if lta[1] > t_a[1]:
                    ns[link] = (t_a, (j, r))
                append_hs(hs, link, t_a)


def verify_and_update(ctx_base: dict, received: dict, own_xbits: dict):
    """One round of the full verify-and-update pass for one agent.

    ctx_base carries n, t, self_id, round, ns, hs, randoms, xrandoms and
    conn_history; received maps each heard sender to its table; own_xbits
    maps each of the agent's links to this round's fault-evidence vector.
    Mutates ns/hs in place; raises InconsistencyError on any violation.
    """
    n = ctx_base["n"]
    i = ctx_base["self_id"]
    r = ctx_base["round"]
    ns, hs = ctx_base["ns"], ctx_base["hs"]
    randoms = ctx_base["randoms"]
    senders = sorted(received)
    heard = set(senders)

    # Phase 1: this round's direct-link detections.
    for j in senders:
        link = link_of(i, j)
        t_a = (R, r, i, randoms[(j, r)])
        ns[link] = (t_a, None)
        append_hs(hs, link, t_a)
    for j in range(1, n + 1):
        if j == i or j in heard:
            continue
        link = link_of(i, j)
        entry = ns.get(link)
        if entry is not None and entry[0][0] == X:
            continue  # earliest failure round already recorded
        t_a = (X, r, i, own_xbits[link])
        ns[link] = (t_a, None)
        append_hs(hs, link, t_a)

    # Phase 2: message-chain verification per sender. A structural sweep
    # runs first so the chain checks never dereference a malformed report.
    contexts = {}
    for j in senders:
        ctx = MergeContext(
            n=n, t=ctx_base["t"], self_id=i, round=r, ns=ns, hs=hs,
            sender=j, recv_ns=received[j], randoms=randoms,
            xrandoms=ctx_base["xrandoms"], conn_history=ctx_base["conn_history"],
        )
        contexts[j] = ctx
        for link, recv in ctx.recv_ns.items():
            if (type(link) is not tuple or len(link) != 2
                    or type(link[0]) is not int or type(link[1]) is not int
                    or not 1 <= link[0] < link[1] <= n
                    or type(recv) is not tuple or len(recv) != 2):
                raise InconsistencyError("format", "bad-state", None, None,
                                         f"malformed link key {link!r}")
            _check_format(ctx, link, recv[0], recv[1])
        verify_msg_chain(ctx)

    # Phase 3: per-link verify and merge, in fixed order. An entry equal in
    # every field to one already processed this round is skipped: verifying
    # and merging it again is a no-op (append is idempotent, adopt would
    # rewrite the same state), so only distinct reports cost anything.
    seen = set()
    for j in senders:
        ctx = contexts[j]
        recv_ns = received[j]
        for k in range(1, n):
            for p in range(k + 1, n + 1):
                link = (k, p)
                recv = recv_ns.get(link)
                if recv is None:    # Case 10
                    continue
                key = (link, recv)
                if key in seen:
                    continue
                verify_state(ctx, link, recv, checked_format=True)
                merge_state(ctx, link, recv)
                seen.add(key)
