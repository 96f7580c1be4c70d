"""Status classification and the final value election.

After the last exchange round every agent holds the same link history, so
the functions here are pure: given a history they name which agents count
as faulty per round, pick the decision round (the latest round known to be
fault-quiet), the decision set, and finally the elected value.
"""

from __future__ import annotations

from .errors import ProtocolViolationError
from .links import FAULTY, classify, link_of

NONFAULTY = "nonfaulty"


def agent_status(hs: dict, r: int, n: int, t: int, removed=()):
    """Classify every agent at round r, starting from already-removed ones.

    An agent is faulty when, among the peers not yet removed, fewer than
    n - t - 1 - f of its links are non-faulty (f = number removed so far).
    Removal is recomputed to a fixpoint, scanning ids in ascending order.
    Returns (statuses, newly_faulty, removed) with removal being absorbing.
    """
    if not 1 <= r <= t + 3:
        raise ValueError(f"round {r} outside 1..{t + 3}")
    removed = set(removed)
    newly: set = set()
    changed = True
    while changed:
        changed = False
        for a in range(1, n + 1):
            if a in removed:
                continue
            good = 0
            for q in range(1, n + 1):
                if q == a or q in removed:
                    continue
                if classify(hs, link_of(a, q), r) != FAULTY:
                    good += 1
            if good < n - t - 1 - len(removed):
                removed.add(a)
                newly.add(a)
                changed = True
                break
    statuses = {a: (FAULTY if a in removed else NONFAULTY)
                for a in range(1, n + 1)}
    return statuses, newly, removed


def status_timeline(hs: dict, n: int, t: int):
    """Newly-faulty sets per round 1..t+3, with removal carrying forward."""
    removed: set = set()
    newly_by_round = {}
    for r in range(1, t + 4):
        _, newly, removed = agent_status(hs, r, n, t, removed)
        newly_by_round[r] = newly
    return newly_by_round


def clean_rounds(newly_by_round: dict):
    return sorted(r for r, newly in newly_by_round.items() if not newly)


def decision_round(hs: dict, n: int, t: int) -> int:
    """The round whose survivor set everyone can safely decide from.

    That is the earliest round immediately preceding a round in which no new
    agent turned faulty. It always lands in 1..t+2 for legal histories; a
    history without one is a protocol violation.
    """
    cleans = clean_rounds(status_timeline(hs, n, t))
    candidates = [c - 1 for c in cleans if c >= 2]
    if not candidates:
        raise ProtocolViolationError("no fault-quiet round in the history")
    m_star = min(candidates)
    if m_star > t + 2:
        raise ProtocolViolationError(f"decision round {m_star} beyond {t + 2}")
    return m_star


def decision_set(hs: dict, m_star: int, n: int, t: int):
    """Agents still non-faulty at the decision round, ascending."""
    removed: set = set()
    for r in range(1, m_star + 1):
        _, _, removed = agent_status(hs, r, n, t, removed)
    return [a for a in range(1, n + 1) if a not in removed]


def elect(d_ids, values: dict, proposals: dict):
    """Pick the decided value from the decision set's values and proposals.

    Agents holding the second-largest distinct proposal form the candidate
    set C. A single candidate wins outright. With no second-largest value
    (all proposals equal) the common proposal picks an id rank within the
    whole decision set; with several candidates the second-largest proposal
    picks an id rank within C. Ranks count from the highest id down.
    """
    d_ids = sorted(d_ids)
    if not d_ids:
        raise ValueError("empty decision set")
    for a in d_ids:
        if a not in values or a not in proposals:
            raise ValueError(f"missing value or proposal for agent {a}")
    distinct = sorted({proposals[a] for a in d_ids}, reverse=True)
    if len(distinct) < 2:
        pool = sorted(d_ids, reverse=True)
        pick = pool[distinct[0] % len(pool)]
        return values[pick]
    second = distinct[1]
    candidates = [a for a in d_ids if proposals[a] == second]
    if len(candidates) == 1:
        return values[candidates[0]]
    pool = sorted(candidates, reverse=True)
    pick = pool[second % len(pool)]
    return values[pick]
