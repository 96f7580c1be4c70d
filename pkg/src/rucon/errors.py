"""Shared error types for the protocol library."""

from __future__ import annotations


class InconsistencyError(Exception):
    """A received message failed one of the verification rules.

    The protocol response to any inconsistency is the punishment decision
    (bottom). `category` is one of format/source/random/round/chain/merge,
    `rule` names the specific rule that fired so tests can address it.
    """

    def __init__(self, category: str, rule: str, link=None, round_=None, detail: str = ""):
        self.category = category
        self.rule = rule
        self.link = link
        self.round = round_
        self.detail = detail
        where = ""
        if link is not None:
            where += f" link={link}"
        if round_ is not None:
            where += f" round={round_}"
        super().__init__(f"[{category}/{rule}]{where} {detail}".rstrip())


class ProtocolViolationError(Exception):
    """An internal state arose that is impossible in honest executions."""
