"""Verification rules, the merge case table, and honest completeness."""

import copy

import pytest

from conftest import run_agents, verify_inputs
from rule_fixtures import FIXTURES
from rucon.errors import InconsistencyError
from rucon.links import R, X
from rucon.simulator import RunConfig, run
from rucon.verification import (MergeContext, merge_state, register_random,
                                register_xrandom, verify_and_update,
                                verify_msg_chain, verify_state)


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_rule_fixture(name):
    fn, category, rule = FIXTURES[name]
    fn(False)   # the unmutated input must pass
    with pytest.raises(InconsistencyError) as exc:
        fn(True)
    assert (exc.value.category, exc.value.rule) == (category, rule)


def test_empty_table_before_round_one():
    ctx = MergeContext(n=5, t=1, self_id=1, round=1, ns={}, hs={}, sender=2,
                       recv_ns={(1, 2): ((R, 1, 2, 0), None)},
                       randoms={}, xrandoms={})
    with pytest.raises(InconsistencyError) as exc:
        verify_msg_chain(ctx)
    assert (exc.value.category, exc.value.rule) == ("chain", "claim2")
    ctx.recv_ns = {}
    verify_msg_chain(ctx)   # nothing claimed, nothing to check


def test_register_random_write_once():
    randoms = {}
    register_random(randoms, 3, 2, 4)
    register_random(randoms, 3, 2, 4)
    assert randoms == {(3, 2): 4}
    with pytest.raises(InconsistencyError) as exc:
        register_random(randoms, 3, 2, 1)
    assert exc.value.rule == "random-conflict"


def test_register_xrandom_per_recipient():
    xr = {}
    register_xrandom(xr, 2, 1, (1, 2), 3, 1)
    register_xrandom(xr, 2, 1, (1, 2), 4, 0)
    assert xr[(2, 1, (1, 2))] == {3: 1, 4: 0}


# --- merge case table --------------------------------------------------------

def _merge_ctx(ns=None, hs=None, round_=5):
    return MergeContext(n=5, t=1, self_id=1, round=round_, ns=ns or {},
                        hs=hs or {}, sender=2, recv_ns={}, randoms={},
                        xrandoms={})


def test_merge_case1_direct_rr_appends():
    ctx = _merge_ctx(ns={(1, 2): ((R, 5, 1, 2), None)})
    merge_state(ctx, (1, 2), ((R, 4, 2, 1), None))
    assert ctx.ns[(1, 2)] == ((R, 5, 1, 2), None)       # NS untouched
    assert ctx.hs[((1, 2), 4)] == ((R, 4, 2, 1),)


def test_merge_case2_is_an_error():
    ctx = _merge_ctx(ns={(1, 2): ((R, 5, 1, 2), None)})
    with pytest.raises(InconsistencyError) as exc:
        merge_state(ctx, (1, 2), ((X, 4, 2, (0, 1, 0, 1)), None))
    assert (exc.value.category, exc.value.rule) == ("merge", "case2")


def test_merge_case3_direct_xr_appends():
    ctx = _merge_ctx(ns={(1, 2): ((X, 3, 1, (0, 0, 1, 1)), None)})
    merge_state(ctx, (1, 2), ((R, 2, 2, 1), None))
    assert ctx.ns[(1, 2)][0][0] == X                    # fault is kept
    assert ctx.hs[((1, 2), 2)] == ((R, 2, 2, 1),)


def test_merge_case4_adopts_earlier_failure():
    # partner detected one round before us: its round wins in NS
    local = ((X, 3, 1, (0, 0, 1, 1)), None)
    recv = ((X, 2, 2, (1, 0, 1, 0)), None)
    ctx = _merge_ctx(ns={(1, 2): local})
    merge_state(ctx, (1, 2), recv)
    assert ctx.ns[(1, 2)] == (recv[0], (2, 5))
    assert ctx.hs[((1, 2), 2)] == (recv[0],)


def test_merge_case4_appends_same_or_next_round():
    local = ((X, 3, 1, (0, 0, 1, 1)), None)
    for rd in (3, 4):
        ctx = _merge_ctx(ns={(1, 2): local})
        recv = ((X, rd, 2, (1, 0, 1, 0)), None)
        merge_state(ctx, (1, 2), recv)
        assert ctx.ns[(1, 2)] == local                  # append only
        assert recv[0] in ctx.hs[((1, 2), rd)]


def test_merge_case5_partner_report_noop():
    local = ((X, 3, 2, (0, 0, 1, 1)), (2, 4))
    ctx = _merge_ctx(ns={(1, 2): local})
    merge_state(ctx, (1, 2), ((X, 3, 2, (0, 0, 1, 1)), None))
    assert ctx.ns[(1, 2)] == local
    assert ctx.hs == {}


def test_merge_case6_newer_r_adopted():
    ctx = _merge_ctx(ns={(3, 4): ((R, 2, 3, 1), (3, 3))})
    merge_state(ctx, (3, 4), ((R, 3, 3, 0), (3, 4)))
    assert ctx.ns[(3, 4)] == ((R, 3, 3, 0), (2, 5))
    ctx2 = _merge_ctx(ns={(3, 4): ((R, 3, 3, 0), (3, 4))})
    merge_state(ctx2, (3, 4), ((R, 2, 3, 1), (3, 3)))
    assert ctx2.ns[(3, 4)] == ((R, 3, 3, 0), (3, 4))    # older only appends
    assert ctx2.hs[((3, 4), 2)] == ((R, 2, 3, 1),)


def test_merge_case7_x_replaces_r():
    ctx = _merge_ctx(ns={(3, 4): ((R, 2, 3, 1), (3, 3))})
    recv = ((X, 3, 3, (0, 1, 0, 1)), (3, 4))
    merge_state(ctx, (3, 4), recv)
    assert ctx.ns[(3, 4)] == (recv[0], (2, 5))


def test_merge_case8_r_appends_under_x():
    local = ((X, 3, 3, (0, 1, 0, 1)), (3, 4))
    ctx = _merge_ctx(ns={(3, 4): local})
    merge_state(ctx, (3, 4), ((R, 2, 3, 1), (3, 3)))
    assert ctx.ns[(3, 4)] == local
    assert ctx.hs[((3, 4), 2)] == ((R, 2, 3, 1),)


def test_merge_case9_earlier_x_adopted():
    local = ((X, 3, 3, (0, 1, 0, 1)), (3, 4))
    recv = ((X, 2, 4, (1, 1, 0, 0)), (4, 3))
    ctx = _merge_ctx(ns={(3, 4): local})
    merge_state(ctx, (3, 4), recv)
    assert ctx.ns[(3, 4)] == (recv[0], (2, 5))          # earliest round wins
    same_reporter = ((X, 3, 3, (0, 1, 0, 1)), (3, 4))
    ctx2 = _merge_ctx(ns={(3, 4): local})
    merge_state(ctx2, (3, 4), same_reporter)
    assert ctx2.hs == {}                                # no-op


def test_merge_case11_unknown_adopts():
    ctx = _merge_ctx()
    recv = ((R, 2, 3, 1), (3, 3))
    merge_state(ctx, (3, 4), recv)
    assert ctx.ns[(3, 4)] == (recv[0], (2, 5))
    assert ctx.hs[((3, 4), 2)] == (recv[0],)


def test_case10_absent_entry_skipped():
    # n=3 at round 2: sender 2's table legitimately omits the link (1,3)
    # (nothing was relayed about it yet); the merge pass must skip the
    # absent entry and leave our own direct detection untouched.
    _, snap = run_agents(3, 0, seed=2, capture_round=2)
    st = snap[1]
    assert (1, 3) not in st.pending_ns[2]
    ctx_base, received, own_bits = verify_inputs(st, 2)
    verify_and_update(ctx_base, received, own_bits)
    assert st.ns[(1, 3)][0][:3] == (R, 2, 1)


# --- full-path behavior ------------------------------------------------------

def test_verify_and_update_direct_detections(captured_round3):
    st = copy.deepcopy(captured_round3[1])
    ctx_base, received, own_bits = verify_inputs(st, 3)
    verify_and_update(ctx_base, received, own_bits)
    for j in (2, 3, 4, 5):
        entry = st.ns[(min(1, j), max(1, j))]
        assert entry[0][:3] == (R, 3, 1)
        assert entry[1] is None


def test_verify_and_update_flags_bad_link_key(captured_round3):
    st = copy.deepcopy(captured_round3[1])
    st.pending_ns[2][(2, 1)] = st.pending_ns[2].pop((1, 2))
    ctx_base, received, own_bits = verify_inputs(st, 3)
    with pytest.raises(InconsistencyError) as exc:
        verify_and_update(ctx_base, received, own_bits)
    assert exc.value.category == "format"


def test_verify_and_update_flags_tampered_relay(captured_round3):
    # altering the random inside a relayed correct-report must trip the
    # registry cross-check against the genuine copies
    st = copy.deepcopy(captured_round3[1])
    link = (2, 3)
    t_a, t_b = st.pending_ns[2][link]
    st.pending_ns[2][link] = ((t_a[0], t_a[1], t_a[2], (t_a[3] + 1) % 5), t_b)
    ctx_base, received, own_bits = verify_inputs(st, 3)
    with pytest.raises(InconsistencyError) as exc:
        verify_and_update(ctx_base, received, own_bits)
    assert exc.value.category in ("random", "source")


def test_honest_completeness_sampled_patterns():
    # no honest execution may ever trip a verification rule
    for seed in range(100):
        res = run(RunConfig(n=5, t=1, seed=seed, sample_pattern=True,
                            check_invariants=False))
        assert "bot" not in res.decisions.values(), (seed, res.errors)


def test_merge_keeps_earliest_failure_round():
    # across any honest run, an NS failure round never increases
    from rucon.simulator import FailurePattern
    pattern = FailurePattern(send_om={(4, 1): 2, (4, 2): 2})
    agents, _ = run_agents(5, 1, seed=7, pattern=pattern)
    for st in agents.values():
        for link, (t_a, _src) in st.ns.items():
            if t_a[0] != X:
                continue
            rounds = [rr for (l, rr), reps in st.hs.items()
                      if l == link and any(x[0] == X for x in reps)]
            assert t_a[1] <= min(rounds)
