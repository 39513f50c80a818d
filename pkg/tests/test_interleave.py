import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmth.errors import NoLiveThread, ParseError, ProtocolError
from pmth.interleave import Engine, MetaAction, Policy, next_thread, parse_meta, run, splitmix64
from pmth.tracing import project

from helpers import act_actions, make_state
from oracles import check_trace_protocol, standalone_actions


def test_splitmix64_golden():
    v, s1 = splitmix64(0)
    assert v == 0xE220A8397B1DCDAF
    assert s1 == 0x9E3779B97F4A7C15
    _, s2 = splitmix64(s1)
    assert s2 == 0x3C6EF372FE94F82A
    assert splitmix64(1) == splitmix64(1)


def test_next_thread_examples():
    assert next_thread(Policy("cyclic"), ["t1", "t2"], None, 0, 0)[0] == "t1"
    assert next_thread(Policy("poly"), ["t2", "t3"], None, 0, 0)[0] == "t2"
    pick, prng = next_thread(Policy("arbitrary"), ["t1", "t2", "t3"], None, 0, 0)
    assert pick == ["t1", "t2", "t3"][0xE220A8397B1DCDAF % 3] == "t2"
    assert prng == 0x9E3779B97F4A7C15
    with pytest.raises(NoLiveThread):
        next_thread(Policy(), [], None, 0, 0)


def test_next_thread_fatigue_exclusion():
    p = Policy("poly", fatigue_bound=3)
    assert next_thread(p, ["t1", "t2"], "t1", 3, 0)[0] == "t2"
    assert next_thread(p, ["t1", "t2"], "t1", 2, 0)[0] == "t1"
    assert next_thread(p, ["t1"], "t1", 30, 0)[0] == "t1"


def test_next_thread_weighted():
    p = Policy("weighted")
    w = {"a": 5000, "b": 3000, "c": 2000}
    la = {"a": 9, "b": 8, "c": 2}
    # scores: a 5000*1, b 3000*2, c 2000*8
    assert next_thread(p, ["a", "b", "c"], "a", 1, 0, weights=w, last_active=la, now=10)[0] == "c"
    # ties go to vector order
    assert next_thread(p, ["b", "a"], None, 0, 0, weights={"a": 1, "b": 1}, last_active={}, now=1)[0] == "b"


def test_policy_validation():
    assert Policy("random").kind == "arbitrary"
    for kw in ({"kind": "lottery"}, {"fatigue_bound": 0}, {"turn_length": 0}, {"seed": -1}, {"seed": 1 << 64}):
        with pytest.raises(ValueError):
            Policy(**kw)


TWO = {"t1": "a.1 a.2 !", "t2": "b.1 b.2 !"}


def test_run_cyclic_example():
    tr, final = run(make_state(TWO), Policy("cyclic"))
    assert act_actions(tr) == ["a.1", "b.1", "a.2", "b.2"]
    assert tr.steps == 6
    assert [a for _, a in final.env.log] == ["a.1", "b.1", "a.2", "b.2"]
    assert check_trace_protocol(tr.events, "sip") == []


def test_run_poly_example():
    tr, _ = run(make_state(TWO), Policy("poly"))
    assert act_actions(tr) == ["a.1", "a.2", "b.1", "b.2"]


@pytest.mark.parametrize("kind", ["cyclic", "poly", "arbitrary", "weighted"])
def test_single_thread_is_its_standalone_run(kind):
    tr, _ = run(make_state({"t": "a.1 +s.q b.1 c.1 !"}, {"s": "F"}), Policy(kind))
    assert act_actions(tr) == standalone_actions("a.1 +s.q b.1 c.1 !".split(), {"s": ["F"]})
    kinds = [e.kind for e in tr.events[:3]]
    assert kinds == ["c-switch", "waiver", "proper-switch"]


def test_first_switch_sequence_and_motive():
    tr, _ = run(make_state(TWO), Policy("cyclic"))
    head = [(e.kind, e.thread, e.motive) for e in tr.events[:4]]
    assert head == [
        ("c-switch", "t1", None),
        ("c-switch", "t2", None),
        ("proper-switch", "t1", "policy-default"),
        ("act", "t1", None),
    ]
    second = [e for e in tr.events if e.kind == "proper-switch"][1]
    assert (second.thread, second.motive) == ("t2", "fairness")


def test_blocked_thread_yields_with_blocked_motive():
    st = make_state({"t1": "s.go a.1 !", "t2": "b.1 b.2 b.3 !"}, {"s": "BT"})
    tr, _ = run(st, Policy("poly"))
    kinds = [(e.kind, e.thread) for e in tr.events if e.kind in ("act", "block")]
    assert kinds[:3] == [("block", "t1"), ("act", "t2"), ("act", "t1")]
    sw = [e for e in tr.events if e.kind == "proper-switch"]
    assert sw[1].thread == "t2" and sw[1].motive == "blocked"


def test_all_blocked_falls_back_to_live():
    tr, _ = run(make_state({"t": "s.go !"}, {"s": "BBT"}), Policy("cyclic"))
    assert [e.kind for e in tr.events if e.kind in ("act", "block")] == ["block", "block", "act"]


def test_fatigue_bound_in_poly():
    st = make_state({"t1": " ".join(f"a.{i}" for i in range(10)) + " !", "t2": "b.1 b.2 !"})
    tr, _ = run(st, Policy("poly", fatigue_bound=4))
    acts = act_actions(tr)
    assert acts[:5] == ["a.0", "a.1", "a.2", "a.3", "b.1"]
    sw = [e for e in tr.events if e.kind == "proper-switch"]
    assert sw[1].motive == "fatigue"


def test_turn_length_gives_coarser_slices():
    st = make_state({"t1": "a.1 a.2 a.3 a.4 !", "t2": "b.1 b.2 b.3 b.4 !"})
    tr, _ = run(st, Policy("cyclic", turn_length=2))
    assert act_actions(tr) == ["a.1", "a.2", "b.1", "b.2", "a.3", "a.4", "b.3", "b.4"]


def test_fuel_exhaustion_is_terminal_event():
    tr, final = run(make_state({"t": "a.1 a.2 a.3 !"}), Policy(), fuel=2)
    assert tr.events[-1].kind == "fuel-exhausted"
    assert tr.steps == 2 and act_actions(tr) == ["a.1", "a.2"]
    assert final.htva.children[0].pc == 3
    tr0, _ = run(make_state({"t": "a.1 !"}), Policy(), fuel=0)
    assert [e.kind for e in tr0.events] == ["fuel-exhausted"]


def test_deadlock_drops_thread():
    tr, _ = run(make_state({"t1": "a.1 #0", "t2": "b.1 b.2 !"}), Policy("cyclic"))
    assert [e.kind for e in tr.events if e.thread == "t1" and e.kind in ("act", "deadlock")] == ["act", "deadlock"]
    assert act_actions(tr) == ["a.1", "b.1", "b.2"]


def test_run_does_not_mutate_input():
    st = make_state(TWO)
    run(st, Policy())
    assert st.htva.children[0].pc == 1 and st.env.log == ()


def test_weighted_requires_intended_workload():
    with pytest.raises(ValueError):
        run(make_state({"a": "a.1 !"}, weights=[0]), Policy("weighted"))


def test_parse_meta():
    assert parse_meta("c t r") == MetaAction("c", ("t", "r"))
    assert str(parse_meta("rebalance t intended u:100")) == "rebalance t intended u:100"
    for bad in ("", "jump t", "c t", "step 1 2"):
        with pytest.raises(ParseError):
            parse_meta(bad)


def script(text):
    return [parse_meta(line) for line in text.strip().splitlines()]


def test_manual_pseudo_walk():
    st = make_state({"t": "a.1 a.2 !", "r": "b.1 b.2 b.3 !"}, mode="manual")
    tr, final = run(st, Policy(), script=script("""
        c - t
        a t
        step 1
        pseudo t r
        step 2
        back r t
        step 1
    """))
    rows = [(e.kind, e.thread, e.context, e.action) for e in tr.events]
    assert ("pseudo-act", "r", "t", "b.1") in rows and ("pseudo-act", "r", "t", "b.2") in rows
    r = next(x for x in final.htva.children if x.name == "r")
    assert r.pc == 3
    assert final.phase.active == "t" and final.phase.pseudo is None
    assert project(tr, "r").actions() == ["b.1", "b.2"]
    assert project(tr, "t").actions() == ["a.1", "a.2"]
    assert check_trace_protocol(tr.events, "manual") == []


def test_manual_readiness_enforced():
    st = make_state({"t": "a.1 !", "r": "b.1 !"}, mode="manual")
    with pytest.raises(ProtocolError):
        run(st, Policy(), script=script("c - t\na t\nc t r\na r"))
    tr, _ = run(st, Policy(), script=script("c - t\na t\nc t r\nc r t\nc t r\na r\nstep 1"))
    assert act_actions(tr) == ["b.1"]


def test_manual_switch_after_active_finishes_is_bootstrap():
    st = make_state({"t": "a.1 !", "r": "b.1 !"}, mode="manual")
    tr, _ = run(st, Policy(), script=script("c - t\na t\nstep 2\nc - r\na r\nstep 2"))
    sw = [e for e in tr.events if e.kind == "proper-switch"]
    assert [(e.thread, e.motive) for e in sw] == [("t", "policy-default"), ("r", "policy-default")]
    assert act_actions(tr) == ["a.1", "b.1"]


def test_manual_meta_failure_leaves_engine_unchanged():
    eng = Engine(make_state({"t": "a.1 !", "r": "b.1 !"}, mode="manual"), Policy())
    eng.apply_meta(parse_meta("c - t"))
    snap = (eng.phase, list(eng.events), eng.step)
    for bad in ("a r", "c r t", "pseudo r t", "back r t", "shrink t 1 intended", "step 1"):
        with pytest.raises(Exception):
            eng.apply_meta(parse_meta(bad))
        assert (eng.phase, list(eng.events), eng.step) == snap


programs = st.lists(st.sampled_from(["a.x", "a.y", "+s.q", "-s.q", "#1", "#2", "!"]), max_size=6)


@settings(max_examples=150, deadline=None)
@given(programs, programs, st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1))
def test_seed_does_not_change_projections(p1, p2, seed_a, seed_b):
    progs = {"t1": p1, "t2": [tok.replace("a.", "b.").replace("s.", "u.") for tok in p2]}
    svc = {"s": "TF", "u": "FTT"}
    ta, _ = run(make_state(progs, svc), Policy("arbitrary", seed=seed_a))
    tb, _ = run(make_state(progs, svc), Policy("arbitrary", seed=seed_b))
    for t in progs:
        assert project(ta, t).actions() == project(tb, t).actions()
    assert ta == run(make_state(progs, svc), Policy("arbitrary", seed=seed_a))[0]


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**64 - 1), st.sampled_from(["cyclic", "poly", "arbitrary", "weighted"]))
def test_fatigue_never_exceeded(bound, seed, kind):
    progs = {f"t{i}": " ".join(f"x{i}.a" for _ in range(12)) + " !" for i in range(3)}
    tr, _ = run(make_state(progs), Policy(kind, seed=seed, fatigue_bound=bound))
    run_len, prev = 0, None
    live = 3
    for e in tr.events:
        if e.kind == "halt":
            live -= 1
        if e.kind != "act":
            continue
        run_len = run_len + 1 if e.thread == prev else 1
        prev = e.thread
        if live >= 2:
            assert run_len <= bound
