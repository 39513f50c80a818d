import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmth.errors import CyclicGoals, JumpChainExceeded, MalformedInstruction, NonMonotoneStep, UnknownGoal
from pmth.thread_core import (
    BASIC,
    JUMP,
    NEG_TEST,
    POS_TEST,
    Blocked,
    Deadlocked,
    Environment,
    GoalGraph,
    Halted,
    Instruction,
    InstructionSequence,
    Performed,
    Service,
    apply_action,
    behavior_step,
    condense,
    parse_instruction,
)

from oracles import smallest_linear_extension, standalone_actions


def seq(text):
    return InstructionSequence.parse(text)


@pytest.mark.parametrize(
    "token, expected",
    [
        ("+disk.ready", Instruction(POS_TEST, action="disk.ready")),
        ("-disk.ready", Instruction(NEG_TEST, action="disk.ready")),
        ("a.x", Instruction(BASIC, action="a.x")),
        ("#0", Instruction(JUMP, offset=0)),
        ("#12", Instruction(JUMP, offset=12)),
        ("!", Instruction("halt")),
    ],
)
def test_parse_instruction(token, expected):
    assert parse_instruction(token) == expected
    assert str(parse_instruction(token)) == token


@pytest.mark.parametrize("token", ["work", "", "#-1", "#x", "#", "a.", ".x", "A.x", "a.b.c", "+work", "a-b.x", "#١"])
def test_parse_instruction_rejects(token):
    with pytest.raises(MalformedInstruction):
        parse_instruction(token)


def test_basic_non_service_action_replies_true():
    res, svcs = behavior_step(seq("a.x !"), 1, {})
    assert res == Performed("a.x", "T", 2)
    assert svcs == {}


def test_positive_test_false_skips_two():
    s = {"s": Service("s", ("F",))}
    res, svcs = behavior_step(seq("+s.q a.x b.y !"), 1, s)
    assert res == Performed("s.q", "F", 3)
    assert svcs["s"].log == ("q",)


@pytest.mark.parametrize(
    "token, reply, next_pc",
    [("+s.q", "T", 2), ("+s.q", "F", 3), ("-s.q", "F", 2), ("-s.q", "T", 3), ("s.q", "F", 2)],
)
def test_test_semantics(token, reply, next_pc):
    res, _ = behavior_step(seq(f"{token} a.x b.y !"), 1, {"s": Service("s", (reply,))})
    assert res == Performed("s.q", reply, next_pc)


def test_jump_zero_deadlocks():
    assert behavior_step(seq("#0"), 1, {})[0] == Deadlocked()


def test_past_end_and_empty_deadlock():
    assert behavior_step(seq("a.x"), 2, {})[0] == Deadlocked()
    assert behavior_step(InstructionSequence(()), 1, {})[0] == Deadlocked()


def test_halt():
    assert behavior_step(seq("!"), 1, {})[0] == Halted()


def test_jump_chain_lands_on_action():
    res, _ = behavior_step(seq("#2 a.x #1 b.y !"), 1, {})
    assert res == Performed("b.y", "T", 5)


def test_jump_chain_bound():
    iseq = seq(" ".join(["#1"] * 5) + " a.x")
    assert behavior_step(iseq, 1, {}, jump_bound=5)[0] == Performed("a.x", "T", 7)
    with pytest.raises(JumpChainExceeded):
        behavior_step(iseq, 1, {}, jump_bound=4)


def test_blocked_consumes_pattern_slot():
    s = {"s": Service("s", ("B", "T"))}
    res, s2 = behavior_step(seq("s.go !"), 1, s)
    assert res == Blocked("s.go")
    assert s2["s"].cursor == 1
    res, s3 = behavior_step(seq("s.go !"), 1, s2)
    assert res == Performed("s.go", "T", 2)
    assert s3["s"].cursor == 0
    # input map untouched
    assert s["s"].cursor == 0


def test_invalid_pc():
    with pytest.raises(ValueError):
        behavior_step(seq("!"), 0, {})


def test_service_validation():
    with pytest.raises(ValueError):
        Service("s", ())
    with pytest.raises(ValueError):
        Service("s", ("X",))


def test_apply_action():
    env = apply_action(Environment(), 1, "a.x")
    assert env.log == ((1, "a.x"),)
    env = apply_action(env, 2, "b.y")
    assert env.log == ((1, "a.x"), (2, "b.y"))
    with pytest.raises(NonMonotoneStep):
        apply_action(Environment(((2, "a.x"),)), 1, "b.y")
    with pytest.raises(NonMonotoneStep):
        apply_action(Environment(((2, "a.x"),)), 2, "b.y")


def test_condense_examples():
    g = GoalGraph({"a": "p.x", "b": "q.y"}, frozenset({("a", "b")}))
    assert str(condense(g)) == "p.x q.y !"
    assert str(condense(GoalGraph({"a": "p.x", "b": "q.y"}))) == "p.x q.y !"
    assert str(condense(GoalGraph({"a": "p.x", "b": "q.y"}, frozenset({("b", "a")})))) == "q.y p.x !"


def test_condense_cycle_names_a_cycle():
    with pytest.raises(CyclicGoals) as exc:
        condense(GoalGraph({"a": "p.x", "b": "q.y"}, frozenset({("a", "b"), ("b", "a")})))
    assert sorted(exc.value.cycle) == ["a", "b"]

    deps = frozenset({("a", "b"), ("b", "c"), ("c", "d"), ("d", "b"), ("a", "e")})
    with pytest.raises(CyclicGoals) as exc:
        condense(GoalGraph({g: f"f.{g}" for g in "abcde"}, deps))
    cyc = exc.value.cycle
    assert sorted(cyc) == ["b", "c", "d"]
    for x, y in zip(cyc, cyc[1:] + cyc[:1]):
        assert (x, y) in deps


def test_goal_graph_rejects_undeclared_endpoint():
    with pytest.raises(UnknownGoal):
        GoalGraph({"a": "p.x"}, frozenset({("a", "z")}))


@st.composite
def dags(draw):
    n = draw(st.integers(0, 6))
    names = draw(st.permutations(["g0", "g1", "g2", "g3", "g4", "g5"]))[:n]
    deps = set()
    for i in range(n):
        for j in range(i + 1, n):
            if draw(st.booleans()):
                deps.add((names[i], names[j]))
    return {g: f"f.{g}" for g in names}, deps


@settings(max_examples=200)
@given(dags())
def test_condense_matches_bruteforce(graph):
    goals, deps = graph
    out = condense(GoalGraph(goals, frozenset(deps)))
    order = smallest_linear_extension(list(goals), deps)
    assert [str(i) for i in out.instrs] == [goals[g] for g in order] + ["!"]
    assert len(out) == len(goals) + 1
    assert condense(GoalGraph(goals, frozenset(deps))) == out


tokens = st.sampled_from(["a.x", "b.y", "s.q", "+s.q", "-s.q", "#1", "#2", "#0", "!"])


@settings(max_examples=300)
@given(st.lists(tokens, max_size=8), st.lists(st.sampled_from("TFB"), min_size=1, max_size=4))
def test_standalone_walk_matches_reference(toks, pattern):
    iseq = InstructionSequence.parse(" ".join(toks))
    services = {"s": Service("s", tuple(pattern))}
    pc, out = 1, []
    for _ in range(200):
        res, services = behavior_step(iseq, pc, services)
        if isinstance(res, Performed):
            out.append(res.action)
            pc = res.next_pc
        elif isinstance(res, Blocked):
            continue
        else:
            break
    assert out == standalone_actions(toks, {"s": list(pattern)}, max_requests=200)[: len(out)]


@given(st.lists(tokens, max_size=8), st.integers(1, 9), st.lists(st.sampled_from("TFB"), min_size=1, max_size=4))
def test_behavior_step_is_deterministic(toks, pc, pattern):
    iseq = InstructionSequence.parse(" ".join(toks))
    services = {"s": Service("s", tuple(pattern))}
    first = behavior_step(iseq, pc, services)
    assert behavior_step(iseq, pc, services) == first
    res = first[0]
    if isinstance(res, Performed):
        assert res.next_pc >= 1


@given(st.lists(st.sampled_from(["a.x", "b.y", "c.z"]), max_size=10))
def test_all_true_run_visits_textual_order(actions):
    iseq = InstructionSequence.parse(" ".join(actions + ["!"]))
    pc, out = 1, []
    while True:
        res, _ = behavior_step(iseq, pc, {})
        if not isinstance(res, Performed):
            break
        out.append(res.action)
        pc = res.next_pc
    assert out == actions
