"""Instruction sequences and the threads extracted from them.

A thread *uses* services (which answer T, F or B) and *applies* its remaining
actions to an environment that only records them.  Goal graphs are condensed
into rigid instruction sequences by a deterministic topological sort.
"""

from __future__ import annotations

import heapq
import re
from dataclasses import dataclass, field, replace
from typing import Mapping, Union

from .errors import (
    CyclicGoals,
    JumpChainExceeded,
    MalformedInstruction,
    NonMonotoneStep,
    UnknownGoal,
)

IDENT = re.compile(r"[a-z0-9_]+\Z")
DEFAULT_JUMP_BOUND = 1024

BASIC, POS_TEST, NEG_TEST, JUMP, HALT = "basic", "pos", "neg", "jump", "halt"
REPLIES = ("T", "F", "B")


def is_ident(text: str) -> bool:
    return bool(IDENT.match(text))


@dataclass(frozen=True)
class Instruction:
    kind: str
    action: str | None = None
    offset: int | None = None

    @property
    def focus(self) -> str:
        return self.action.split(".", 1)[0]

    @property
    def method(self) -> str:
        return self.action.split(".", 1)[1]

    def __str__(self) -> str:
        if self.kind == BASIC:
            return self.action
        if self.kind == POS_TEST:
            return "+" + self.action
        if self.kind == NEG_TEST:
            return "-" + self.action
        if self.kind == JUMP:
            return f"#{self.offset}"
        return "!"


def basic(action: str) -> Instruction:
    return Instruction(BASIC, action=action)


HALT_INSTR = Instruction(HALT)


def _parse_action(text: str, token: str) -> str:
    focus, dot, method = text.partition(".")
    if not dot:
        raise MalformedInstruction(f"{token!r}: action needs the form focus.method")
    if not is_ident(focus) or not is_ident(method):
        raise MalformedInstruction(f"{token!r}: identifiers must be nonempty and drawn from [a-z0-9_]")
    return text


def parse_instruction(token: str) -> Instruction:
    """Parse one instruction token.

    ``f.m`` basic action, ``+f.m`` / ``-f.m`` positive / negative test,
    ``#k`` relative forward jump, ``!`` halt.
    """
    if not token:
        raise MalformedInstruction("empty instruction token")
    if token == "!":
        return HALT_INSTR
    head, rest = token[0], token[1:]
    if head == "#":
        if not rest.isdigit() or not rest.isascii():
            raise MalformedInstruction(f"{token!r}: jump needs a non-negative integer offset")
        return Instruction(JUMP, offset=int(rest))
    if head == "+":
        return Instruction(POS_TEST, action=_parse_action(rest, token))
    if head == "-":
        return Instruction(NEG_TEST, action=_parse_action(rest, token))
    return Instruction(BASIC, action=_parse_action(token, token))


@dataclass(frozen=True)
class InstructionSequence:
    instrs: tuple[Instruction, ...]
    name: str = "iseq"

    @classmethod
    def parse(cls, text: str, name: str = "iseq") -> "InstructionSequence":
        return cls(tuple(parse_instruction(tok) for tok in text.split()), name)

    def __len__(self) -> int:
        return len(self.instrs)

    def __getitem__(self, pc: int) -> Instruction:
        # 1-based positions
        return self.instrs[pc - 1]

    def __str__(self) -> str:
        return " ".join(str(i) for i in self.instrs)


@dataclass(frozen=True)
class Service:
    """A reply generator cycling through a fixed pattern of T/F/B."""

    name: str
    pattern: tuple[str, ...]
    cursor: int = 0
    log: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.pattern:
            raise ValueError(f"service {self.name}: reply pattern must be nonempty")
        bad = [r for r in self.pattern if r not in REPLIES]
        if bad:
            raise ValueError(f"service {self.name}: invalid replies {bad}")

    def request(self, method: str) -> tuple[str, "Service"]:
        reply = self.pattern[self.cursor]
        nxt = replace(self, cursor=(self.cursor + 1) % len(self.pattern), log=self.log + (method,))
        return reply, nxt


@dataclass(frozen=True)
class Environment:
    log: tuple[tuple[int, str], ...] = ()


def apply_action(env: Environment, step: int, action: str) -> Environment:
    if env.log and step <= env.log[-1][0]:
        raise NonMonotoneStep(f"step {step} does not follow last logged step {env.log[-1][0]}")
    return Environment(env.log + ((step, action),))


# step results

@dataclass(frozen=True)
class Performed:
    action: str
    reply: str
    next_pc: int


@dataclass(frozen=True)
class Blocked:
    action: str


@dataclass(frozen=True)
class Halted:
    pass


@dataclass(frozen=True)
class Deadlocked:
    pass


StepResult = Union[Performed, Blocked, Halted, Deadlocked]


def behavior_step(
    iseq: InstructionSequence,
    pc: int,
    services: Mapping[str, Service],
    jump_bound: int = DEFAULT_JUMP_BOUND,
) -> tuple[StepResult, Mapping[str, Service]]:
    """Execute the instruction at ``pc`` (following jump chains).

    Returns the outcome and the service map, replaced by a fresh dict only if
    a service was consulted.
    """
    if pc < 1:
        raise ValueError(f"pc must be >= 1, got {pc}")
    jumps = 0
    while True:
        if pc > len(iseq):
            return Deadlocked(), services
        ins = iseq[pc]
        if ins.kind == HALT:
            return Halted(), services
        if ins.kind == JUMP:
            if ins.offset == 0:
                return Deadlocked(), services
            jumps += 1
            if jumps > jump_bound:
                raise JumpChainExceeded(f"{iseq.name}: more than {jump_bound} chained jumps at pc {pc}")
            pc += ins.offset
            continue
        break

    svc = services.get(ins.focus)
    if svc is None:
        reply = "T"
    else:
        reply, svc = svc.request(ins.method)
        services = {**services, svc.name: svc}
    if reply == "B":
        return Blocked(ins.action), services
    if ins.kind == BASIC:
        return Performed(ins.action, reply, pc + 1), services
    hit = (ins.kind == POS_TEST) == (reply == "T")
    return Performed(ins.action, reply, pc + 1 if hit else pc + 2), services


# condensation

@dataclass(frozen=True)
class GoalGraph:
    goals: Mapping[str, str]
    deps: frozenset[tuple[str, str]] = field(default_factory=frozenset)

    def __post_init__(self):
        for a, b in self.deps:
            for g in (a, b):
                if g not in self.goals:
                    raise UnknownGoal(f"dependency endpoint {g!r} is not a declared goal")


def _find_cycle(remaining: set[str], preds: dict[str, set[str]]) -> list[str]:
    node = min(remaining)
    seen: dict[str, int] = {}
    path: list[str] = []
    while node not in seen:
        seen[node] = len(path)
        path.append(node)
        node = min(p for p in preds[node] if p in remaining)
    cycle = path[seen[node]:]
    cycle.reverse()
    return cycle


def condense(g: GoalGraph, name: str = "iseq") -> InstructionSequence:
    """Topologically order goals (smallest ready identifier first) and halt."""
    succs: dict[str, set[str]] = {k: set() for k in g.goals}
    preds: dict[str, set[str]] = {k: set() for k in g.goals}
    for a, b in g.deps:
        succs[a].add(b)
        preds[b].add(a)
    indeg = {k: len(v) for k, v in preds.items()}
    ready = [k for k, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order: list[str] = []
    while ready:
        k = heapq.heappop(ready)
        order.append(k)
        for s in succs[k]:
            indeg[s] -= 1
            if indeg[s] == 0:
                heapq.heappush(ready, s)
    if len(order) != len(g.goals):
        raise CyclicGoals(_find_cycle(set(g.goals) - set(order), preds))
    return InstructionSequence(tuple(basic(g.goals[k]) for k in order) + (HALT_INSTR,), name)
