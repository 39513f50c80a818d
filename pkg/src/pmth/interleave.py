"""Strategic interleaving policies and the simulation driver."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from . import htva as hv
from .errors import NoLiveThread, NotActive, ParseError, ProtocolError
from .htva import DISTRIBUTED, ExecutiveConfig, ThreadInstance, Vector
from .switchsm import (
    MANUAL,
    SIP,
    Motive,
    PhaseState,
    a_switch,
    c_switch,
    classify_motive,
    pseudo_back,
    pseudo_switch,
    readiness_ok,
    readiness_waived,
    retire,
)
from .thread_core import Blocked, Environment, Halted, Performed, Service, apply_action, behavior_step
from .tracing import Trace, TraceEvent

MASK64 = (1 << 64) - 1
DEFAULT_FUEL = 10000
POLICY_KINDS = ("cyclic", "poly", "arbitrary", "weighted")
POLICY_ALIASES = {"random": "arbitrary"}


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 draw: returns ``(value, next_state)``."""
    s = (state + 0x9E3779B97F4A7C15) & MASK64
    z = s
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31), s


@dataclass(frozen=True)
class Policy:
    kind: str = "cyclic"
    seed: int = 0
    fatigue_bound: int = 8
    turn_length: int = 1

    def __post_init__(self):
        kind = POLICY_ALIASES.get(self.kind, self.kind)
        if kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if self.fatigue_bound < 1:
            raise ValueError("fatigue bound must be at least 1")
        if self.turn_length < 1:
            raise ValueError("turn length must be at least 1")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def next_thread(
    policy: Policy,
    live: Sequence[str],
    last: str | None,
    consecutive: int,
    prng: int,
    *,
    weights: Mapping[str, int] | None = None,
    last_active: Mapping[str, int | None] | None = None,
    now: int = 0,
) -> tuple[str, int]:
    """Pick the thread for the next turn; ``live`` excludes blocked threads."""
    if not live:
        raise NoLiveThread("no live thread to select")
    cands = list(live)
    if last in cands and consecutive >= policy.fatigue_bound and len(cands) > 1:
        cands.remove(last)
    if policy.kind == "arbitrary":
        value, prng = splitmix64(prng)
        return cands[value % len(cands)], prng
    if policy.kind == "weighted":
        last_active = last_active or {}
        best, best_score = cands[0], None
        for t in cands:
            score = weights[t] * (now - (last_active.get(t) or 0))
            if best_score is None or score > best_score:
                best, best_score = t, score
        return best, prng
    # cyclic keeps ``live`` rotated; poly keeps it in vector order
    return cands[0], prng


@dataclass(frozen=True)
class EngineState:
    htva: Vector
    services: Mapping[str, Service] = field(default_factory=dict)
    executive: ExecutiveConfig = DISTRIBUTED
    mode: str = SIP
    env: Environment = Environment()
    phase: PhaseState | None = None
    order: tuple[str, ...] | None = None
    prng: int | None = None
    step: int = 0
    turns: int = 0
    last: str | None = None
    snapshot: Mapping[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class MetaAction:
    op: str
    args: tuple[str, ...] = ()
    line: int | None = field(default=None, compare=False)

    def __str__(self) -> str:
        return " ".join((self.op,) + self.args)


META_ARITY = {
    "c": (2, 2),
    "a": (1, 2),
    "pseudo": (2, 2),
    "back": (2, 2),
    "step": (1, 1),
    "shrink": (3, 3),
    "grow": (3, 3),
    "rebalance": (2, None),
    "prominence": (3, 3),
}


def parse_meta(line: str, lineno: int | None = None) -> MetaAction:
    parts = line.split()
    if not parts or parts[0] not in META_ARITY:
        raise ParseError(f"unknown meta-action {parts[0] if parts else ''!r}", lineno)
    lo, hi = META_ARITY[parts[0]]
    n = len(parts) - 1
    if n < lo or (hi is not None and n > hi):
        raise ParseError(f"meta-action {parts[0]} takes {lo}{'' if hi == lo else '+'} arguments", lineno)
    return MetaAction(parts[0], tuple(parts[1:]), lineno)


class Engine:
    """Mutable driver around an ``EngineState``; the input state is never touched."""

    def __init__(self, state: EngineState, policy: Policy, fuel: int = DEFAULT_FUEL):
        if fuel < 0:
            raise ValueError("fuel must be non-negative")
        self.policy = policy
        self.fuel = fuel
        self.fatigue_bound = policy.fatigue_bound
        self.executive = state.executive
        self.tree = state.htva
        self.threads: dict[str, ThreadInstance] = hv.leaf_map(state.htva)
        self.services = dict(state.services)
        self.env = state.env
        names = [t.name for t in hv.iter_leaves(state.htva) if not t.finished]
        self.order = [n for n in (state.order or names) if n in names]
        self.phase = state.phase or PhaseState(frozenset(self.order), mode=state.mode)
        self.prng = policy.seed if state.prng is None else state.prng
        self.step = state.step
        self.turns = state.turns
        self.last = state.last
        self.snapshot = dict(state.snapshot) or self._prominences()
        self.events: list[TraceEvent] = []
        self.exhausted = False
        self._blocked: str | None = next((n for n in self.order if self.threads[n].blocked), None)
        if policy.kind == "weighted" and not sum(self.threads[n].attrs.workload.intended for n in self.order):
            raise ValueError("weighted policy needs intended workload fractions on the threads")

    # views used by classify_motive
    @property
    def live(self) -> list[str]:
        return self.order

    def _prominences(self) -> dict[str, int]:
        return {n: t.attrs.prominence_subjective for n, t in self.threads.items()}

    def emit(self, kind: str, thread: str | None, **kw) -> int:
        self.step += 1
        self.events.append(TraceEvent(self.step, kind, thread, **kw))
        return self.step

    # turn execution

    def _out_of_fuel(self) -> bool:
        if self.exhausted:
            return True
        if self.turns >= self.fuel:
            self.exhausted = True
            self.emit("fuel-exhausted", None)
        return self.exhausted

    def execute(self, name: str, context: str | None = None) -> None:
        """Run one behavior step of ``name`` and record its outcome."""
        t = self.threads[name]
        self.turns += 1
        res, self.services = behavior_step(t.iseq, t.pc, self.services)
        consecutive = t.consecutive + 1 if self.last == name else 1
        finished = False
        blocked = False
        if isinstance(res, Performed):
            kind = "act" if context is None else "pseudo-act"
            step = self.emit(kind, name, context=context, action=res.action, reply=res.reply)
            if res.action.split(".", 1)[0] not in self.services:
                self.env = apply_action(self.env, step, res.action)
            t = replace(t, pc=res.next_pc)
        elif isinstance(res, Blocked):
            self.emit("block", name, context=context, action=res.action)
            blocked = True
        else:
            self.emit("halt" if isinstance(res, Halted) else "deadlock", name, context=context)
            finished = True
        self.threads[name] = replace(
            t, blocked=blocked, finished=finished, last_active=self.turns, consecutive=consecutive
        )
        if self._blocked is not None and self._blocked != name:
            self.threads[self._blocked] = replace(self.threads[self._blocked], blocked=False)
        self._blocked = name if blocked else None
        if finished:
            # a final turn does not break another thread's streak
            self.order.remove(name)
            self.phase = retire(self.phase, name)
            return
        self.last = name
        if self.policy.kind == "cyclic" and (blocked or consecutive % self.policy.turn_length == 0):
            # move the thread that just acted to the tail; a rotation when it was the head
            self.order.remove(name)
            self.order.append(name)

    # sip mode

    def _successor(self, r: str) -> str | None:
        others = [n for n in self.order if n != r]
        if not others:
            return None
        i = self.order.index(r)
        return (self.order[i + 1 :] + self.order[:i])[0]

    def _switch_to(self, r: str) -> None:
        motive = classify_motive(self, self.phase.active, r)
        ps = c_switch(self.phase, self.phase.focus, r)
        s = self._successor(r)
        if s is not None:
            ps = c_switch(ps, r, s)
        ps, _ = a_switch(ps, r, motive)
        self.phase = ps
        self.emit("c-switch", r)
        if s is not None:
            self.emit("c-switch", s)
        else:
            self.emit("waiver", r)
        self.emit("proper-switch", r, motive=str(motive))
        self.snapshot = self._prominences()

    def sip_turn(self) -> None:
        cands = [n for n in self.order if not self.threads[n].blocked] or list(self.order)
        last = self.last if self.last in self.threads else None
        consecutive = self.threads[last].consecutive if last else 0
        weights = last_active = None
        if self.policy.kind == "weighted":
            weights = {n: self.threads[n].attrs.workload.intended for n in cands}
            last_active = {n: self.threads[n].last_active for n in cands}
        pick, self.prng = next_thread(
            self.policy, cands, last, consecutive, self.prng,
            weights=weights, last_active=last_active, now=self.turns + 1,
        )
        if pick != self.phase.active:
            self._switch_to(pick)
        self.execute(pick)

    def run_sip(self) -> None:
        while self.order and not self._out_of_fuel():
            self.sip_turn()

    # manual mode

    def _sync_tree(self) -> Vector:
        return hv.with_threads(self.tree, self.threads)

    def _set_tree(self, tree: Vector) -> None:
        self.tree = tree
        self.threads = hv.leaf_map(tree)

    def apply_meta(self, m: MetaAction) -> None:
        """Apply one scripted meta-action; on error nothing changes."""
        op, args = m.op, m.args
        if op == "c":
            src = None if args[0] == "-" else args[0]
            self.phase = c_switch(self.phase, src, args[1])
            self.emit("c-switch", args[1])
        elif op == "a":
            r = args[0]
            motive = Motive(args[1]) if len(args) > 1 else None
            if motive is None and r in self.threads:
                motive = classify_motive(self, self.phase.active, r)
            waived = (
                self.phase.active is not None
                and not readiness_ok(self.phase, r)
                and readiness_waived(self.phase, r)
            )
            self.phase, _ = a_switch(self.phase, r, motive or Motive.POLICY_DEFAULT)
            if waived:
                self.emit("waiver", r)
            self.emit("proper-switch", r, motive=str(motive or Motive.POLICY_DEFAULT))
            self.snapshot = self._prominences()
        elif op == "pseudo":
            t, r = args
            self.phase = pseudo_switch(self.phase, t, r)
            self.emit("pseudo-switch", r, context=t)
        elif op == "back":
            r, t = args
            self.phase = pseudo_back(self.phase, r, t)
            self.emit("pseudo-back", r, context=t)
        elif op == "step":
            self._manual_steps(int(args[0]))
        elif op in ("shrink", "grow"):
            t, delta, comp = args
            fn = hv.shrink if op == "shrink" else hv.grow
            self._set_tree(fn(self._sync_tree(), t, int(delta), comp, executive=self.executive))
            self.emit(op, t, action=f"{comp}:{delta}")
        elif op == "rebalance":
            src, comp = args[0], args[1]
            to = {}
            for item in args[2:]:
                name, _, delta = item.partition(":")
                to[name] = int(delta)
            self._set_tree(hv.rebalance(self._sync_tree(), src, to, comp, executive=self.executive))
            if to:
                self.emit("shrink", src, action=f"{comp}:{sum(to.values())}")
                for name, delta in to.items():
                    self.emit("grow", name, action=f"{comp}:{delta}")
        elif op == "prominence":
            t, obj, subj = args[0], int(args[1]), int(args[2])
            th = hv.find(self._sync_tree(), t)
            attrs = replace(th.attrs, prominence_objective=obj, prominence_subjective=subj)
            self.threads[t] = replace(self.threads[t], attrs=attrs)
        else:
            raise ParseError(f"unknown meta-action {op!r}", m.line)

    def _manual_steps(self, n: int) -> None:
        if n < 0:
            raise ValueError("step count must be non-negative")
        host = self.phase.active
        guest = self.phase.pseudo[1] if self.phase.pseudo else None
        who = guest or host
        if who is None:
            raise NotActive("no properly active thread to step")
        if who not in self.order:
            raise ProtocolError(f"{who} has already finished")
        for _ in range(n):
            if self._out_of_fuel() or who not in self.order:
                break
            self.execute(who, context=host if guest else None)

    def run_script(self, script: Sequence[MetaAction]) -> None:
        for m in script:
            if self.exhausted:
                break
            self.apply_meta(m)

    # results

    def trace(self) -> Trace:
        seed = self.policy.seed if self.policy.kind == "arbitrary" else None
        return Trace(tuple(self.events), self.turns, len(self.threads), self.policy.kind, seed)

    def state(self) -> EngineState:
        return EngineState(
            htva=self._sync_tree(),
            services=dict(self.services),
            executive=self.executive,
            mode=self.phase.mode,
            env=self.env,
            phase=self.phase,
            order=tuple(self.order),
            prng=self.prng,
            step=self.step,
            turns=self.turns,
            last=self.last,
            snapshot=dict(self.snapshot),
        )


def run(
    state: EngineState,
    policy: Policy,
    fuel: int = DEFAULT_FUEL,
    script: Sequence[MetaAction] = (),
) -> tuple[Trace, EngineState]:
    """Run ``state`` to completion or fuel exhaustion.

    Sip mode lets ``policy`` pick every turn; manual mode follows ``script``.
    """
    engine = Engine(state, policy, fuel)
    if engine.phase.mode == MANUAL:
        engine.run_script(script)
    else:
        engine.run_sip()
    return engine.trace(), engine.state()
