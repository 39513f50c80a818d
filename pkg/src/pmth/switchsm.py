"""Switch protocol: contemplation, proper activity and pseudo-switching.

Transitions are pure: each returns a new ``PhaseState`` and raises without
side effects when its precondition does not hold.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .errors import (
    ContemplationNotHeld,
    NotActive,
    NotContemplated,
    ProtocolError,
    PseudoNested,
    ReadinessViolation,
    UnclosedPseudoSwitch,
    UnknownThread,
    UnmatchedPseudoBack,
)

SIP, MANUAL = "sip", "manual"


class SelfSwitch(ProtocolError):
    pass


class Motive(str, enum.Enum):
    FAIRNESS = "fairness"
    BLOCKED = "blocked"
    PRIORITY_CHANGE = "priority-change"
    FATIGUE = "fatigue"
    POLICY_DEFAULT = "policy-default"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class PhaseState:
    threads: frozenset[str]
    active: str | None = None
    contemplating: str | None = None
    pseudo: tuple[str, str] | None = None
    contemplated: tuple[str, ...] = ()
    mode: str = SIP

    @property
    def focus(self) -> str | None:
        """Thread from which the next C-switch departs."""
        return self.contemplating if self.contemplating is not None else self.active


@dataclass(frozen=True)
class SwitchEvent:
    kind: str
    to: str
    source: str | None = None
    motive: Motive | None = None
    step: int = 0


def _known(ps: PhaseState, name: str) -> None:
    if name not in ps.threads:
        raise UnknownThread(f"no live thread named {name!r}")


def c_switch(ps: PhaseState, t: str | None, r: str) -> PhaseState:
    """Move the contemplation focus from ``t`` to ``r``."""
    _known(ps, r)
    if r == t:
        raise SelfSwitch(f"{t} cannot contemplate itself")
    if t != ps.focus:
        raise ContemplationNotHeld(f"contemplation focus is {ps.focus}, not {t}")
    seen = ps.contemplated if r in ps.contemplated else ps.contemplated + (r,)
    return replace(ps, contemplating=r, contemplated=seen)


def readiness_ok(ps: PhaseState, r: str) -> bool:
    return r in ps.contemplated and any(s != r for s in ps.contemplated)


def readiness_waived(ps: PhaseState, r: str) -> bool:
    """No other live thread exists that could be contemplated."""
    return not (ps.threads - {r})


def a_switch(
    ps: PhaseState,
    r: str,
    motive: Motive = Motive.POLICY_DEFAULT,
    step: int = 0,
) -> tuple[PhaseState, SwitchEvent]:
    """Promote ``r`` from contemplation to proper activity.

    Manual mode requires ``r`` to be the current contemplation focus and the
    readiness rule to hold (waived at bootstrap or with no other live thread).
    In sip mode the driver contemplates ``r`` and then a successor, so it is
    enough that ``r`` was contemplated since the last proper switch.
    """
    if ps.pseudo is not None:
        raise UnclosedPseudoSwitch(f"pseudo-switch {ps.pseudo[0]}->{ps.pseudo[1]} is still open")
    _known(ps, r)
    if ps.mode == MANUAL:
        if ps.contemplating != r:
            raise NotContemplated(f"{r} is not being contemplated (focus: {ps.contemplating})")
        if ps.active is not None and not readiness_ok(ps, r) and not readiness_waived(ps, r):
            raise ReadinessViolation(
                f"switch to {r} needs contemplation of {r} and one other thread; saw {list(ps.contemplated)}"
            )
    elif r not in ps.contemplated:
        raise NotContemplated(f"{r} was not contemplated since the last proper switch")
    event = SwitchEvent("proper-switch", r, ps.active, motive, step)
    return replace(ps, active=r, contemplating=None, contemplated=()), event


def pseudo_switch(ps: PhaseState, t: str, r: str) -> PhaseState:
    if ps.pseudo is not None:
        raise PseudoNested(f"pseudo-switch {ps.pseudo[0]}->{ps.pseudo[1]} already held")
    if ps.active is None or t != ps.active:
        raise NotActive(f"{t} is not properly active (active: {ps.active})")
    _known(ps, r)
    if r == t:
        raise SelfSwitch(f"{t} cannot pseudo-switch to itself")
    return replace(ps, pseudo=(t, r))


def pseudo_back(ps: PhaseState, r: str, t: str) -> PhaseState:
    if ps.pseudo != (t, r):
        raise UnmatchedPseudoBack(f"no open pseudo-switch {t}->{r} (held: {ps.pseudo})")
    return replace(ps, pseudo=None)


def retire(ps: PhaseState, name: str) -> PhaseState:
    """Drop a finished thread from the live set, ending any phase it held."""
    return replace(
        ps,
        threads=ps.threads - {name},
        active=None if ps.active == name else ps.active,
        contemplating=None if ps.contemplating == name else ps.contemplating,
        contemplated=tuple(x for x in ps.contemplated if x != name),
    )


def invariant_violations(ps: PhaseState) -> list[str]:
    bad = []
    if ps.mode not in (SIP, MANUAL):
        bad.append(f"unknown mode {ps.mode!r}")
    if ps.active is not None and ps.active not in ps.threads:
        bad.append(f"active {ps.active} is not a live thread")
    if ps.contemplating is not None and ps.contemplating not in ps.threads:
        bad.append(f"contemplating {ps.contemplating} is not a live thread")
    if ps.pseudo is not None:
        host, guest = ps.pseudo
        if host != ps.active:
            bad.append(f"pseudo host {host} is not the active thread {ps.active}")
        if host == guest:
            bad.append("pseudo host equals guest")
    if len(set(ps.contemplated)) != len(ps.contemplated):
        bad.append("contemplated set has duplicates")
    if not set(ps.contemplated) <= ps.threads:
        bad.append("contemplated set mentions unknown threads")
    return bad


def classify_motive(state, source: str | None, to: str) -> Motive:
    """Explain a proper switch from ``source`` to ``to``; first match wins.

    ``state`` must expose ``threads`` (name -> thread with ``blocked``,
    ``consecutive``, ``last_active`` and ``attrs``), ``live``,
    ``fatigue_bound`` and ``snapshot`` (subjective prominence per thread as of
    the last proper switch).
    """
    if source is None or source not in state.threads:
        return Motive.POLICY_DEFAULT
    src = state.threads[source]
    if src.blocked:
        return Motive.BLOCKED
    if src.consecutive >= state.fatigue_bound:
        return Motive.FATIGUE
    target = state.threads[to]
    before = state.snapshot.get(to)
    if before is not None and before != target.attrs.prominence_subjective:
        return Motive.PRIORITY_CHANGE

    def age(name):
        la = state.threads[name].last_active
        return -1 if la is None else la

    if age(to) == min(age(n) for n in state.live):
        return Motive.FAIRNESS
    return Motive.POLICY_DEFAULT
