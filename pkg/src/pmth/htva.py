"""Hierarchical thread vectors, thread attributes and workload bookkeeping.

All workload arithmetic is integer basis points: each of the four workload
components must total exactly 10000 across every thread in the structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Mapping, NamedTuple, Union

from .errors import (
    DuplicateName,
    InsufficientExecutiveBalance,
    InsufficientWorkload,
    NoExecutive,
    OrphanedWorkload,
    SelfTransfer,
    ThreadNotFinished,
    UnknownThread,
    WorkloadError,
)
from .thread_core import InstructionSequence

TOTAL_BP = 10000
COMPONENTS = ("subjective", "objective", "intended", "expected")
OTHER_ATTRIBUTES = (
    "external_visibility",
    "rewardingness",
    "appreciation",
    "rationality",
    "avoidability",
    "removal_risk",
    "good_order",
    "preciousness",
    "subthread_structure",
)


class WorkloadQuad(NamedTuple):
    subjective: int = 0
    objective: int = 0
    intended: int = 0
    expected: int = 0


class EffectivenessQuad(NamedTuple):
    subjective: int = 0
    objective: int = 0
    intended: int = 0
    expected: int = 0


class OtherQuad(NamedTuple):
    internal: int = 0
    external: int = 0
    intended: int = 0
    expected: int = 0


@dataclass(frozen=True)
class AttributeSet:
    mission: str = ""
    targets: str = ""
    prominence_objective: int = 3
    prominence_subjective: int = 3
    workload: WorkloadQuad = WorkloadQuad()
    effectiveness: EffectivenessQuad = EffectivenessQuad()
    flow: int = 0
    satisfaction: int = 0
    identification: int = 0
    clarity: int = 0
    other: Mapping[str, OtherQuad] = field(default_factory=dict)


@dataclass(frozen=True)
class ThreadInstance:
    name: str
    iseq: InstructionSequence
    pc: int = 1
    attrs: AttributeSet = AttributeSet()
    blocked: bool = False
    finished: bool = False
    last_active: int | None = None
    consecutive: int = 0

    @property
    def workload(self) -> WorkloadQuad:
        return self.attrs.workload


@dataclass(frozen=True)
class Vector:
    name: str
    children: tuple["HtvNode", ...]

    def __post_init__(self):
        if not self.children:
            raise ValueError(f"vector {self.name!r} must have at least one member")


HtvNode = Union[ThreadInstance, Vector]


@dataclass(frozen=True)
class ExecutiveConfig:
    """``thread`` names the dedicated executive; ``None`` means distributed."""

    thread: str | None = None

    @property
    def dedicated(self) -> bool:
        return self.thread is not None

    def __str__(self) -> str:
        return self.thread if self.dedicated else "distributed"


DISTRIBUTED = ExecutiveConfig()


# structure

def depth(n: HtvNode) -> int:
    if isinstance(n, ThreadInstance):
        return 0
    return 1 + max(depth(c) for c in n.children)


def iter_leaves(n: HtvNode) -> Iterator[ThreadInstance]:
    if isinstance(n, ThreadInstance):
        yield n
    else:
        for c in n.children:
            yield from iter_leaves(c)


def flatten(n: HtvNode) -> list[ThreadInstance]:
    return list(iter_leaves(n))


def rotate(v: Vector) -> Vector:
    return replace(v, children=v.children[1:] + v.children[:1])


def leaf_map(h: HtvNode) -> dict[str, ThreadInstance]:
    return {t.name: t for t in iter_leaves(h)}


def find(h: HtvNode, name: str) -> ThreadInstance:
    for t in iter_leaves(h):
        if t.name == name:
            return t
    raise UnknownThread(f"no thread named {name!r}")


def map_leaves(h: HtvNode, fn: Callable[[ThreadInstance], ThreadInstance]) -> HtvNode:
    if isinstance(h, ThreadInstance):
        return fn(h)
    return replace(h, children=tuple(map_leaves(c, fn) for c in h.children))


def with_threads(h: HtvNode, threads: Mapping[str, ThreadInstance]) -> HtvNode:
    """Swap in updated thread instances by name."""
    return map_leaves(h, lambda t: threads.get(t.name, t))


def _update_workloads(h: HtvNode, changes: Mapping[str, int], component: str) -> HtvNode:
    idx = _component_index(component)

    def fn(t: ThreadInstance) -> ThreadInstance:
        if t.name not in changes:
            return t
        wl = list(t.attrs.workload)
        wl[idx] += changes[t.name]
        return replace(t, attrs=replace(t.attrs, workload=WorkloadQuad(*wl)))

    return map_leaves(h, fn)


def _component_index(component: str) -> int:
    try:
        return COMPONENTS.index(component)
    except ValueError:
        raise ValueError(f"unknown workload component {component!r}; expected one of {COMPONENTS}") from None


def holding(h: HtvNode, name: str, component: str) -> int:
    return find(h, name).attrs.workload[_component_index(component)]


def component_totals(h: HtvNode) -> WorkloadQuad:
    sums = [0, 0, 0, 0]
    for t in iter_leaves(h):
        for i, v in enumerate(t.attrs.workload):
            sums[i] += v
    return WorkloadQuad(*sums)


# validation

@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def failed(self) -> list[Check]:
        return [c for c in self.checks if not c.ok]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def render(self) -> str:
        width = max(len(c.name) for c in self.checks)
        lines = [f"{'check'.ljust(width)}  result  detail"]
        for c in self.checks:
            lines.append(f"{c.name.ljust(width)}  {'pass' if c.ok else 'FAIL'}    {c.detail}".rstrip())
        return "\n".join(lines) + "\n"


def _range_problems(t: ThreadInstance) -> list[str]:
    a = t.attrs
    out = []

    def need(label, value, lo, hi):
        if not (isinstance(value, int) and lo <= value <= hi):
            out.append(f"{t.name}.{label}={value} not in {lo}..{hi}")

    need("prominence_objective", a.prominence_objective, 1, 5)
    need("prominence_subjective", a.prominence_subjective, 1, 5)
    for comp, v in zip(COMPONENTS, a.workload):
        need(f"workload.{comp}", v, 0, TOTAL_BP)
    for comp, v in zip(COMPONENTS, a.effectiveness):
        need(f"effectiveness.{comp}", v, 0, 100)
    for label in ("flow", "satisfaction", "identification", "clarity"):
        need(label, getattr(a, label), 0, 5)
    for key, quad in a.other.items():
        if key not in OTHER_ATTRIBUTES:
            out.append(f"{t.name}.other.{key} is not a known attribute")
            continue
        for part, v in zip(OtherQuad._fields, quad):
            need(f"other.{key}.{part}", v, 0, 100)
    if t.pc < 1:
        out.append(f"{t.name}.pc={t.pc} below 1")
    return out


def validate(h: HtvNode, executive: ExecutiveConfig = DISTRIBUTED) -> ValidationReport:
    leaves = flatten(h)
    n = len(leaves)
    checks = []

    names = [t.name for t in leaves]
    dups = sorted({x for x in names if names.count(x) > 1})
    checks.append(Check("unique-names", not dups, ("duplicates: " + ", ".join(dups)) if dups else f"{n} threads"))

    if executive.dedicated:
        ok = executive.thread in names
        checks.append(Check("executive", ok, f"dedicated {executive.thread}" + ("" if ok else " does not exist")))
    else:
        checks.append(Check("executive", True, "distributed"))

    for label, attr in (("objective", "prominence_objective"), ("subjective", "prominence_subjective")):
        total = sum(getattr(t.attrs, attr) for t in leaves)
        checks.append(Check(f"prominence-{label}", total == 3 * n, f"sum {total}, required {3 * n}"))

    totals = component_totals(h)
    for comp, total in zip(COMPONENTS, totals):
        checks.append(Check(f"workload-{comp}", total == TOTAL_BP, f"sum {total}, required {TOTAL_BP}"))

    problems = [p for t in leaves for p in _range_problems(t)]
    checks.append(Check("ranges", not problems, "; ".join(problems) if problems else "all in range"))
    return ValidationReport(tuple(checks))


# workload transfers

def _require_dedicated(executive: ExecutiveConfig) -> str:
    if not executive.dedicated:
        raise NoExecutive("no dedicated executive thread; use rebalance in distributed mode")
    return executive.thread


def _check_delta(delta: int) -> None:
    if delta < 0:
        raise ValueError(f"workload delta must be non-negative, got {delta}")


def shrink(h: HtvNode, t: str, delta: int, component: str, *, executive: ExecutiveConfig) -> HtvNode:
    """Move ``delta`` bp of ``component`` from thread ``t`` to the executive."""
    exe = _require_dedicated(executive)
    _check_delta(delta)
    if t == exe:
        raise SelfTransfer("the executive cannot shrink into itself")
    have = holding(h, t, component)
    find(h, exe)
    if have < delta:
        raise InsufficientWorkload(f"{t} holds {have} bp {component}, cannot shrink by {delta}")
    return _update_workloads(h, {t: -delta, exe: delta}, component)


def grow(h: HtvNode, t: str, delta: int, component: str, *, executive: ExecutiveConfig) -> HtvNode:
    """Move ``delta`` bp of ``component`` from the executive to thread ``t``."""
    exe = _require_dedicated(executive)
    _check_delta(delta)
    if t == exe:
        raise SelfTransfer("the executive cannot grow from itself")
    find(h, t)
    have = holding(h, exe, component)
    if have < delta:
        raise InsufficientExecutiveBalance(f"executive {exe} holds {have} bp {component}, cannot grant {delta}")
    return _update_workloads(h, {t: delta, exe: -delta}, component)


def rebalance(
    h: HtvNode,
    source: str,
    to: Mapping[str, int],
    component: str,
    *,
    executive: ExecutiveConfig = DISTRIBUTED,
) -> HtvNode:
    if executive.dedicated:
        raise WorkloadError("rebalance applies to distributed mode; use shrink/grow with an executive")
    if not to:
        return h
    if source in to:
        raise SelfTransfer(f"{source} cannot transfer workload to itself")
    for name, delta in to.items():
        find(h, name)
        _check_delta(delta)
    have = holding(h, source, component)
    need = sum(to.values())
    if have < need:
        raise InsufficientWorkload(f"{source} holds {have} bp {component}, cannot transfer {need}")
    return _update_workloads(h, {source: -need, **to}, component)


def _append_into(h: Vector, into: str, leaf: ThreadInstance) -> tuple[Vector, bool]:
    if h.name == into:
        return replace(h, children=h.children + (leaf,)), True
    kids = []
    done = False
    for c in h.children:
        if not done and isinstance(c, Vector):
            c, done = _append_into(c, into, leaf)
        kids.append(c)
    return replace(h, children=tuple(kids)), done


def create_thread(
    h: Vector,
    thread: ThreadInstance,
    *,
    executive: ExecutiveConfig,
    into: str | None = None,
    donor: str | None = None,
) -> Vector:
    """Add ``thread``, funding its requested workload from the executive or ``donor``."""
    names = leaf_map(h)
    if thread.name in names:
        raise DuplicateName(f"thread {thread.name!r} already exists")
    request = thread.attrs.workload
    if executive.dedicated:
        donor = executive.thread
    if any(request):
        if donor is None:
            raise NoExecutive(f"{thread.name}: distributed mode needs an explicit donor for its workload")
        if donor not in names:
            raise UnknownThread(f"no thread named {donor!r}")
        have = names[donor].attrs.workload
        for comp, want, got in zip(COMPONENTS, request, have):
            if got < want:
                err = InsufficientExecutiveBalance if executive.dedicated else InsufficientWorkload
                raise err(f"{donor} holds {got} bp {comp}, cannot fund {want}")
    out, placed = _append_into(h, into if into is not None else h.name, thread)
    if not placed:
        raise UnknownThread(f"no vector named {into!r}")
    if any(request):
        for comp, want in zip(COMPONENTS, request):
            out = _update_workloads(out, {donor: -want}, comp)
    return out


def _prune(n: HtvNode, name: str) -> HtvNode | None:
    if isinstance(n, ThreadInstance):
        return None if n.name == name else n
    kids = tuple(k for k in (_prune(c, name) for c in n.children) if k is not None)
    return replace(n, children=kids) if kids else None


def remove_thread(
    h: Vector,
    t: str,
    *,
    executive: ExecutiveConfig,
    force: bool = False,
    to: str | None = None,
) -> Vector:
    """Remove thread ``t`` and return its workload to the executive or ``to``."""
    victim = find(h, t)
    if not (victim.finished or force):
        raise ThreadNotFinished(f"{t} has not finished; pass force to remove it anyway")
    if executive.dedicated:
        if t == executive.thread:
            raise WorkloadError("the dedicated executive cannot be removed")
        to = executive.thread
    if to == t:
        raise SelfTransfer(f"{t} cannot hand its workload to itself")
    held = victim.attrs.workload
    if any(held):
        if to is None:
            raise OrphanedWorkload(f"{t} holds workload {tuple(held)} and no destination was given")
        find(h, to)
    out = _prune(h, t)
    if out is None:
        raise WorkloadError("cannot remove the last thread")
    if any(held):
        for comp, v in zip(COMPONENTS, held):
            out = _update_workloads(out, {to: v}, comp)
    return out
