"""Line-oriented scenario files.

Sections::

    [service NAME]   replies = T F B ...
    [thread NAME]    iseq = ... | goals = id:f.m ... / dep = a b
                     workload = s o i e, prominence = o s, effectiveness = s o i e,
                     mission, targets, flow, satisfaction, identification, clarity,
                     other = ATTRIBUTE internal external intended expected
    [vector NAME]    member = NAME (repeatable, in order)
    [policy]         kind, seed, fatigue, turn, mode, executive
    [meta]           one meta-action per line (manual mode)

Whole lines starting with ``#`` are comments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .errors import MalformedInstruction, ParseError, PmthError, ValidationError
from .htva import (
    COMPONENTS,
    DISTRIBUTED,
    TOTAL_BP,
    AttributeSet,
    EffectivenessQuad,
    ExecutiveConfig,
    OtherQuad,
    ThreadInstance,
    ValidationReport,
    Vector,
    WorkloadQuad,
    flatten,
    validate,
)
from .interleave import EngineState, MetaAction, Policy, parse_meta
from .switchsm import MANUAL, SIP, Motive
from .thread_core import GoalGraph, InstructionSequence, Service, condense, is_ident, parse_instruction

SECTION = re.compile(r"\[\s*(service|thread|vector|policy|meta)(?:\s+(\S+))?\s*\]\Z")
REPEATABLE = {"dep", "other", "member"}
THREAD_KEYS = {
    "iseq", "goals", "dep", "workload", "prominence", "effectiveness", "mission", "targets",
    "flow", "satisfaction", "identification", "clarity", "other",
}
# not an identifier, so it never collides with a declared vector
IMPLICIT_ROOT = "*"
SCALE_KEYS = ("flow", "satisfaction", "identification", "clarity")
SECTION_KEYS = {
    "service": {"replies"},
    "thread": THREAD_KEYS,
    "vector": {"member"},
    "policy": {"kind", "seed", "fatigue", "turn", "mode", "executive"},
}


@dataclass
class _Section:
    kind: str
    name: str | None
    line: int
    entries: dict = field(default_factory=dict)  # key -> (value, line, col) or list of those
    body: list = field(default_factory=list)     # raw lines of [meta]

    def get(self, key):
        return self.entries.get(key)


@dataclass(frozen=True)
class Scenario:
    services: dict[str, Service]
    threads: dict[str, ThreadInstance]
    vectors: dict[str, tuple[str, ...]]
    root: Vector
    executive: ExecutiveConfig = DISTRIBUTED
    policy: Policy = Policy()
    mode: str = SIP
    meta: tuple[MetaAction, ...] = ()
    goals: dict[str, GoalGraph] = field(default_factory=dict)
    report: ValidationReport | None = None

    def to_state(self) -> EngineState:
        return EngineState(htva=self.root, services=dict(self.services), executive=self.executive, mode=self.mode)


def _sections(text: str) -> list[_Section]:
    out: list[_Section] = []
    cur = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            m = SECTION.match(line)
            if not m:
                raise ParseError(f"malformed section header {line!r}", lineno, 1)
            kind, name = m.groups()
            named = kind in ("service", "thread", "vector")
            if named and not name:
                raise ParseError(f"[{kind}] needs a name", lineno, 1)
            if not named and name:
                raise ParseError(f"[{kind}] takes no name", lineno, 1)
            if named and not is_ident(name):
                raise ParseError(f"name {name!r} must be drawn from [a-z0-9_]", lineno, 2 + len(kind))
            cur = _Section(kind, name, lineno)
            out.append(cur)
            continue
        if cur is None:
            raise ParseError("content before the first section", lineno, 1)
        if cur.kind == "meta":
            cur.body.append((line, lineno))
            continue
        key, eq, value = line.partition("=")
        key = key.strip()
        col = raw.index(key[0]) + 1 if key else 1
        if not eq:
            raise ParseError(f"expected 'key = value', got {line!r}", lineno, col)
        if key not in SECTION_KEYS[cur.kind]:
            raise ParseError(f"unknown key {key!r} in [{cur.kind}]", lineno, col)
        entry = (value.strip(), lineno, raw.index("=") + 2)
        if key in REPEATABLE:
            cur.entries.setdefault(key, []).append(entry)
        elif key in cur.entries:
            raise ParseError(f"duplicate key {key!r}", lineno, col)
        else:
            cur.entries[key] = entry
    return out


def _ints(entry, count: int, what: str) -> list[int]:
    value, line, col = entry
    parts = value.split()
    if len(parts) != count:
        raise ParseError(f"{what} needs {count} integers, got {len(parts)}", line, col)
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise ParseError(f"{what}: {value!r} is not a list of integers", line, col) from None


def _thread(sec: _Section) -> tuple[ThreadInstance, GoalGraph | None, bool]:
    e = sec.entries
    if "iseq" in e and "goals" in e:
        raise ParseError(f"thread {sec.name}: give either iseq or goals, not both", sec.line)
    if "dep" in e and "goals" not in e:
        raise ParseError(f"thread {sec.name}: dep lines need a goals line", e["dep"][0][1])
    graph = None
    if "goals" in e:
        value, line, col = e["goals"]
        goals = {}
        for tok in value.split():
            gid, colon, action = tok.partition(":")
            if not colon or not is_ident(gid):
                raise ParseError(f"goal {tok!r} must look like id:focus.method", line, col)
            if gid in goals:
                raise ParseError(f"duplicate goal {gid!r}", line, col)
            try:
                parse_instruction(action)
            except MalformedInstruction as exc:
                raise ParseError(str(exc), line, col) from None
            goals[gid] = action
        deps = set()
        for value, dline, dcol in e.get("dep", []):
            pair = value.split()
            if len(pair) != 2 or any(p not in goals for p in pair):
                raise ParseError(f"dep {value!r} must name two declared goals", dline, dcol)
            deps.add(tuple(pair))
        graph = GoalGraph(goals, frozenset(deps))
        iseq = condense(graph, sec.name)
    elif "iseq" in e:
        value, line, col = e["iseq"]
        try:
            iseq = InstructionSequence.parse(value, sec.name)
        except MalformedInstruction as exc:
            raise ParseError(str(exc), line, col) from None
    else:
        iseq = InstructionSequence((), sec.name)

    kw = {}
    if "workload" in e:
        kw["workload"] = WorkloadQuad(*_ints(e["workload"], 4, "workload"))
    if "prominence" in e:
        kw["prominence_objective"], kw["prominence_subjective"] = _ints(e["prominence"], 2, "prominence")
    if "effectiveness" in e:
        kw["effectiveness"] = EffectivenessQuad(*_ints(e["effectiveness"], 4, "effectiveness"))
    for key in ("mission", "targets"):
        if key in e:
            kw[key] = e[key][0]
    for key in SCALE_KEYS:
        if key in e:
            kw[key] = _ints(e[key], 1, key)[0]
    other = {}
    for value, line, col in e.get("other", []):
        name, _, rest = value.partition(" ")
        if name in other:
            raise ParseError(f"duplicate other attribute {name!r}", line, col)
        other[name] = OtherQuad(*_ints((rest, line, col), 4, f"other {name}"))
    if other:
        kw["other"] = other
    return ThreadInstance(sec.name, iseq, attrs=AttributeSet(**kw)), graph, "workload" in e


def _policy(sec: _Section | None) -> tuple[Policy, str, ExecutiveConfig]:
    if sec is None:
        return Policy(), SIP, DISTRIBUTED
    e = sec.entries
    kw = {}
    if "kind" in e:
        kw["kind"] = e["kind"][0]
    for key, attr in (("seed", "seed"), ("fatigue", "fatigue_bound"), ("turn", "turn_length")):
        if key in e:
            kw[attr] = _ints(e[key], 1, key)[0]
    try:
        policy = Policy(**kw)
    except ValueError as exc:
        raise ParseError(str(exc), sec.line) from None
    mode = e["mode"][0] if "mode" in e else SIP
    if mode not in (SIP, MANUAL):
        raise ParseError(f"mode must be sip or manual, got {mode!r}", e["mode"][1], e["mode"][2])
    executive = DISTRIBUTED
    if "executive" in e and e["executive"][0] != "distributed":
        executive = ExecutiveConfig(e["executive"][0])
    return policy, mode, executive


def _build_root(vectors: dict, thread_names: list[str], nodes: dict, order: list[str]) -> Vector:
    parent: dict[str, str] = {}
    for vname, (members, _) in vectors.items():
        for m, line, col in members:
            if m not in nodes and m not in vectors:
                raise ParseError(f"vector {vname}: unknown member {m!r}", line, col)
            if m in parent:
                raise ParseError(f"{m} is a member of both {parent[m]} and {vname}", line, col)
            if m == vname:
                raise ParseError(f"vector {vname} cannot contain itself", line, col)
            parent[m] = vname

    built: dict[str, Vector] = {}

    def build(name, trail):
        if name in thread_names:
            return nodes[name]
        if name in trail:
            raise ParseError(f"vector nesting cycle through {name}", vectors[name][1])
        if name not in built:
            members = vectors[name][0]
            if not members:
                raise ParseError(f"vector {name} has no members", vectors[name][1])
            built[name] = Vector(name, tuple(build(m, trail | {name}) for m, _, _ in members))
        return built[name]

    tops = [n for n in order if n not in parent]
    if not tops:
        raise ParseError("vector nesting has no top level")
    roots = [build(n, frozenset()) for n in tops]
    if len(roots) == 1 and isinstance(roots[0], Vector):
        root = roots[0]
    else:
        root = Vector(IMPLICIT_ROOT, tuple(roots))
    unreached = set(vectors) - set(built)
    if unreached:
        raise ParseError(f"vector nesting cycle through {sorted(unreached)[0]}")
    return root


def _thread_refs(m: MetaAction) -> list[str]:
    a = m.args
    if m.op == "c":
        return [x for x in a if x != "-"]
    if m.op in ("a", "shrink", "grow", "prominence"):
        return [a[0]]
    if m.op in ("pseudo", "back"):
        return list(a)
    if m.op == "rebalance":
        return [a[0]] + [x.partition(":")[0] for x in a[2:]]
    return []


def _check_meta(m: MetaAction, names: set[str]) -> None:
    for ref in _thread_refs(m):
        if ref not in names:
            raise ParseError(f"meta-action {m}: unknown thread {ref!r}", m.line)
    a = m.args
    try:
        if m.op == "a" and len(a) > 1:
            Motive(a[1])
        if m.op == "step" and int(a[0]) < 0:
            raise ValueError("negative step count")
        if m.op in ("shrink", "grow"):
            int(a[1])
            if a[2] not in COMPONENTS:
                raise ValueError(f"unknown component {a[2]!r}")
        if m.op == "rebalance":
            if a[1] not in COMPONENTS:
                raise ValueError(f"unknown component {a[1]!r}")
            for item in a[2:]:
                int(item.partition(":")[2])
        if m.op == "prominence":
            int(a[1]), int(a[2])
    except ValueError as exc:
        raise ParseError(f"meta-action {m}: {exc}", m.line) from None


def parse_scenario(text: str, allow_invalid: bool = False) -> Scenario:
    """Parse and validate a scenario; validation failures raise unless allowed."""
    sections = _sections(text)
    services: dict[str, Service] = {}
    threads: dict[str, ThreadInstance] = {}
    goals: dict[str, GoalGraph] = {}
    vectors: dict[str, tuple[list, int]] = {}
    explicit: dict[str, bool] = {}
    order: list[str] = []
    policy_sec = meta_sec = None

    for sec in sections:
        if sec.kind in ("thread", "vector", "service"):
            taken = sec.name in threads or sec.name in vectors or sec.name in services
            if taken:
                raise ParseError(f"duplicate name {sec.name!r}", sec.line)
        if sec.kind == "service":
            entry = sec.get("replies")
            if entry is None:
                raise ParseError(f"service {sec.name}: missing replies", sec.line)
            try:
                services[sec.name] = Service(sec.name, tuple(entry[0].split()))
            except ValueError as exc:
                raise ParseError(str(exc), entry[1], entry[2]) from None
        elif sec.kind == "thread":
            try:
                t, g, has_wl = _thread(sec)
            except PmthError as exc:
                if isinstance(exc, ParseError):
                    raise
                raise ParseError(f"thread {sec.name}: {exc}", sec.line) from None
            threads[sec.name] = t
            explicit[sec.name] = has_wl
            if g is not None:
                goals[sec.name] = g
            order.append(sec.name)
        elif sec.kind == "vector":
            vectors[sec.name] = (sec.entries.get("member", []), sec.line)
            order.append(sec.name)
        elif sec.kind == "policy":
            if policy_sec is not None:
                raise ParseError("duplicate [policy] section", sec.line)
            policy_sec = sec
        else:
            if meta_sec is not None:
                raise ParseError("duplicate [meta] section", sec.line)
            meta_sec = sec

    if not threads:
        raise ParseError("scenario declares no threads")
    policy, mode, executive = _policy(policy_sec)

    if not any(explicit.values()):
        n = len(threads)
        names_in_order = [t.name for t in flatten(_build_root(vectors, list(threads), threads, order))]
        for i, name in enumerate(names_in_order):
            share = TOTAL_BP // n + (1 if i < TOTAL_BP % n else 0)
            t = threads[name]
            threads[name] = replace(t, attrs=replace(t.attrs, workload=WorkloadQuad(share, share, share, share)))
    elif policy.kind == "weighted":
        missing = [n for n, has in explicit.items() if not has]
        if missing:
            raise ParseError(f"weighted policy needs a workload line on every thread; missing: {', '.join(missing)}")

    root = _build_root(vectors, list(threads), threads, order)

    meta = []
    if meta_sec is not None:
        if mode != MANUAL:
            raise ParseError("[meta] requires mode = manual", meta_sec.line)
        for line, lineno in meta_sec.body:
            m = parse_meta(line, lineno)
            _check_meta(m, set(threads))
            meta.append(m)

    report = validate(root, executive)
    if not report.ok and not allow_invalid:
        failing = "; ".join(f"{c.name} ({c.detail})" for c in report.failed())
        raise ValidationError(f"scenario fails validation: {failing}", report)

    return Scenario(
        services=services,
        threads={t.name: t for t in flatten(root)},
        vectors={k: tuple(m for m, _, _ in v[0]) for k, v in vectors.items()},
        root=root,
        executive=executive,
        policy=policy,
        mode=mode,
        meta=tuple(meta),
        goals=goals,
        report=report,
    )


def format_scenario(sc: Scenario) -> str:
    """Canonical text form; parsing it back yields an equal scenario."""
    out: list[str] = []

    def section(header, lines):
        out.append(header)
        out.extend(lines)
        out.append("")

    for s in sc.services.values():
        section(f"[service {s.name}]", [f"replies = {' '.join(s.pattern)}"])

    decl = _declaration_order(sc)
    for name in decl:
        if name in sc.vectors:
            section(f"[vector {name}]", [f"member = {m}" for m in sc.vectors[name]])
            continue
        t = sc.threads[name]
        a = t.attrs
        lines = []
        if name in sc.goals:
            g = sc.goals[name]
            lines.append("goals = " + " ".join(f"{k}:{v}" for k, v in sorted(g.goals.items())))
            lines.extend(f"dep = {x} {y}" for x, y in sorted(g.deps))
        else:
            lines.append(f"iseq = {t.iseq}".rstrip())
        lines.append("workload = " + " ".join(map(str, a.workload)))
        lines.append(f"prominence = {a.prominence_objective} {a.prominence_subjective}")
        lines.append("effectiveness = " + " ".join(map(str, a.effectiveness)))
        for key in ("mission", "targets"):
            if getattr(a, key):
                lines.append(f"{key} = {getattr(a, key)}")
        for key in SCALE_KEYS:
            lines.append(f"{key} = {getattr(a, key)}")
        for key in sorted(a.other):
            lines.append(f"other = {key} " + " ".join(map(str, a.other[key])))
        section(f"[thread {name}]", lines)

    p = sc.policy
    section("[policy]", [
        f"kind = {p.kind}",
        f"seed = {p.seed}",
        f"fatigue = {p.fatigue_bound}",
        f"turn = {p.turn_length}",
        f"mode = {sc.mode}",
        f"executive = {sc.executive}",
    ])
    if sc.meta:
        section("[meta]", [str(m) for m in sc.meta])
    return "\n".join(out).rstrip("\n") + "\n"


def _declaration_order(sc: Scenario) -> list[str]:
    """Children before parents, top-level items in tree order."""
    seen: list[str] = []

    def visit(node):
        if isinstance(node, ThreadInstance):
            seen.append(node.name)
            return
        for c in node.children:
            visit(c)
        if node.name in sc.vectors:
            seen.append(node.name)

    visit(sc.root)
    return seen
