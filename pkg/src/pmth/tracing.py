"""Traces, per-thread projection and ex-post decomposition into revealed threads."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .errors import AmbiguousClassifier, ParseError

KINDS = (
    "act",
    "pseudo-act",
    "c-switch",
    "a-switch",
    "proper-switch",
    "pseudo-switch",
    "pseudo-back",
    "block",
    "halt",
    "deadlock",
    "shrink",
    "grow",
    "waiver",
    "fuel-exhausted",
)
ACTION_KINDS = ("act", "pseudo-act")
SWITCH_KINDS = ("c-switch", "a-switch", "proper-switch", "pseudo-switch", "pseudo-back")


@dataclass(frozen=True)
class TraceEvent:
    step: int
    kind: str
    thread: str | None = None
    context: str | None = None
    action: str | None = None
    reply: str | None = None
    motive: str | None = None


@dataclass(frozen=True)
class Trace:
    events: tuple[TraceEvent, ...] = ()
    steps: int = 0
    threads: int = 0
    policy: str = "-"
    seed: int | None = None

    def actions(self) -> list[TraceEvent]:
        return [e for e in self.events if e.kind in ACTION_KINDS]


def _cell(v) -> str:
    return "-" if v is None else str(v)


def render_trace(tr: Trace) -> str:
    out = []
    for e in tr.events:
        cells = (e.step, e.kind, e.thread, e.context, e.action, e.reply, e.motive)
        out.append("\t".join(_cell(c) for c in cells))
    out.append(f"# steps={tr.steps} threads={tr.threads} policy={tr.policy} seed={_cell(tr.seed)}")
    return "\n".join(out) + "\n"


def _opt(cell: str) -> str | None:
    return None if cell == "-" else cell


def parse_trace(text: str) -> Trace:
    events: list[TraceEvent] = []
    summary = None
    last = 0
    for lineno, line in enumerate(text.split("\n"), 1):
        if not line:
            continue
        if summary is not None:
            raise ParseError("content after the summary line", lineno)
        if line.startswith("# "):
            fields = dict(kv.split("=", 1) for kv in line[2:].split() if "=" in kv)
            try:
                seed = fields.get("seed", "-")
                summary = dict(
                    steps=int(fields["steps"]),
                    threads=int(fields["threads"]),
                    policy=fields["policy"],
                    seed=None if seed == "-" else int(seed),
                )
            except (KeyError, ValueError) as exc:
                raise ParseError(f"malformed summary line ({exc})", lineno) from None
            continue
        cells = line.split("\t")
        if len(cells) != 7:
            raise ParseError(f"expected 7 tab-separated fields, got {len(cells)}", lineno)
        try:
            step = int(cells[0])
        except ValueError:
            raise ParseError(f"step {cells[0]!r} is not an integer", lineno, 1) from None
        if step <= last:
            raise ParseError(f"step {step} does not increase", lineno, 1)
        last = step
        if cells[1] not in KINDS:
            raise ParseError(f"unknown event kind {cells[1]!r}", lineno)
        events.append(TraceEvent(step, cells[1], *(_opt(c) for c in cells[2:])))
    if summary is None:
        raise ParseError("missing summary line")
    return Trace(tuple(events), **summary)


@dataclass(frozen=True)
class Progression:
    items: tuple[tuple[int, str], ...] = ()
    now: int = 0

    def __post_init__(self):
        if not 0 <= self.now <= len(self.items):
            raise ValueError(f"now={self.now} outside 0..{len(self.items)}")
        steps = [s for s, _ in self.items]
        if any(a >= b for a, b in zip(steps, steps[1:])):
            raise ValueError("progression steps must strictly increase")

    @property
    def past(self) -> tuple[tuple[int, str], ...]:
        return self.items[: self.now]

    @property
    def future(self) -> tuple[tuple[int, str], ...]:
        return self.items[self.now :]

    def actions(self) -> list[str]:
        return [a for _, a in self.items]


def _progression(items: Sequence[tuple[int, str]], now_step: int | None) -> Progression:
    items = tuple(items)
    if now_step is None:
        return Progression(items, len(items))
    return Progression(items, sum(1 for s, _ in items if s <= now_step))


def project(tr: Trace, t: str, now_step: int | None = None) -> Progression:
    return _progression([(e.step, e.action) for e in tr.events if e.kind in ACTION_KINDS and e.thread == t], now_step)


@dataclass(frozen=True)
class MultiTrace:
    threads: Mapping[str, Progression] = field(default_factory=dict)
    classifier_id: str = ""


def _classifier_id(rules: Sequence[tuple[str, str]], default: str) -> str:
    return "prefix:" + ",".join(f"{p}={n}" for p, n in rules) + f";default={default}"


def decompose(
    tr: Trace,
    classifier: Iterable[tuple[str, str]] | Mapping[str, str] | None = None,
    default: str = "other",
    *,
    provenance: bool = False,
    now_step: int | None = None,
) -> MultiTrace:
    """Partition the act/pseudo-act events into revealed threads.

    With ``provenance`` each event goes to its recorded owner.  Otherwise the
    longest classifier prefix matching the action names the revealed thread,
    falling back to ``default``.
    """
    if provenance:
        def owner(e):
            return e.thread
        cid = "provenance"
    else:
        rules = list(classifier.items() if isinstance(classifier, Mapping) else classifier or ())
        prefixes = [p for p, _ in rules]
        dup = sorted({p for p in prefixes if prefixes.count(p) > 1})
        if dup:
            raise AmbiguousClassifier(f"duplicate classifier prefixes: {', '.join(map(repr, dup))}")
        by_len = sorted(rules, key=lambda r: -len(r[0]))

        def owner(e):
            for p, name in by_len:
                if e.action.startswith(p):
                    return name
            return default
        cid = _classifier_id(rules, default)

    groups: dict[str, list[tuple[int, str]]] = {}
    for e in tr.actions():
        groups.setdefault(owner(e), []).append((e.step, e.action))
    return MultiTrace({k: _progression(groups[k], now_step) for k in sorted(groups)}, cid)


def reinterleave(mt: MultiTrace) -> list[tuple[int, str, str]]:
    """Merge revealed progressions back into one step-ordered sequence."""
    merged = [(s, a, name) for name, p in mt.threads.items() for s, a in p.items]
    merged.sort()
    return merged


@dataclass(frozen=True)
class ThreadStats:
    count: int
    first: int
    last: int

    @property
    def span(self) -> int:
        return self.last - self.first + 1


@dataclass(frozen=True)
class Stats:
    rows: Mapping[str, ThreadStats]

    @property
    def mean_span(self) -> Fraction | None:
        if not self.rows:
            return None
        return Fraction(sum(r.span for r in self.rows.values()), len(self.rows))

    def render(self) -> str:
        lines = [f"{'name':<16} {'count':>7} {'first':>7} {'last':>7} {'span':>7}"]
        for name in sorted(self.rows):
            r = self.rows[name]
            lines.append(f"{name:<16} {r.count:>7} {r.first:>7} {r.last:>7} {r.span:>7}")
        lines.append(f"# mean-span={_cell(self.mean_span)}")
        return "\n".join(lines) + "\n"


def stats(mt: MultiTrace) -> Stats:
    rows = {
        name: ThreadStats(len(p.items), p.items[0][0], p.items[-1][0])
        for name, p in mt.threads.items()
        if p.items
    }
    return Stats(rows)
