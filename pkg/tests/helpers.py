"""Small builders shared by the engine-level tests."""

from pmth.htva import AttributeSet, ThreadInstance, Vector, WorkloadQuad
from pmth.interleave import EngineState
from pmth.thread_core import InstructionSequence, Service


def even_split(n):
    base, extra = divmod(10000, n)
    return [base + (1 if i < extra else 0) for i in range(n)]


def make_state(programs, services=None, weights=None, mode="sip", executive=None):
    """``programs`` maps thread name to token text (or a token list)."""
    names = list(programs)
    shares = weights or even_split(len(names))
    leaves = []
    for name, share in zip(names, shares):
        text = programs[name]
        if not isinstance(text, str):
            text = " ".join(text)
        attrs = AttributeSet(workload=WorkloadQuad(share, share, share, share))
        leaves.append(ThreadInstance(name, InstructionSequence.parse(text, name), attrs=attrs))
    svcs = {k: Service(k, tuple(v)) for k, v in (services or {}).items()}
    kw = {} if executive is None else {"executive": executive}
    return EngineState(Vector("v", tuple(leaves)), svcs, mode=mode, **kw)


def act_actions(trace):
    return [e.action for e in trace.actions()]


# acceptance results, printed by the terminal-summary hook in conftest.py
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def record(number, title, ok, detail=""):
    ACCEPTANCE[number] = (title, bool(ok), detail)
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} {detail}".rstrip())
    return ok
