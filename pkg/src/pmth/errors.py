"""Exception hierarchy.

Every error carries a short machine-readable ``code`` that the CLI prints as a
one-line prefix (``E_PARSE: ...``) before exiting nonzero.
"""

from __future__ import annotations


class PmthError(Exception):
    code = "E_PMTH"


class ParseError(PmthError):
    code = "E_PARSE"

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class MalformedInstruction(ParseError):
    pass


class ValidationError(PmthError):
    code = "E_VALID"

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class UnknownThread(PmthError):
    code = "E_UNKNOWN"


# execution

class ExecutionError(PmthError):
    code = "E_EXEC"


class JumpChainExceeded(ExecutionError):
    pass


class NonMonotoneStep(ExecutionError):
    pass


class NoLiveThread(ExecutionError):
    pass


class CyclicGoals(PmthError):
    code = "E_GOALS"

    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        super().__init__("goal dependencies form a cycle: " + " -> ".join(cycle + cycle[:1]))


# switch protocol

class ProtocolError(PmthError):
    code = "E_PROTOCOL"


class ContemplationNotHeld(ProtocolError):
    pass


class NotContemplated(ProtocolError):
    pass


class ReadinessViolation(ProtocolError):
    pass


class UnclosedPseudoSwitch(ProtocolError):
    pass


class PseudoNested(ProtocolError):
    pass


class NotActive(ProtocolError):
    pass


class UnmatchedPseudoBack(ProtocolError):
    pass


# workload bookkeeping

class WorkloadError(PmthError):
    code = "E_WORKLOAD"


class InsufficientWorkload(WorkloadError):
    pass


class InsufficientExecutiveBalance(WorkloadError):
    pass


class NoExecutive(WorkloadError):
    pass


class SelfTransfer(WorkloadError):
    pass


class OrphanedWorkload(WorkloadError):
    pass


class DuplicateName(WorkloadError):
    pass


class ThreadNotFinished(WorkloadError):
    pass


class AmbiguousClassifier(PmthError):
    code = "E_CLASSIFY"


class UnknownGoal(PmthError):
    code = "E_GOALS"
