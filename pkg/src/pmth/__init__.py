"""Deterministic simulation of single-agent multi-threading with strategic interleaving."""

from .htva import ExecutiveConfig, ThreadInstance, Vector, depth, flatten, validate
from .interleave import EngineState, Policy, run, splitmix64
from .scenario import format_scenario, parse_scenario
from .thread_core import InstructionSequence, Service, behavior_step, condense, parse_instruction
from .tracing import decompose, project, render_trace, stats

__version__ = "0.1.0"

__all__ = [
    "EngineState", "ExecutiveConfig", "InstructionSequence", "Policy", "Service", "ThreadInstance", "Vector",
    "behavior_step", "condense", "decompose", "depth", "flatten", "format_scenario", "parse_instruction",
    "parse_scenario", "project", "render_trace", "run", "splitmix64", "stats", "validate",
]
