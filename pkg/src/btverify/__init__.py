"""Behavior-tree toolkit: a .btf parser, a compiler to a network of
discrete-timed communicating automata, an explicit-state explorer and
property checker, a real-time execution engine, and an independent
reference interpreter."""

from .compiler import CompileError, compile_model
from .explore import LimitExceeded, StateGraph, Trace, explore, find_path
from .interp import Interpreter, ScriptDecider, enumerate_behaviors
from .model import ComposedModel, Status, TickSemantics
from .parser import ParseError, parse_btf
from .props import Property, Verdict, check, default_properties, parse_properties
from .runtime import (
    ActionProvider,
    OutcomeScript,
    ProviderError,
    RunConfig,
    ScriptedProvider,
    emit_trace,
    parse_script,
    run,
)
from .validate import ValidatedSpec, ValidationFailed, validate

__version__ = "0.1.0"

__all__ = [
    "ActionProvider", "CompileError", "ComposedModel", "Interpreter",
    "LimitExceeded", "OutcomeScript", "ParseError", "Property",
    "ProviderError", "RunConfig", "ScriptDecider", "ScriptedProvider",
    "StateGraph", "Status", "TickSemantics", "Trace", "ValidatedSpec",
    "ValidationFailed", "Verdict", "check", "compile_model",
    "default_properties", "emit_trace", "enumerate_behaviors", "explore",
    "find_path", "parse_btf", "parse_properties", "parse_script", "run",
    "validate",
]
