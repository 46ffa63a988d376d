"""Restricted scene query language: parser, interpreter, canonical unparser."""

from .interpreter import ExecError, ExecLimits, ExecutionOutcome, execute
from .nodes import Program, unparse
from .parser import ParseError, parse

__all__ = [
    "ExecError",
    "ExecLimits",
    "ExecutionOutcome",
    "ParseError",
    "Program",
    "execute",
    "parse",
    "unparse",
]
