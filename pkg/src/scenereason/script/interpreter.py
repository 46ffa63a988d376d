"""Sandboxed evaluator for parsed scene programs.

The builtin table below is the complete capability surface: programs cannot
reach files, the network, the clock, or anything else on the host.  Every
runtime failure is captured into the ExecutionOutcome (output produced
before the failure is preserved) so the caller can feed it back to the
model that wrote the program.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from ..api import ApiContext, ApiError, ObjectSet
from ..relations import RelationError, point_distance
from ..scene import ObjectInstance
from . import nodes
from .nodes import Program


@dataclass(frozen=True)
class ExecLimits:
    max_steps: int = 10000
    max_api_calls: int = 200
    max_stdout_bytes: int = 4096


@dataclass(frozen=True)
class ExecError:
    kind: str
    message: str
    line: int

    def render(self) -> str:
        return f"{self.kind}: {self.message}"


@dataclass(frozen=True)
class ExecutionOutcome:
    stdout: str
    steps: int
    api_calls: int
    error: ExecError | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


class _Halt(Exception):
    def __init__(self, kind: str, message: str, line: int):
        super().__init__(message)
        self.kind = kind
        self.message = message
        self.line = line


_REQUIRED = object()


def _typename(value) -> str:
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, float):
        return "number"
    if isinstance(value, str):
        return "string"
    if isinstance(value, list):
        return "list"
    if isinstance(value, ObjectSet):
        return "object set"
    if isinstance(value, ObjectInstance):
        return "object"
    return type(value).__name__


def display(value) -> str:
    """How a value looks when printed or interpolated."""
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, float):
        return str(int(value)) if value.is_integer() else repr(value)
    if isinstance(value, str):
        return value
    if isinstance(value, list):
        return "[" + ", ".join(display_repr(v) for v in value) + "]"
    if isinstance(value, ObjectSet):
        return "{" + ", ".join(display_repr(v) for v in value) + "}"
    if isinstance(value, ObjectInstance):
        return repr(value)
    return repr(value)


def display_repr(value) -> str:
    """Element view inside containers: strings keep their quotes."""
    if isinstance(value, str):
        return "'" + value.replace("\\", "\\\\").replace("'", "\\'") + "'"
    return display(value)


def _is_number(value) -> bool:
    return isinstance(value, (bool, int, float))


class _Interpreter:
    def __init__(self, ctx: ApiContext, limits: ExecLimits):
        self.ctx = ctx
        self.limits = limits
        self.env: dict[str, object] = {}
        self.chunks: list[str] = []
        self.nbytes = 0
        self.steps = 0
        self.api_calls = 0
        self.line = 0
        self.builtins: dict[str, Callable] = {
            "scene": self._b_scene,
            "filter": self._b_filter,
            "relate": self._b_relate,
            "relate_agent": self._b_relate_agent,
            "query_relation": self._b_query_relation,
            "query_relation_agent": self._b_query_relation_agent,
            "query_attribute": self._b_query_attribute,
            "query_state": self._b_query_state,
            "sort_by_distance": self._b_sort_by_distance,
            "len": self._b_len,
            "print": self._b_print,
            "str": self._b_str,
            "min": self._b_min,
            "max": self._b_max,
            "sum": self._b_sum,
            "round": self._b_round,
            "abs": self._b_abs,
            "list": self._b_list,
        }
        self._params: dict[str, list[tuple[str, object]]] = {
            "scene": [],
            "filter": [("object_set", _REQUIRED), ("category", _REQUIRED)],
            "relate": [
                ("object_set", _REQUIRED),
                ("reference_object", _REQUIRED),
                ("relation", _REQUIRED),
            ],
            "relate_agent": [("object_set", _REQUIRED), ("relation", _REQUIRED)],
            "query_relation": [
                ("object", _REQUIRED),
                ("reference_object", _REQUIRED),
                ("candidate_relations", None),
            ],
            "query_relation_agent": [
                ("object", _REQUIRED),
                ("candidate_relations", None),
            ],
            "query_attribute": [
                ("object", _REQUIRED),
                ("attribute_type", _REQUIRED),
                ("candidate_attribute_values", None),
            ],
            "query_state": [("object", _REQUIRED), ("candidate_states", _REQUIRED)],
            "sort_by_distance": [("objects", _REQUIRED)],
            "len": [("x", _REQUIRED)],
            "str": [("x", _REQUIRED)],
            "sum": [("x", _REQUIRED)],
            "round": [("x", _REQUIRED), ("ndigits", None)],
            "abs": [("x", _REQUIRED)],
            "list": [("x", _REQUIRED)],
        }
        self._varargs = {"print", "min", "max"}

    # -- plumbing -------------------------------------------------------

    def halt(self, kind: str, message: str):
        raise _Halt(kind, message, self.line)

    def step(self, node) -> None:
        line = getattr(node, "line", 0)
        if line:
            self.line = line
        self.steps += 1
        if self.steps > self.limits.max_steps:
            self.halt(
                "StepLimitExceeded",
                f"program exceeded the step budget of {self.limits.max_steps}",
            )

    def write(self, text: str) -> None:
        data = text.encode("utf-8")
        budget = self.limits.max_stdout_bytes - self.nbytes
        if len(data) > budget:
            self.chunks.append(data[:budget].decode("utf-8", errors="ignore"))
            self.nbytes = self.limits.max_stdout_bytes
            self.halt(
                "OutputTruncated",
                f"program output exceeded {self.limits.max_stdout_bytes} bytes",
            )
        self.chunks.append(text)
        self.nbytes += len(data)

    def api(self, fn, *args, **kwargs):
        self.api_calls += 1
        if self.api_calls > self.limits.max_api_calls:
            self.halt(
                "ApiCallLimitExceeded",
                f"program exceeded the api call budget of {self.limits.max_api_calls}",
            )
        try:
            return fn(*args, **kwargs)
        except (ApiError, RelationError) as exc:
            self.halt(type(exc).__name__, str(exc))

    # -- statements -----------------------------------------------------

    def exec_block(self, body: Sequence[nodes.Stmt]) -> None:
        for stmt in body:
            self.exec_stmt(stmt)

    def exec_stmt(self, stmt: nodes.Stmt) -> None:
        self.step(stmt)
        if isinstance(stmt, nodes.Assign):
            self.env[stmt.name] = self.eval(stmt.value)
        elif isinstance(stmt, nodes.ExprStmt):
            self.eval(stmt.value)
        elif isinstance(stmt, nodes.If):
            if self.truthy(self.eval(stmt.test)):
                self.exec_block(stmt.body)
            else:
                self.exec_block(stmt.orelse)
        elif isinstance(stmt, nodes.For):
            for item in self.iterate(stmt.iterable):
                self.env[stmt.var] = item
                self.exec_block(stmt.body)
        else:
            self.halt("TypeError", f"cannot execute {type(stmt).__name__}")

    def iterate(self, iterable_node: nodes.Expr):
        value = self.eval(iterable_node)
        if isinstance(value, (list, ObjectSet)):
            return list(value)
        self.halt(
            "TypeError", f"for loop needs a list or object set, got {_typename(value)}"
        )

    # -- expressions ------------------------------------------------------

    def eval(self, node: nodes.Expr):
        self.step(node)
        if isinstance(node, nodes.Literal):
            v = node.value
            return float(v) if isinstance(v, (int, float)) and not isinstance(v, bool) else v
        if isinstance(node, nodes.Name):
            if node.id not in self.env:
                self.halt("NameError", f"name {node.id!r} is not defined")
            return self.env[node.id]
        if isinstance(node, nodes.Member):
            return self.member(node)
        if isinstance(node, nodes.Call):
            return self.call(node)
        if isinstance(node, nodes.ListLit):
            return [self.eval(item) for item in node.items]
        if isinstance(node, nodes.ListComp):
            out = []
            for item in self.iterate(node.iterable):
                self.env[node.var] = item
                if node.cond is not None and not self.truthy(self.eval(node.cond)):
                    continue
                out.append(self.eval(node.expr))
            return out
        if isinstance(node, nodes.FString):
            pieces = []
            for part in node.parts:
                pieces.append(part if isinstance(part, str) else display(self.eval(part)))
            return "".join(pieces)
        if isinstance(node, nodes.BinOp):
            return self.binop(node)
        if isinstance(node, nodes.UnaryOp):
            if node.op == "not":
                return not self.truthy(self.eval(node.operand))
            value = self.eval(node.operand)
            if not _is_number(value):
                self.halt("TypeError", f"unary - needs a number, got {_typename(value)}")
            return -float(value)
        if isinstance(node, nodes.Index):
            return self.index(node)
        if isinstance(node, nodes.SliceExpr):
            return self.slice(node)
        self.halt("TypeError", f"cannot evaluate {type(node).__name__}")

    def member(self, node: nodes.Member):
        obj = self.eval(node.obj)
        if not isinstance(obj, ObjectInstance):
            self.halt(
                "TypeError",
                f".{node.attr} is only available on objects, got {_typename(obj)}",
            )
        if node.attr == "category":
            return obj.category
        return [float(c) for c in obj.centroid]

    def binop(self, node: nodes.BinOp):
        op = node.op
        if op in ("and", "or"):
            left = self.eval(node.left)
            if op == "and":
                return self.eval(node.right) if self.truthy(left) else left
            return left if self.truthy(left) else self.eval(node.right)
        left = self.eval(node.left)
        right = self.eval(node.right)
        if op == "in":
            return self.contains(left, right)
        if op in ("==", "!="):
            eq = self.equal(left, right)
            return eq if op == "==" else not eq
        if op in ("<", "<=", ">", ">="):
            return self.compare(op, left, right)
        if op in ("|", "&"):
            if isinstance(left, ObjectSet) and isinstance(right, ObjectSet):
                return left | right if op == "|" else left & right
            self.halt(
                "TypeError",
                f"{op} needs two object sets, got {_typename(left)} and {_typename(right)}",
            )
        if op == "+":
            if isinstance(left, str) and isinstance(right, str):
                return left + right
            if isinstance(left, list) and isinstance(right, list):
                return left + right
        if _is_number(left) and _is_number(right):
            a, b = float(left), float(right)
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if b == 0.0:
                self.halt("ZeroDivisionError", "division by zero")
            return a / b
        self.halt(
            "TypeError",
            f"unsupported operands for {op}: {_typename(left)} and {_typename(right)}",
        )

    def contains(self, item, container) -> bool:
        if isinstance(container, ObjectSet):
            if not isinstance(item, ObjectInstance):
                return False
            return item in container
        if isinstance(container, list):
            return any(self.equal(item, member) for member in container)
        if isinstance(container, str):
            if not isinstance(item, str):
                self.halt(
                    "TypeError", f"'in <string>' needs a string, got {_typename(item)}"
                )
            return item in container
        self.halt("TypeError", f"'in' needs a list, set or string, got {_typename(container)}")

    def equal(self, a, b) -> bool:
        if isinstance(a, ObjectInstance) and isinstance(b, ObjectInstance):
            return a.id == b.id
        if isinstance(a, ObjectSet) and isinstance(b, ObjectSet):
            return a == b
        if isinstance(a, list) and isinstance(b, list):
            return len(a) == len(b) and all(self.equal(x, y) for x, y in zip(a, b))
        if type(a) in (bool, float, str) and type(b) in (bool, float, str):
            return a == b
        return a is b

    def compare(self, op: str, a, b) -> bool:
        ok = (_is_number(a) and _is_number(b)) or (
            isinstance(a, str) and isinstance(b, str)
        )
        if not ok:
            self.halt(
                "TypeError",
                f"cannot order {_typename(a)} and {_typename(b)} with {op}",
            )
        if _is_number(a):
            a, b = float(a), float(b)
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        return a >= b

    def truthy(self, value) -> bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, float):
            return value != 0.0
        if isinstance(value, str):
            return bool(value)
        if isinstance(value, (list, ObjectSet)):
            return len(value) > 0
        return value is not None

    def index(self, node: nodes.Index):
        container = self.eval(node.obj)
        idx = self.eval(node.index)
        i = self.as_int(idx, "index")
        if not isinstance(container, (list, str)):
            self.halt("TypeError", f"cannot index a {_typename(container)}")
        try:
            return container[i]
        except IndexError:
            self.halt("IndexError", f"index {i} out of range for length {len(container)}")

    def slice(self, node: nodes.SliceExpr):
        container = self.eval(node.obj)
        if not isinstance(container, (list, str)):
            self.halt("TypeError", f"cannot slice a {_typename(container)}")
        lo = self.as_int(self.eval(node.lower), "slice bound") if node.lower else None
        hi = self.as_int(self.eval(node.upper), "slice bound") if node.upper else None
        return container[lo:hi]

    def as_int(self, value, what: str) -> int:
        if not _is_number(value) or float(value) != int(float(value)):
            self.halt("TypeError", f"{what} must be an integer, got {display(value)}")
        return int(float(value))

    # -- calls ------------------------------------------------------------

    def call(self, node: nodes.Call):
        name = node.func
        if name not in self.builtins:
            if name in self.env:
                self.halt(
                    "UnknownBuiltin",
                    f"{name!r} is a variable, not a callable builtin",
                )
            self.halt("NameError", f"name {name!r} is not defined")
        args = [self.eval(a) for a in node.args]
        kwargs = [(k, self.eval(v)) for k, v in node.kwargs]
        if name in self._varargs:
            if kwargs:
                self.halt(
                    "ArityError", f"{name}() does not accept keyword arguments"
                )
            return self.builtins[name](*args)
        bound = self.bind(name, args, kwargs)
        return self.builtins[name](**bound)

    def bind(self, name: str, args, kwargs) -> dict:
        params = self._params[name]
        if len(args) > len(params):
            self.halt(
                "ArityError",
                f"{name}() takes at most {len(params)} arguments ({len(args)} given)",
            )
        bound = dict(zip((p for p, _ in params), args))
        names = {p for p, _ in params}
        for key, value in kwargs:
            if key not in names:
                self.halt(
                    "ArityError", f"{name}() got an unexpected keyword argument {key!r}"
                )
            if key in bound:
                self.halt(
                    "ArityError", f"{name}() got multiple values for argument {key!r}"
                )
            bound[key] = value
        for pname, default in params:
            if pname not in bound:
                if default is _REQUIRED:
                    self.halt(
                        "ArityError", f"{name}() missing required argument {pname!r}"
                    )
                bound[pname] = default
        return bound

    # -- builtin implementations ------------------------------------------

    def object_set_arg(self, name: str, value) -> ObjectSet:
        if isinstance(value, ObjectSet):
            return value
        if isinstance(value, list) and all(
            isinstance(v, ObjectInstance) for v in value
        ):
            return ObjectSet(value)
        self.halt(
            "TypeError", f"{name} expects a set of objects, got {_typename(value)}"
        )

    def object_arg(self, name: str, value) -> ObjectInstance:
        if isinstance(value, ObjectInstance):
            return value
        self.halt("TypeError", f"{name} expects an object, got {_typename(value)}")

    def str_arg(self, name: str, value) -> str:
        if isinstance(value, str):
            return value
        self.halt("TypeError", f"{name} expects a string, got {_typename(value)}")

    def str_list_arg(self, name: str, value) -> list[str] | None:
        if value is None:
            return None
        if isinstance(value, list) and all(isinstance(v, str) for v in value):
            return value
        self.halt(
            "TypeError", f"{name} expects a list of strings, got {_typename(value)}"
        )

    def _b_scene(self) -> ObjectSet:
        return self.api(self.ctx.api_scene)

    def _b_filter(self, object_set, category) -> ObjectSet:
        return self.api(
            self.ctx.api_filter,
            self.object_set_arg("filter()", object_set),
            self.str_arg("filter() category", category),
        )

    def _b_relate(self, object_set, reference_object, relation) -> ObjectSet:
        return self.api(
            self.ctx.api_relate,
            self.object_set_arg("relate()", object_set),
            self.object_arg("relate() reference_object", reference_object),
            self.str_arg("relate() relation", relation),
        )

    def _b_relate_agent(self, object_set, relation) -> ObjectSet:
        return self.api(
            self.ctx.api_relate_agent,
            self.object_set_arg("relate_agent()", object_set),
            self.str_arg("relate_agent() relation", relation),
        )

    def _b_query_relation(self, object, reference_object, candidate_relations):
        return self.api(
            self.ctx.api_query_relation,
            self.object_arg("query_relation() object", object),
            self.object_arg("query_relation() reference_object", reference_object),
            self.str_list_arg("query_relation() candidate_relations", candidate_relations),
        )

    def _b_query_relation_agent(self, object, candidate_relations):
        return self.api(
            self.ctx.api_query_relation_agent,
            self.object_arg("query_relation_agent() object", object),
            self.str_list_arg(
                "query_relation_agent() candidate_relations", candidate_relations
            ),
        )

    def _b_query_attribute(self, object, attribute_type, candidate_attribute_values):
        return self.api(
            self.ctx.api_query_attribute,
            self.object_arg("query_attribute() object", object),
            self.str_arg("query_attribute() attribute_type", attribute_type),
            self.str_list_arg(
                "query_attribute() candidate_attribute_values",
                candidate_attribute_values,
            ),
        )

    def _b_query_state(self, object, candidate_states):
        return self.api(
            self.ctx.api_query_state,
            self.object_arg("query_state() object", object),
            self.str_list_arg("query_state() candidate_states", candidate_states) or [],
        )

    def _b_sort_by_distance(self, objects) -> list:
        items = list(self.object_set_arg("sort_by_distance()", objects))
        agent = self.ctx.situation.position
        return sorted(items, key=lambda o: point_distance(agent, o.centroid))

    def _b_len(self, x) -> float:
        if isinstance(x, (list, str, ObjectSet)):
            return float(len(x))
        self.halt("TypeError", f"len() needs a list, set or string, got {_typename(x)}")

    def _b_print(self, *values) -> None:
        self.write(" ".join(display(v) for v in values) + "\n")

    def _b_str(self, x) -> str:
        return display(x)

    def _b_min(self, *values):
        return self._extremum(min, "min", values)

    def _b_max(self, *values):
        return self._extremum(max, "max", values)

    def _extremum(self, picker, name: str, values):
        if len(values) == 1:
            seq = values[0]
            if not isinstance(seq, list) or not seq:
                self.halt(
                    "TypeError", f"{name}() of a single argument needs a non-empty list"
                )
            items = seq
        elif len(values) >= 2:
            items = list(values)
        else:
            self.halt("ArityError", f"{name}() needs at least one argument")
        if all(_is_number(v) for v in items):
            return float(picker(float(v) for v in items))
        if all(isinstance(v, str) for v in items):
            return picker(items)
        self.halt("TypeError", f"{name}() needs all numbers or all strings")

    def _b_sum(self, x) -> float:
        if isinstance(x, list) and all(_is_number(v) for v in x):
            return float(sum(float(v) for v in x))
        self.halt("TypeError", f"sum() needs a list of numbers, got {_typename(x)}")

    def _b_round(self, x, ndigits=None) -> float:
        if not _is_number(x):
            self.halt("TypeError", f"round() needs a number, got {_typename(x)}")
        if ndigits is None:
            return float(round(float(x)))
        return float(round(float(x), self.as_int(ndigits, "ndigits")))

    def _b_abs(self, x) -> float:
        if not _is_number(x):
            self.halt("TypeError", f"abs() needs a number, got {_typename(x)}")
        return abs(float(x))

    def _b_list(self, x) -> list:
        if isinstance(x, (list, ObjectSet)):
            return list(x)
        self.halt("TypeError", f"list() needs a list or object set, got {_typename(x)}")


def execute(
    program: Program, ctx: ApiContext, limits: ExecLimits = ExecLimits()
) -> ExecutionOutcome:
    """Run a parsed program against a scene context under the given limits."""
    interp = _Interpreter(ctx, limits)
    error: ExecError | None = None
    try:
        interp.exec_block(program.body)
    except _Halt as halt:
        error = ExecError(kind=halt.kind, message=halt.message, line=halt.line)
    except RecursionError:
        error = ExecError(
            kind="StepLimitExceeded",
            message="expression nesting too deep",
            line=interp.line,
        )
    return ExecutionOutcome(
        stdout="".join(interp.chunks),
        steps=interp.steps,
        api_calls=interp.api_calls,
        error=error,
    )
