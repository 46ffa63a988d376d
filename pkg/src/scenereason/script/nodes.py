"""AST node types for the scene query language, plus the canonical unparser.

Line numbers are carried for error reporting but excluded from equality so
that parse(unparse(ast)) compares structurally equal to the original.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union


@dataclass(frozen=True)
class Literal:
    value: Union[float, bool, str]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Name:
    id: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Member:
    obj: "Expr"
    attr: str  # "category" or "xyz" only
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...] = ()
    kwargs: tuple[tuple[str, "Expr"], ...] = ()
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ListLit:
    items: tuple["Expr", ...] = ()
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ListComp:
    expr: "Expr"
    var: str
    iterable: "Expr"
    cond: "Expr | None" = None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class FString:
    # parts alternate freely between literal str segments and embedded exprs
    parts: tuple[Union[str, "Expr"], ...] = ()
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # or and in == != < <= > >= | & + - * /
    left: "Expr"
    right: "Expr"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class UnaryOp:
    op: str  # "not" or "-"
    operand: "Expr"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Index:
    obj: "Expr"
    index: "Expr"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SliceExpr:
    obj: "Expr"
    lower: "Expr | None"
    upper: "Expr | None"
    line: int = field(default=0, compare=False)


Expr = Union[
    Literal, Name, Member, Call, ListLit, ListComp, FString, BinOp, UnaryOp,
    Index, SliceExpr,
]


@dataclass(frozen=True)
class Assign:
    name: str
    value: Expr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class For:
    var: str
    iterable: Expr
    body: tuple["Stmt", ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class If:
    test: Expr
    body: tuple["Stmt", ...]
    orelse: tuple["Stmt", ...] = ()
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ExprStmt:
    value: Expr
    line: int = field(default=0, compare=False)


Stmt = Union[Assign, For, If, ExprStmt]


@dataclass(frozen=True)
class Program:
    body: tuple[Stmt, ...] = ()


# -- canonical source emission ------------------------------------------------

_PREC = {
    "or": 1,
    "and": 2,
    # "not" sits at 3
    "in": 4, "==": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
    "|": 5,
    "&": 6,
    "+": 7, "-": 7,
    "*": 8, "/": 8,
}
_UNARY_PREC = {"not": 3, "-": 9}
_POSTFIX_PREC = 10
_ATOM_PREC = 11


def _escape_str(text: str) -> str:
    out = []
    for ch in text:
        if ch == "\\":
            out.append("\\\\")
        elif ch == '"':
            out.append('\\"')
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\r":
            out.append("\\r")
        else:
            out.append(ch)
    return "".join(out)


def _format_number(value: float) -> str:
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _emit_expr(node: Expr, parent_prec: int = 0) -> str:
    if isinstance(node, Literal):
        v = node.value
        if isinstance(v, bool):
            return "True" if v else "False"
        if isinstance(v, str):
            return f'"{_escape_str(v)}"'
        return _format_number(v)
    if isinstance(node, Name):
        return node.id
    if isinstance(node, Member):
        return f"{_emit_expr(node.obj, _POSTFIX_PREC)}.{node.attr}"
    if isinstance(node, Call):
        parts = [_emit_expr(a) for a in node.args]
        parts += [f"{k}={_emit_expr(v)}" for k, v in node.kwargs]
        return f"{node.func}({', '.join(parts)})"
    if isinstance(node, ListLit):
        return "[" + ", ".join(_emit_expr(i) for i in node.items) + "]"
    if isinstance(node, ListComp):
        src = f"[{_emit_expr(node.expr)} for {node.var} in {_emit_expr(node.iterable)}"
        if node.cond is not None:
            src += f" if {_emit_expr(node.cond)}"
        return src + "]"
    if isinstance(node, FString):
        out = ['f"']
        for part in node.parts:
            if isinstance(part, str):
                out.append(_escape_str(part).replace("{", "{{").replace("}", "}}"))
            else:
                out.append("{" + _emit_expr(part) + "}")
        out.append('"')
        return "".join(out)
    if isinstance(node, BinOp):
        prec = _PREC[node.op]
        src = (
            f"{_emit_expr(node.left, prec)} {node.op} "
            f"{_emit_expr(node.right, prec + 1)}"
        )
        return f"({src})" if prec < parent_prec else src
    if isinstance(node, UnaryOp):
        prec = _UNARY_PREC[node.op]
        sep = " " if node.op == "not" else ""
        src = f"{node.op}{sep}{_emit_expr(node.operand, prec)}"
        return f"({src})" if prec < parent_prec else src
    if isinstance(node, Index):
        return f"{_emit_expr(node.obj, _POSTFIX_PREC)}[{_emit_expr(node.index)}]"
    if isinstance(node, SliceExpr):
        lo = _emit_expr(node.lower) if node.lower is not None else ""
        hi = _emit_expr(node.upper) if node.upper is not None else ""
        return f"{_emit_expr(node.obj, _POSTFIX_PREC)}[{lo}:{hi}]"
    raise TypeError(f"not an expression node: {node!r}")


def _emit_stmt(stmt: Stmt, depth: int, lines: list[str]) -> None:
    pad = "    " * depth
    if isinstance(stmt, Assign):
        lines.append(f"{pad}{stmt.name} = {_emit_expr(stmt.value)}")
    elif isinstance(stmt, For):
        lines.append(f"{pad}for {stmt.var} in {_emit_expr(stmt.iterable)}:")
        for inner in stmt.body:
            _emit_stmt(inner, depth + 1, lines)
    elif isinstance(stmt, If):
        lines.append(f"{pad}if {_emit_expr(stmt.test)}:")
        for inner in stmt.body:
            _emit_stmt(inner, depth + 1, lines)
        if stmt.orelse:
            lines.append(f"{pad}else:")
            for inner in stmt.orelse:
                _emit_stmt(inner, depth + 1, lines)
    elif isinstance(stmt, ExprStmt):
        lines.append(f"{pad}{_emit_expr(stmt.value)}")
    else:
        raise TypeError(f"not a statement node: {stmt!r}")


def unparse(program: Program) -> str:
    """Canonical source for an AST; parse(unparse(p)) == p structurally."""
    lines: list[str] = []
    for stmt in program.body:
        _emit_stmt(stmt, 0, lines)
    return "\n".join(lines) + ("\n" if lines else "")
