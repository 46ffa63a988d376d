"""Indentation-aware lexer and recursive-descent parser for scene programs.

The language is a closed subset of Python: assignments, for-loops over
iterables, if/else, builtin calls with keyword arguments, list literals and
comprehensions, f-strings, arithmetic/comparison/boolean operators, indexing
and slicing.  Anything else is a parse error whose message is designed to be
shown back to the model that wrote the program.
"""

from __future__ import annotations

from dataclasses import dataclass

from .nodes import (
    Assign,
    BinOp,
    Call,
    Expr,
    ExprStmt,
    For,
    FString,
    If,
    Index,
    ListComp,
    ListLit,
    Literal,
    Member,
    Name,
    Program,
    SliceExpr,
    Stmt,
    UnaryOp,
)


class ParseError(Exception):
    """Syntax problem with a 1-based location; str() is shown to the model."""

    def __init__(self, reason: str, line: int, col: int):
        super().__init__(reason)
        self.reason = reason
        self.line = line
        self.col = col

    def __str__(self) -> str:
        return f"SyntaxError: line {self.line}, column {self.col}: {self.reason}"


KEYWORDS = {"for", "in", "if", "else", "not", "and", "or", "True", "False"}
MEMBER_FIELDS = ("category", "xyz")

_TWO_CHAR_OPS = ("==", "!=", "<=", ">=")
_ONE_CHAR_OPS = "=<>+-*/()[],:.|&"


@dataclass(frozen=True)
class Token:
    type: str  # NAME KEYWORD NUMBER STRING FSTRING OP NEWLINE INDENT DEDENT EOF
    value: str
    line: int
    col: int


def _lex(source: str) -> list[Token]:
    tokens: list[Token] = []
    indents = [0]
    paren_depth = 0
    line_no = 0

    lines = source.split("\n")
    for raw in lines:
        line_no += 1
        i = 0
        if paren_depth == 0:
            # measure indentation; skip blank / comment-only lines entirely
            width = 0
            while i < len(raw) and raw[i] in " \t":
                width += 4 if raw[i] == "\t" else 1
                i += 1
            rest = raw[i:]
            if not rest or rest.startswith("#"):
                continue
            if width > indents[-1]:
                indents.append(width)
                tokens.append(Token("INDENT", "", line_no, 1))
            else:
                while width < indents[-1]:
                    indents.pop()
                    tokens.append(Token("DEDENT", "", line_no, 1))
                if width != indents[-1]:
                    raise ParseError(
                        "unindent does not match any outer indentation level",
                        line_no, 1,
                    )
        tokens_before = len(tokens)
        i, paren_depth = _lex_line(raw, i, line_no, paren_depth, tokens)
        if paren_depth == 0 and len(tokens) > tokens_before:
            tokens.append(Token("NEWLINE", "", line_no, len(raw) + 1))
    if paren_depth > 0:
        raise ParseError("unclosed bracket at end of program", line_no or 1, 1)
    while len(indents) > 1:
        indents.pop()
        tokens.append(Token("DEDENT", "", line_no + 1, 1))
    tokens.append(Token("EOF", "", line_no + 1, 1))
    return tokens


def _lex_line(
    raw: str, i: int, line_no: int, paren_depth: int, tokens: list[Token]
) -> tuple[int, int]:
    n = len(raw)
    while i < n:
        ch = raw[i]
        if ch in " \t":
            i += 1
            continue
        if ch == "#":
            break
        col = i + 1
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (raw[j].isalnum() or raw[j] == "_"):
                j += 1
            word = raw[i:j]
            if word == "f" and j < n and raw[j] in "\"'":
                i, inner = _scan_string(raw, j, line_no)
                tokens.append(Token("FSTRING", inner, line_no, col))
                continue
            kind = "KEYWORD" if word in KEYWORDS else "NAME"
            tokens.append(Token(kind, word, line_no, col))
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and raw[j].isdigit():
                j += 1
            if j < n and raw[j] == "." and j + 1 < n and raw[j + 1].isdigit():
                j += 1
                while j < n and raw[j].isdigit():
                    j += 1
            if j < n and raw[j] in "eE":
                k = j + 1
                if k < n and raw[k] in "+-":
                    k += 1
                if k < n and raw[k].isdigit():
                    j = k
                    while j < n and raw[j].isdigit():
                        j += 1
            tokens.append(Token("NUMBER", raw[i:j], line_no, col))
            i = j
            continue
        if ch in "\"'":
            i, inner = _scan_string(raw, i, line_no)
            tokens.append(Token("STRING", inner, line_no, col))
            continue
        two = raw[i:i + 2]
        if two in _TWO_CHAR_OPS:
            tokens.append(Token("OP", two, line_no, col))
            i += 2
            continue
        if ch in _ONE_CHAR_OPS:
            if ch in "([":
                paren_depth += 1
            elif ch in ")]":
                paren_depth = max(0, paren_depth - 1)
            tokens.append(Token("OP", ch, line_no, col))
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", line_no, col)
    return i, paren_depth


def _scan_string(raw: str, i: int, line_no: int) -> tuple[int, str]:
    """Scan a quoted string starting at the quote; returns (next index, raw body)."""
    quote = raw[i]
    j = i + 1
    body = []
    while j < len(raw):
        ch = raw[j]
        if ch == "\\":
            if j + 1 >= len(raw):
                raise ParseError("dangling escape in string literal", line_no, j + 1)
            body.append(raw[j:j + 2])
            j += 2
            continue
        if ch == quote:
            return j + 1, "".join(body)
        body.append(ch)
        j += 1
    raise ParseError("unterminated string literal", line_no, i + 1)


_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", '"': '"', "'": "'"}


def _unescape(body: str, line: int, col: int) -> str:
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\":
            nxt = body[i + 1]
            if nxt not in _ESCAPES:
                raise ParseError(f"unknown escape \\{nxt}", line, col)
            out.append(_ESCAPES[nxt])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # -- token helpers --------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.type != "EOF":
            self.pos += 1
        return tok

    def at(self, type_: str, value: str | None = None) -> bool:
        tok = self.peek()
        return tok.type == type_ and (value is None or tok.value == value)

    def expect(self, type_: str, value: str | None = None) -> Token:
        tok = self.peek()
        if not self.at(type_, value):
            want = value if value is not None else type_.lower()
            got = tok.value or tok.type.lower()
            raise ParseError(f"expected {want!r}, found {got!r}", tok.line, tok.col)
        return self.advance()

    # -- statements -----------------------------------------------------

    def parse_program(self) -> Program:
        body = []
        while not self.at("EOF"):
            body.append(self.parse_stmt())
        return Program(body=tuple(body))

    def parse_stmt(self) -> Stmt:
        tok = self.peek()
        if tok.type == "KEYWORD" and tok.value == "for":
            return self.parse_for()
        if tok.type == "KEYWORD" and tok.value == "if":
            return self.parse_if()
        if (
            tok.type == "NAME"
            and self.peek(1).type == "OP"
            and self.peek(1).value == "="
        ):
            self.advance()
            self.expect("OP", "=")
            value = self.parse_expr()
            self.expect("NEWLINE")
            return Assign(name=tok.value, value=value, line=tok.line)
        value = self.parse_expr()
        self.expect("NEWLINE")
        return ExprStmt(value=value, line=tok.line)

    def parse_block(self) -> tuple[Stmt, ...]:
        self.expect("OP", ":")
        self.expect("NEWLINE")
        self.expect("INDENT")
        body = []
        while not self.at("DEDENT") and not self.at("EOF"):
            body.append(self.parse_stmt())
        self.expect("DEDENT")
        return tuple(body)

    def parse_for(self) -> For:
        tok = self.expect("KEYWORD", "for")
        var = self.expect("NAME").value
        self.expect("KEYWORD", "in")
        iterable = self.parse_expr()
        body = self.parse_block()
        return For(var=var, iterable=iterable, body=body, line=tok.line)

    def parse_if(self) -> If:
        tok = self.expect("KEYWORD", "if")
        test = self.parse_expr()
        body = self.parse_block()
        orelse: tuple[Stmt, ...] = ()
        if self.at("KEYWORD", "else"):
            self.advance()
            orelse = self.parse_block()
        return If(test=test, body=body, orelse=orelse, line=tok.line)

    # -- expressions ------------------------------------------------------

    def parse_expr(self) -> Expr:
        return self.parse_or()

    def _binop_chain(self, sub, ops: tuple[str, ...], keyword: bool = False) -> Expr:
        node = sub()
        while True:
            tok = self.peek()
            matched = (
                tok.type == ("KEYWORD" if keyword else "OP") and tok.value in ops
            )
            if not matched:
                return node
            self.advance()
            node = BinOp(op=tok.value, left=node, right=sub(), line=tok.line)

    def parse_or(self) -> Expr:
        return self._binop_chain(self.parse_and, ("or",), keyword=True)

    def parse_and(self) -> Expr:
        return self._binop_chain(self.parse_not, ("and",), keyword=True)

    def parse_not(self) -> Expr:
        if self.at("KEYWORD", "not"):
            tok = self.advance()
            return UnaryOp(op="not", operand=self.parse_not(), line=tok.line)
        return self.parse_comparison()

    def parse_comparison(self) -> Expr:
        node = self.parse_union()
        while True:
            tok = self.peek()
            if tok.type == "OP" and tok.value in ("==", "!=", "<", "<=", ">", ">="):
                self.advance()
                node = BinOp(op=tok.value, left=node, right=self.parse_union(), line=tok.line)
            elif tok.type == "KEYWORD" and tok.value == "in":
                self.advance()
                node = BinOp(op="in", left=node, right=self.parse_union(), line=tok.line)
            else:
                return node

    def parse_union(self) -> Expr:
        return self._binop_chain(self.parse_intersection, ("|",))

    def parse_intersection(self) -> Expr:
        return self._binop_chain(self.parse_additive, ("&",))

    def parse_additive(self) -> Expr:
        return self._binop_chain(self.parse_multiplicative, ("+", "-"))

    def parse_multiplicative(self) -> Expr:
        return self._binop_chain(self.parse_unary, ("*", "/"))

    def parse_unary(self) -> Expr:
        if self.at("OP", "-"):
            tok = self.advance()
            return UnaryOp(op="-", operand=self.parse_unary(), line=tok.line)
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        node = self.parse_atom()
        while True:
            if self.at("OP", "."):
                dot = self.advance()
                name_tok = self.peek()
                if name_tok.type != "NAME" or name_tok.value not in MEMBER_FIELDS:
                    raise ParseError(
                        f"only {' and '.join(MEMBER_FIELDS)} may follow '.', "
                        f"found {name_tok.value or name_tok.type.lower()!r}",
                        dot.line, dot.col,
                    )
                self.advance()
                node = Member(obj=node, attr=name_tok.value, line=dot.line)
            elif self.at("OP", "["):
                node = self.parse_subscript(node)
            else:
                return node

    def parse_subscript(self, node: Expr) -> Expr:
        bracket = self.expect("OP", "[")
        lower: Expr | None = None
        if not self.at("OP", ":"):
            lower = self.parse_expr()
            if self.at("OP", "]"):
                self.advance()
                return Index(obj=node, index=lower, line=bracket.line)
        self.expect("OP", ":")
        upper: Expr | None = None
        if not self.at("OP", "]"):
            upper = self.parse_expr()
        self.expect("OP", "]")
        return SliceExpr(obj=node, lower=lower, upper=upper, line=bracket.line)

    def parse_atom(self) -> Expr:
        tok = self.peek()
        if tok.type == "NUMBER":
            self.advance()
            return Literal(value=float(tok.value), line=tok.line)
        if tok.type == "STRING":
            self.advance()
            return Literal(value=_unescape(tok.value, tok.line, tok.col), line=tok.line)
        if tok.type == "FSTRING":
            self.advance()
            return self.parse_fstring(tok)
        if tok.type == "KEYWORD" and tok.value in ("True", "False"):
            self.advance()
            return Literal(value=tok.value == "True", line=tok.line)
        if tok.type == "NAME":
            self.advance()
            if self.at("OP", "("):
                return self.parse_call(tok)
            return Name(id=tok.value, line=tok.line)
        if tok.type == "OP" and tok.value == "(":
            self.advance()
            node = self.parse_expr()
            self.expect("OP", ")")
            return node
        if tok.type == "OP" and tok.value == "[":
            return self.parse_list(tok)
        got = tok.value or tok.type.lower()
        raise ParseError(f"expected an expression, found {got!r}", tok.line, tok.col)

    def parse_call(self, name_tok: Token) -> Call:
        self.expect("OP", "(")
        args: list[Expr] = []
        kwargs: list[tuple[str, Expr]] = []
        while not self.at("OP", ")"):
            if (
                self.at("NAME")
                and self.peek(1).type == "OP"
                and self.peek(1).value == "="
            ):
                key = self.advance().value
                self.expect("OP", "=")
                kwargs.append((key, self.parse_expr()))
            else:
                if kwargs:
                    tok = self.peek()
                    raise ParseError(
                        "positional argument after keyword argument",
                        tok.line, tok.col,
                    )
                args.append(self.parse_expr())
            if not self.at("OP", ")"):
                self.expect("OP", ",")
        self.expect("OP", ")")
        return Call(
            func=name_tok.value,
            args=tuple(args),
            kwargs=tuple(kwargs),
            line=name_tok.line,
        )

    def parse_list(self, bracket: Token) -> Expr:
        self.expect("OP", "[")
        if self.at("OP", "]"):
            self.advance()
            return ListLit(items=(), line=bracket.line)
        first = self.parse_expr()
        if self.at("KEYWORD", "for"):
            self.advance()
            var = self.expect("NAME").value
            self.expect("KEYWORD", "in")
            iterable = self.parse_expr()
            cond: Expr | None = None
            if self.at("KEYWORD", "if"):
                self.advance()
                cond = self.parse_expr()
            self.expect("OP", "]")
            return ListComp(
                expr=first, var=var, iterable=iterable, cond=cond, line=bracket.line
            )
        items = [first]
        while self.at("OP", ","):
            self.advance()
            if self.at("OP", "]"):
                break
            items.append(self.parse_expr())
        self.expect("OP", "]")
        return ListLit(items=tuple(items), line=bracket.line)

    def parse_fstring(self, tok: Token) -> FString:
        parts: list[str | Expr] = []
        text: list[str] = []
        body = tok.value
        i = 0
        while i < len(body):
            ch = body[i]
            if ch == "{":
                if body[i:i + 2] == "{{":
                    text.append("{")
                    i += 2
                    continue
                end = body.find("}", i + 1)
                if end < 0:
                    raise ParseError(
                        "unterminated { in interpolated string", tok.line, tok.col
                    )
                inner = body[i + 1:end]
                if not inner.strip():
                    raise ParseError(
                        "empty expression in interpolated string", tok.line, tok.col
                    )
                if text:
                    parts.append(_unescape("".join(text), tok.line, tok.col))
                    text = []
                parts.append(_parse_embedded(inner, tok))
                i = end + 1
                continue
            if ch == "}":
                if body[i:i + 2] == "}}":
                    text.append("}")
                    i += 2
                    continue
                raise ParseError(
                    "single } in interpolated string (use }})", tok.line, tok.col
                )
            text.append(ch)
            i += 1
        if text:
            parts.append(_unescape("".join(text), tok.line, tok.col))
        return FString(parts=tuple(parts), line=tok.line)


def _parse_embedded(source: str, tok: Token) -> Expr:
    try:
        inner_tokens = []
        _lex_line(source, 0, tok.line, 1, inner_tokens)  # depth 1: ignore newlines
        inner_tokens.append(Token("EOF", "", tok.line, tok.col))
        parser = _Parser(inner_tokens)
        expr = parser.parse_expr()
        if not parser.at("EOF"):
            bad = parser.peek()
            raise ParseError(
                f"unexpected {bad.value!r} in interpolated expression",
                tok.line, tok.col,
            )
        return expr
    except ParseError as exc:
        raise ParseError(exc.reason, tok.line, tok.col) from None


def parse(source: str) -> Program:
    """Parse program text into an AST; raises ParseError with location info."""
    return _Parser(_lex(source)).parse_program()
