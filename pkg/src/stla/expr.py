"""Parser, printer, and compiler for the arithmetic expression DSL.

Grammar (whitespace-insensitive, numbers are IEEE doubles):

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative, binds above unary minus
    atom   := NUMBER | IDENT | FUNC '(' expr ')' | '(' expr ')'

Recognized functions: sin cos tan exp log sqrt abs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from . import dual

FUNCTIONS = frozenset({"sin", "cos", "tan", "exp", "log", "sqrt", "abs"})


class ExpressionError(ValueError):
    pass


class ParseError(ExpressionError):
    """Syntax error carrying the character offset where parsing failed."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


@dataclass(frozen=True)
class Literal:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expression"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expression"


Expression = Union[Literal, Var, Unary, Binary, Call]

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            at = len(text) - len(stripped)
            raise ParseError(f"unexpected character {text[at]!r}", at)
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.lastgroup == "ident":
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.idx = 0

    def peek(self):
        return self.tokens[self.idx]

    def advance(self):
        tok = self.tokens[self.idx]
        self.idx += 1
        return tok

    def expect_op(self, op: str):
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ParseError(f"expected {op!r}", pos)
        return self.advance()

    def parse(self) -> Expression:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", pos)
        return node

    def expr(self) -> Expression:
        node = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                node = Binary(text, node, self.term())
            else:
                return node

    def term(self) -> Expression:
        node = self.unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                node = Binary(text, node, self.unary())
            else:
                return node

    def unary(self) -> Expression:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Unary("-", self.unary())
        return self.power()

    def power(self) -> Expression:
        node = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            node = Binary("^", node, self.unary())
        return node

    def atom(self) -> Expression:
        kind, text, pos = self.advance()
        if kind == "num":
            return Literal(float(text))
        if kind == "ident":
            nkind, ntext, _ = self.peek()
            if nkind == "op" and ntext == "(":
                if text not in FUNCTIONS:
                    raise ParseError(f"unknown function {text!r}", pos)
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return Call(text, arg)
            return Var(text)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        shown = text or "end of input"
        raise ParseError(f"unexpected {shown!r}", pos)


def parse_expression(text: str) -> Expression:
    return _Parser(text).parse()


def variables(expr: Expression) -> frozenset[str]:
    """Set of state identifiers appearing in the tree."""
    out: set[str] = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, Unary):
            stack.append(node.operand)
        elif isinstance(node, Binary):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, Call):
            stack.append(node.arg)
    return frozenset(out)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_UNARY_PREC = 3
_ATOM_PREC = 5


def _node_prec(node: Expression) -> int:
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Unary):
        return _UNARY_PREC
    return _ATOM_PREC


def to_source(expr: Expression) -> str:
    """Render a tree so that parsing the output reproduces it exactly."""
    if isinstance(expr, Literal):
        return repr(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Call):
        return f"{expr.func}({to_source(expr.arg)})"
    if isinstance(expr, Unary):
        inner = to_source(expr.operand)
        if _node_prec(expr.operand) < _UNARY_PREC:
            inner = f"({inner})"
        return f"-{inner}"
    left = to_source(expr.left)
    right = to_source(expr.right)
    if expr.op == "^":
        # right-associative; the exponent slot admits unary minus directly
        if _node_prec(expr.left) <= _PREC["^"]:
            left = f"({left})"
        if _node_prec(expr.right) < _UNARY_PREC:
            right = f"({right})"
    else:
        if _node_prec(expr.left) < _PREC[expr.op]:
            left = f"({left})"
        if _node_prec(expr.right) <= _PREC[expr.op]:
            right = f"({right})"
    return f"{left}{expr.op}{right}"


_COMPILE_GLOBALS = {
    "__builtins__": {},
    "_sin": dual.sin,
    "_cos": dual.cos,
    "_tan": dual.tan,
    "_exp": dual.exp,
    "_log": dual.log,
    "_sqrt": dual.sqrt,
    "_abs": dual.fabs,
    "_pow": dual.pow_,
}


def _codegen(expr: Expression, names: dict[str, str]) -> str:
    if isinstance(expr, Literal):
        return repr(float(expr.value))
    if isinstance(expr, Var):
        try:
            return names[expr.name]
        except KeyError:
            raise ExpressionError(f"undeclared identifier {expr.name!r}") from None
    if isinstance(expr, Unary):
        return f"(-{_codegen(expr.operand, names)})"
    if isinstance(expr, Call):
        return f"_{expr.func}({_codegen(expr.arg, names)})"
    left = _codegen(expr.left, names)
    right = _codegen(expr.right, names)
    if expr.op == "^":
        return f"_pow({left},{right})"
    return f"({left}{expr.op}{right})"


def _compile_source(body: str, state_vars) -> object:
    args = ",".join(f"_v{i}" for i in range(len(state_vars)))
    return eval(compile(f"lambda {args}: {body}", "<expression>", "eval"), dict(_COMPILE_GLOBALS))


def compile_expression(expr: Expression, state_vars) -> object:
    """Compile to a positional callable over the state variables.

    The callable accepts floats or :class:`~stla.dual.Dual` values.
    """
    names = {name: f"_v{i}" for i, name in enumerate(state_vars)}
    return _compile_source(_codegen(expr, names), state_vars)


def compile_matrix(grid, state_vars) -> object:
    """Compile a grid of expressions to one callable returning row tuples."""
    names = {name: f"_v{i}" for i, name in enumerate(state_vars)}
    rows = []
    for row in grid:
        cells = ",".join(_codegen(cell, names) for cell in row)
        rows.append(f"({cells},)")
    return _compile_source("(" + ",".join(rows) + ",)", state_vars)


def evaluate(expr: Expression, env: dict):
    """Tree-walking evaluation; compiled callables are preferred in hot paths."""
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, Var):
        try:
            return env[expr.name]
        except KeyError:
            raise ExpressionError(f"undeclared identifier {expr.name!r}") from None
    if isinstance(expr, Unary):
        return -evaluate(expr.operand, env)
    if isinstance(expr, Call):
        fn = _COMPILE_GLOBALS["_" + expr.func]
        return fn(evaluate(expr.arg, env))
    left = evaluate(expr.left, env)
    right = evaluate(expr.right, env)
    if expr.op == "+":
        return left + right
    if expr.op == "-":
        return left - right
    if expr.op == "*":
        return left * right
    if expr.op == "/":
        return left / right
    return dual.pow_(left, right)
