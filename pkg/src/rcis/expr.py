"""A small arithmetic expression language for user-defined dynamics.

Grammar (usual precedence, ``^`` binds tighter than unary minus and is
right-associative)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("-" | "+") unary | power
    power  := atom (("^" | "**") unary)?
    atom   := NUMBER | NAME | NAME "(" expr ("," expr)* ")" | "(" expr ")"

Names are the variables ``x1..xn``, ``u1..um``, ``w1..wn``, the constants
``pi`` and ``e``, and any caller-supplied parameters. Evaluation works on
numpy arrays and on :class:`~rcis.interval.Interval` values alike.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from rcis import interval as iv


class ExpressionError(ValueError):
    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


FUNCTIONS: dict = {
    "sin": (iv.sin, 1),
    "cos": (iv.cos, 1),
    "exp": (iv.exp, 1),
    "tanh": (iv.tanh, 1),
    "abs": (iv.fabs, 1),
    "sqrt": (iv.sqrt, 1),
    "min": (iv.minimum, 2),
    "max": (iv.maximum, 2),
}

CONSTANTS = {"pi": math.pi, "e": math.e}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>\*\*|[-+*/^(),]))"
)
_VARIABLE = re.compile(r"([xuw])([1-9][0-9]*)$")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # "x", "u" or "w"
    index: int  # zero-based


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Node = Union[Num, Var, Param, Unary, Binary, Call]


class _Parser:
    def __init__(self, text: str, line: int, parameters: Sequence[str], dims: Optional[Mapping[str, int]]):
        self.dims = dims
        self.text = text
        self.line = line
        self.parameters = set(parameters)
        self.tokens = self._tokenize()
        self.pos = 0

    def _tokenize(self):
        tokens = []
        i = 0
        text = self.text
        while i < len(text):
            if text[i:].strip() == "":
                break
            m = _TOKEN.match(text, i)
            if m is None or m.end() == i:
                col = i + 1 + (len(text[i:]) - len(text[i:].lstrip()))
                raise ExpressionError(f"unexpected character {text[col - 1]!r}", self.line, col)
            kind = m.lastgroup
            tokens.append((kind, m.group(kind), m.start(kind) + 1))
            i = m.end()
        tokens.append(("end", "", len(text) + 1))
        return tokens

    def peek(self):
        return self.tokens[self.pos]

    def take(self, value: Optional[str] = None):
        tok = self.tokens[self.pos]
        if value is not None and tok[1] != value:
            found = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ExpressionError(f"expected {value!r}, found {found}", self.line, tok[2])
        self.pos += 1
        return tok

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExpressionError(f"unexpected {tok[1]!r}", self.line, tok[2])
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[1] in ("-", "+"):
            op = self.take()[1]
            operand = self.unary()
            return operand if op == "+" else Unary("-", operand)
        return self.power()

    def power(self) -> Node:
        node = self.atom()
        if self.peek()[1] in ("^", "**"):
            self.take()
            node = Binary("^", node, self.unary())
        return node

    def atom(self) -> Node:
        kind, value, col = self.take()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if self.peek()[1] == "(":
                return self.call(value, col)
            return self.name(value, col)
        if value == "(":
            node = self.expr()
            self.take(")")
            return node
        found = "end of input" if kind == "end" else repr(value)
        raise ExpressionError(f"unexpected {found}", self.line, col)

    def call(self, name: str, col: int) -> Node:
        if name not in FUNCTIONS:
            raise ExpressionError(f"unknown function {name!r}", self.line, col)
        self.take("(")
        args = [self.expr()]
        while self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.take(")")
        arity = FUNCTIONS[name][1]
        if len(args) != arity:
            raise ExpressionError(f"{name}() takes {arity} argument(s), got {len(args)}", self.line, col)
        return Call(name, tuple(args))

    def name(self, name: str, col: int) -> Node:
        m = _VARIABLE.match(name)
        if m:
            kind, index = m.group(1), int(m.group(2))
            if self.dims is not None and index > self.dims.get(kind, 0):
                limit = self.dims.get(kind, 0)
                raise ExpressionError(
                    f"variable {name!r} out of range: {kind} has dimension {limit}", self.line, col
                )
            return Var(kind, index - 1)
        if name in self.parameters:
            return Param(name)
        if name in CONSTANTS:
            return Num(CONSTANTS[name])
        if name in FUNCTIONS:
            raise ExpressionError(f"function {name!r} used without arguments", self.line, col)
        raise ExpressionError(f"unknown identifier {name!r}", self.line, col)


def parse(
    text: str,
    line: int = 1,
    parameters: Sequence[str] = (),
    dims: Optional[Mapping[str, int]] = None,
) -> Node:
    """Parse one expression.

    ``line`` only labels error positions. When ``dims`` maps ``"x"``, ``"u"``
    and ``"w"`` to dimensions, out-of-range variables are rejected.
    """
    return _Parser(text, line, parameters, dims).parse()


def variables(node: Node) -> set:
    """All ``(kind, index)`` pairs referenced by ``node``."""
    if isinstance(node, Var):
        return {(node.kind, node.index)}
    if isinstance(node, Unary):
        return variables(node.operand)
    if isinstance(node, Binary):
        return variables(node.left) | variables(node.right)
    if isinstance(node, Call):
        out = set()
        for a in node.args:
            out |= variables(a)
        return out
    return set()


def evaluate(node: Node, env: Mapping[str, Sequence], parameters: Mapping[str, float] = None):
    """Evaluate ``node`` with ``env = {"x": [...], "u": [...], "w": [...]}``."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.kind][node.index]
    if isinstance(node, Param):
        return parameters[node.name]
    if isinstance(node, Unary):
        return -evaluate(node.operand, env, parameters)
    if isinstance(node, Binary):
        a = evaluate(node.left, env, parameters)
        b = evaluate(node.right, env, parameters)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if isinstance(a, iv.Interval) or isinstance(b, iv.Interval):
                return a / b
            return np.true_divide(a, b)
        if isinstance(a, iv.Interval) or isinstance(b, iv.Interval):
            return iv.as_interval(a) ** b
        return _float_power(a, b)
    if isinstance(node, Call):
        fn = FUNCTIONS[node.name][0]
        return fn(*(evaluate(a, env, parameters) for a in node.args))
    raise TypeError(f"not an expression node: {node!r}")


def _float_power(a, b):
    return np.power(np.asarray(a, dtype=float), b)


def to_text(node: Node) -> str:
    """Fully parenthesised source text; parses back to an equal tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return f"{node.kind}{node.index + 1}"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Unary):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, Binary):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    return f"{node.name}({', '.join(to_text(a) for a in node.args)})"


def compile_field(nodes: Sequence[Node], parameters: Mapping[str, float] = None) -> Callable:
    """Turn per-coordinate trees into a column-wise vector field ``f(x, u, w)``."""
    params = dict(parameters or {})

    def field(x, u, w):
        env = {"x": x, "u": u, "w": w}
        return [evaluate(node, env, params) for node in nodes]

    return field
