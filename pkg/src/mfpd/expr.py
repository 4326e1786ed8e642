"""Potential expressions in x and y: a recursive-descent parser, printer and evaluator.

Grammar (lowest to highest precedence; ^ is right associative and binds
tighter than unary minus, so -x^2 = -(x^2)):

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := number | 'x' | 'y' | '(' expr ')' | func '(' expr ')'
    func   := exp | log | sin | cos | sqrt
"""
import math
import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

FUNCTIONS = {"exp": np.exp, "log": np.log, "sin": np.sin, "cos": np.cos, "sqrt": np.sqrt}
_BINARY = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide, "^": np.power}


class ExprSyntaxError(ValueError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


@dataclass(frozen=True)
class Num:
    value: float

    def __post_init__(self):
        v = float(self.value)
        if not (math.isfinite(v) and v >= 0):
            raise ValueError("numeric literals are finite and nonnegative; use Neg for signs")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if self.name not in ("x", "y"):
            raise ValueError(f"unknown variable {self.name!r}")


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"

    def __post_init__(self):
        if self.op not in _BINARY:
            raise ValueError(f"unknown operator {self.op!r}")


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"

    def __post_init__(self):
        if self.func not in FUNCTIONS:
            raise ValueError(f"unknown function {self.func!r}")


Node = Union[Num, Var, Neg, BinOp, Call]

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))")


def tokenize(text):
    """List of (kind, value, position); kind is 'num', 'name', 'op' or 'end'."""
    out, pos = [], 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos == len(text):
            out.append(("end", None, pos))
            return out
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()


class _Parser:
    def __init__(self, text):
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.take()
        if val != value:
            raise ExprSyntaxError(f"expected {value!r}, found {val if kind != 'end' else 'end of input'!r}", pos)

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            node = BinOp(self.take()[1], node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            node = BinOp(self.take()[1], node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val in ("x", "y"):
                return Var(val)
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            raise ExprSyntaxError(f"unknown name {val!r}", pos)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {val if kind != 'end' else 'end of input'!r}", pos)


def parse(text):
    p = _Parser(text)
    node = p.expr()
    kind, val, pos = p.peek()
    if kind != "end":
        raise ExprSyntaxError(f"unexpected {val!r}", pos)
    return node


def to_text(node):
    """Canonical text; parse(to_text(n)) == n for every tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.arg)})"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    return f"({to_text(node.left)} {node.op} {to_text(node.right)})"


def evaluate(node, x, y):
    if isinstance(node, Num):
        return np.full(np.broadcast(x, y).shape, node.value)
    if isinstance(node, Var):
        return np.broadcast_to(x if node.name == "x" else y, np.broadcast(x, y).shape).astype(float)
    if isinstance(node, Neg):
        return -evaluate(node.arg, x, y)
    if isinstance(node, Call):
        return FUNCTIONS[node.func](evaluate(node.arg, x, y))
    return _BINARY[node.op](evaluate(node.left, x, y), evaluate(node.right, x, y))


def count_calls(node):
    if isinstance(node, Call):
        return 1 + count_calls(node.arg)
    if isinstance(node, Neg):
        return count_calls(node.arg)
    if isinstance(node, BinOp):
        return count_calls(node.left) + count_calls(node.right)
    return 0


@dataclass(frozen=True)
class Expression:
    """A parsed potential, callable as f(x, y) on arrays; picklable by its text."""

    text: str
    tree: Node = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "tree", parse(self.text))

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        with np.errstate(all="ignore"):
            return evaluate(self.tree, x, y)

    def __reduce__(self):
        return (Expression, (self.text,))
