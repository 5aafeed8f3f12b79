"""
Scalar expressions for alpha(t), psi(t), M(alpha), f(t), f(t,u), h(t), q(t).

Grammar, lowest to highest precedence:

    sum     := product (("+" | "-") product)*
    product := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" unary)?          (right associative)
    atom    := number | name | name "(" sum ")" | "(" sum ")"

Names are the slot's variables (t, u, alpha), the constant `pi`, and the
functions sin, cos, exp, ln, sqrt, abs.
"""

import math
import re
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Union

import numpy as np

from ..utils.exceptions import (
    DisallowedVariable,
    DomainFault,
    ExpressionSyntaxError,
    UnboundVariable,
    UnknownIdentifier,
)

VARIABLES = frozenset({"t", "u", "alpha"})
FUNCTIONS = ("sin", "cos", "exp", "ln", "sqrt", "abs")
CONSTANTS = {"pi": math.pi}

Number = Union[float, np.ndarray]


@dataclass(frozen=True)
class Const:
    value: float
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or a function name
    operand: "Node"
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"
    offset: int = field(default=0, compare=False)


Node = Union[Const, Var, Unary, Binary]

_TOKEN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize(source: str) -> List[_Token]:
    tokens = []
    position = 0
    while True:
        while position < len(source) and source[position].isspace():
            position += 1
        if position == len(source):
            break
        match = _TOKEN.match(source, position)
        if not match:
            raise ExpressionSyntaxError(
                f"Unexpected character {source[position]!r}",
                len(source[:position].encode("utf-8")),
            )
        kind = match.lastgroup
        offset = len(source[: match.start(kind)].encode("utf-8"))
        tokens.append(_Token(kind, match.group(kind), offset))
        position = match.end()
    tokens.append(_Token("end", "", len(source.encode("utf-8"))))
    return tokens


class _Parser:
    def __init__(self, source: str, allowed_vars: FrozenSet[str]):
        self._tokens = _tokenize(source)
        self._index = 0
        self._allowed = allowed_vars

    @property
    def _current(self) -> _Token:
        return self._tokens[self._index]

    def _advance(self) -> _Token:
        token = self._current
        self._index += 1
        return token

    def _expect(self, text: str):
        if self._current.text != text:
            found = self._current.text or "end of input"
            raise ExpressionSyntaxError(
                f"Expected {text!r}, found {found!r}", self._current.offset
            )
        return self._advance()

    def parse(self) -> Node:
        node = self._sum()
        if self._current.kind != "end":
            raise ExpressionSyntaxError(
                f"Unexpected {self._current.text!r}", self._current.offset
            )
        return node

    def _sum(self) -> Node:
        node = self._product()
        while self._current.text in ("+", "-"):
            token = self._advance()
            node = Binary(token.text, node, self._product(), token.offset)
        return node

    def _product(self) -> Node:
        node = self._unary()
        while self._current.text in ("*", "/"):
            token = self._advance()
            node = Binary(token.text, node, self._unary(), token.offset)
        return node

    def _unary(self) -> Node:
        if self._current.text == "-":
            token = self._advance()
            return Unary("neg", self._unary(), token.offset)
        return self._power()

    def _power(self) -> Node:
        base = self._atom()
        if self._current.text == "^":
            token = self._advance()
            # the exponent binds through unary minus: 2^-1, t^-u
            return Binary("^", base, self._unary(), token.offset)
        return base

    def _atom(self) -> Node:
        token = self._current
        if token.kind == "number":
            self._advance()
            return Const(float(token.text), token.offset)
        if token.text == "(":
            self._advance()
            node = self._sum()
            self._expect(")")
            return node
        if token.kind == "name":
            self._advance()
            if token.text in FUNCTIONS:
                self._expect("(")
                operand = self._sum()
                self._expect(")")
                return Unary(token.text, operand, token.offset)
            if token.text in CONSTANTS:
                return Const(CONSTANTS[token.text], token.offset)
            if token.text in VARIABLES:
                if token.text not in self._allowed:
                    raise DisallowedVariable(
                        f"Variable {token.text!r} is not allowed here "
                        f"(allowed: {', '.join(sorted(self._allowed)) or 'none'})",
                        token.offset,
                    )
                return Var(token.text, token.offset)
            raise UnknownIdentifier(f"Unknown identifier {token.text!r}", token.offset)
        found = token.text or "end of input"
        raise ExpressionSyntaxError(f"Unexpected {found!r}", token.offset)


def parse(source: str, allowed_vars: Iterable[str]) -> Node:
    if not source or not source.strip():
        raise ExpressionSyntaxError("Empty expression", 0)
    return _Parser(source, frozenset(allowed_vars)).parse()


def variables(node: Node) -> FrozenSet[str]:
    if isinstance(node, Var):
        return frozenset({node.name})
    if isinstance(node, Unary):
        return variables(node.operand)
    if isinstance(node, Binary):
        return variables(node.left) | variables(node.right)
    return frozenset()


def _fault(node: Node, message: str):
    raise DomainFault(message, node.offset)


def evaluate(node: Node, bindings: Dict[str, Number]) -> Number:
    """
    Evaluate `node` in double precision. Bindings may be floats or numpy
    arrays; domain faults raise DomainFault instead of producing NaN.
    """
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        if node.name not in bindings:
            raise UnboundVariable(f"Variable {node.name!r} is not bound", node.offset)
        return bindings[node.name]
    if isinstance(node, Unary):
        x = evaluate(node.operand, bindings)
        return _apply_unary(node, x)
    left = evaluate(node.left, bindings)
    right = evaluate(node.right, bindings)
    return _apply_binary(node, left, right)


def _apply_unary(node: Unary, x: Number) -> Number:
    with np.errstate(all="ignore"):
        if node.op == "neg":
            return -x
        if node.op == "sin":
            return np.sin(x)
        if node.op == "cos":
            return np.cos(x)
        if node.op == "abs":
            return np.abs(x)
        if node.op == "ln":
            if np.any(np.asarray(x) <= 0.0):
                _fault(node, "ln of a non-positive value")
            return np.log(x)
        if node.op == "sqrt":
            if np.any(np.asarray(x) < 0.0):
                _fault(node, "sqrt of a negative value")
            return np.sqrt(x)
        result = np.exp(x)
    if not np.all(np.isfinite(result)):
        _fault(node, "exp overflow")
    return result


def _apply_binary(node: Binary, left: Number, right: Number) -> Number:
    with np.errstate(all="ignore"):
        if node.op == "+":
            result = np.add(left, right)
        elif node.op == "-":
            result = np.subtract(left, right)
        elif node.op == "*":
            result = np.multiply(left, right)
        elif node.op == "/":
            if np.any(np.asarray(right) == 0.0):
                _fault(node, "division by zero")
            result = np.divide(left, right)
        else:
            base = np.asarray(left, dtype=float)
            exponent = np.asarray(right, dtype=float)
            integral = exponent == np.round(exponent)
            if np.any((base < 0.0) & ~integral):
                _fault(node, "non-integer power of a negative base")
            if np.any((base == 0.0) & (exponent <= 0.0)):
                _fault(node, "non-positive power of zero")
            result = np.power(base, exponent)
    if not np.all(np.isfinite(result)):
        _fault(node, "overflow")
    if np.ndim(result) == 0:
        return float(result)
    return result


def _const(value: float) -> Const:
    return Const(float(value))


def _is_const(node: Node, value: Optional[float] = None) -> bool:
    return isinstance(node, Const) and (value is None or node.value == value)


def _add(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b):
        return _const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Binary("+", a, b)


def _sub(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b):
        return _const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return _neg(b)
    return Binary("-", a, b)


def _neg(a: Node) -> Node:
    if _is_const(a):
        return _const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.operand
    return Unary("neg", a)


def _mul(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b):
        return _const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return _const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Binary("*", a, b)


def _div(a: Node, b: Node) -> Node:
    if _is_const(a, 0.0):
        return _const(0.0)
    if _is_const(b, 1.0):
        return a
    return Binary("/", a, b)


def _pow(a: Node, b: Node) -> Node:
    if _is_const(b, 1.0):
        return a
    if _is_const(b, 0.0):
        return _const(1.0)
    return Binary("^", a, b)


def derivative(node: Node, var: str) -> Node:
    """Symbolic derivative of `node` with respect to `var`, lightly simplified."""
    if isinstance(node, Const):
        return _const(0.0)
    if isinstance(node, Var):
        return _const(1.0 if node.name == var else 0.0)
    if isinstance(node, Unary):
        inner = node.operand
        d_inner = derivative(inner, var)
        if _is_const(d_inner, 0.0):
            return _const(0.0)
        if node.op == "neg":
            return _neg(d_inner)
        if node.op == "sin":
            outer = Unary("cos", inner)
        elif node.op == "cos":
            outer = _neg(Unary("sin", inner))
        elif node.op == "exp":
            outer = Unary("exp", inner)
        elif node.op == "ln":
            return _div(d_inner, inner)
        elif node.op == "sqrt":
            return _div(d_inner, _mul(_const(2.0), Unary("sqrt", inner)))
        else:
            outer = _div(inner, Unary("abs", inner))
        return _mul(outer, d_inner)

    left, right = node.left, node.right
    d_left = derivative(left, var)
    d_right = derivative(right, var)
    if node.op == "+":
        return _add(d_left, d_right)
    if node.op == "-":
        return _sub(d_left, d_right)
    if node.op == "*":
        return _add(_mul(d_left, right), _mul(left, d_right))
    if node.op == "/":
        numerator = _sub(_mul(d_left, right), _mul(left, d_right))
        return _div(numerator, _pow(right, _const(2.0)))
    # power
    if var not in variables(right):
        exponent = _sub(right, _const(1.0))
        return _mul(_mul(right, _pow(left, exponent)), d_left)
    if var not in variables(left):
        return _mul(_mul(node, Unary("ln", left)), d_right)
    return _mul(
        node,
        _add(_mul(d_right, Unary("ln", left)), _div(_mul(right, d_left), left)),
    )


def to_source(node: Node) -> str:
    """Fully parenthesised source text that parses back to the same tree."""
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{to_source(node.operand)})"
        return f"{node.op}({to_source(node.operand)})"
    return f"({to_source(node.left)} {node.op} {to_source(node.right)})"


class Expression:
    """A parsed expression bound to the variables its slot allows."""

    def __init__(self, source: str, allowed_vars: Iterable[str]):
        self._source = source
        self._allowed = frozenset(allowed_vars)
        self._ast = parse(source, self._allowed)

    @classmethod
    def from_ast(cls, ast: Node, allowed_vars: Iterable[str]) -> "Expression":
        expression = cls.__new__(cls)
        expression._ast = ast
        expression._allowed = frozenset(allowed_vars)
        expression._source = to_source(ast)
        return expression

    @property
    def ast(self) -> Node:
        return self._ast

    @property
    def source(self) -> str:
        return self._source

    def __call__(self, **bindings: Number) -> Number:
        value = evaluate(self._ast, bindings)
        shape = np.broadcast(*[np.asarray(v) for v in bindings.values()]).shape if bindings else ()
        if shape and np.ndim(value) == 0:
            return np.full(shape, float(value))
        return value

    def derivative(self, var: str) -> "Expression":
        return Expression.from_ast(derivative(self._ast, var), self._allowed)

    def is_constant(self) -> bool:
        return not variables(self._ast)

    def __repr__(self):
        return f"Expression({self._source!r})"
