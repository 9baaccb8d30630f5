"""Arithmetic expression DSL and textual system definitions.

A system document is a small YAML (or JSON) mapping::

    name: burgers
    n: 1
    A: [["u1"]]
    B: ["0"]
    delta: 0.5

Expressions are infix arithmetic over state variables ``u1 ... un`` with
``+ - * / ^``, parentheses and the functions ``sin cos exp tanh sqrt abs``.
Unary minus binds tighter than ``^``, so ``-u1^2`` means ``(-u1)^2``.
Exponents must be constants.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import yaml

from .errors import DefinitionError, DSLSyntaxError, NonFiniteError

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "tanh": np.tanh,
    "sqrt": np.sqrt,
    "abs": np.abs,
}

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)
_STATE_VAR_RE = re.compile(r"u(\d+)$")


# ----------------------------------------------------------------------------
# expression tree
# ----------------------------------------------------------------------------

class Node:
    """Base class of expression tree nodes."""

    __slots__ = ()

    def children(self):
        return ()


@dataclass(frozen=True)
class Const(Node):
    value: float

    def __str__(self):
        return repr(float(self.value))


@dataclass(frozen=True)
class Var(Node):
    index: int  # 0-based position in the variable vector
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg(Node):
    operand: Node

    def children(self):
        return (self.operand,)

    def __str__(self):
        return f"(-{self.operand})"


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node

    def children(self):
        return (self.left, self.right)

    def __str__(self):
        return f"({self.left}{self.op}{self.right})"


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: float

    def children(self):
        return (self.base,)

    def __str__(self):
        return f"({self.base}^({float(self.exponent)!r}))"


@dataclass(frozen=True)
class Call(Node):
    func: str
    arg: Node

    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"{self.func}({self.arg})"


def _walk(node):
    yield node
    for child in node.children():
        yield from _walk(child)


def _eval(node, env):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return env[node.index]
    if isinstance(node, Neg):
        out = -_eval(node.operand, env)
    elif isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            out = a + b
        elif node.op == "-":
            out = a - b
        elif node.op == "*":
            out = a * b
        else:
            out = np.divide(a, b)
    elif isinstance(node, Pow):
        base = _eval(node.base, env)
        # a non-integer power of a negative base gives nan and is reported
        out = np.power(np.asarray(base, dtype=float), node.exponent)
    elif isinstance(node, Call):
        out = FUNCTIONS[node.func](_eval(node.arg, env))
    else:  # pragma: no cover
        raise TypeError(f"unknown node {node!r}")
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(str(node))
    return out


@dataclass(frozen=True)
class Expression:
    """Parsed expression; immutable and safe to share between threads."""

    root: Node
    source: str = field(default="", compare=False)
    names: tuple = field(default=(), compare=False)

    def __str__(self):
        return str(self.root)

    @property
    def variables(self):
        return frozenset(n.index for n in _walk(self.root) if isinstance(n, Var))

    @property
    def is_constant(self):
        return not self.variables

    def evaluate(self, u):
        """Evaluate at ``u`` (shape ``(n,)`` or ``(n, *batch)``)."""
        return evaluate_expression(self, u)


def evaluate_expression(e: Expression, u) -> float | np.ndarray:
    """Evaluate ``e`` at the state ``u``.

    Scalar states give a Python float. A stacked state of shape
    ``(n, *batch)`` gives an array of shape ``batch``. Any inf/nan raises
    :class:`NonFiniteError` naming the smallest failing subexpression.
    """
    u = np.asarray(u, dtype=float)
    with np.errstate(all="ignore"):
        try:
            out = _eval(e.root, u)
        except NonFiniteError as exc:
            raise NonFiniteError(exc.subexpression, state=u if u.ndim == 1 else None) from None
    if u.ndim <= 1:
        return float(out)
    return np.broadcast_to(np.asarray(out, dtype=float), u.shape[1:]).copy()


# ----------------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------------

def _tokenize(text):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].isspace():
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise DSLSyntaxError(f"unexpected character {text[start]!r}", text, start)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    """Recursive descent; precedence (low to high): +- , */ , ^ , unary -."""

    def __init__(self, text, variables):
        self.text = text
        self.variables = variables
        self.tokens = _tokenize(text)
        self.k = 0

    def peek(self):
        return self.tokens[self.k]

    def take(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect(self, value):
        tok = self.take()
        if tok[1] != value:
            found = tok[1] or "end of input"
            raise DSLSyntaxError(f"expected {value!r}, found {found!r}", self.text, tok[2])
        return tok

    def parse(self):
        node = self.sum()
        tok = self.peek()
        if tok[0] != "end":
            raise DSLSyntaxError(f"unexpected token {tok[1]!r}", self.text, tok[2])
        return node

    def sum(self):
        node = self.product()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.product())
        return node

    def product(self):
        node = self.power()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.power())
        return node

    def power(self):
        base = self.unary()
        if self.peek()[1] == "^":
            tok = self.take()
            exponent = self.power()  # right associative
            if any(isinstance(n, Var) for n in _walk(exponent)):
                raise DSLSyntaxError("exponent must be a constant", self.text, tok[2] + 1)
            with np.errstate(all="ignore"):
                try:
                    value = float(_eval(exponent, ()))
                except NonFiniteError:
                    raise DSLSyntaxError("exponent is not finite", self.text, tok[2] + 1) from None
            return Pow(base, value)
        return base

    def unary(self):
        tok = self.peek()
        if tok[1] == "-":
            self.take()
            return Neg(self.unary())
        if tok[1] == "+":
            self.take()
            return self.unary()
        return self.primary()

    def primary(self):
        kind, value, pos = self.take()
        if kind == "num":
            return Const(float(value))
        if kind == "name":
            if self.peek()[1] == "(":
                if value not in FUNCTIONS:
                    raise DSLSyntaxError(f"unknown function {value!r}", self.text, pos)
                self.take()
                arg = self.sum()
                self.expect(")")
                return Call(value, arg)
            if value in self.variables:
                return Var(self.variables[value], value)
            m = _STATE_VAR_RE.match(value)
            if m and (any(_STATE_VAR_RE.match(k) for k in self.variables) or not self.variables):
                n = sum(1 for k in self.variables if _STATE_VAR_RE.match(k))
                raise DSLSyntaxError(
                    f"variable {value!r} out of range for n={n}", self.text, pos)
            if value in FUNCTIONS:
                raise DSLSyntaxError(f"function {value!r} needs an argument", self.text, pos)
            raise DSLSyntaxError(f"unknown identifier {value!r}", self.text, pos)
        if value == "(":
            node = self.sum()
            self.expect(")")
            return node
        found = value or "end of input"
        raise DSLSyntaxError(f"unexpected {found!r}", self.text, pos)


def state_variables(n: int) -> dict:
    return {f"u{k + 1}": k for k in range(n)}


def parse_expression(text, variables: Mapping[str, int] | int = 1) -> Expression:
    """Parse ``text``; ``variables`` is a name->index map or a state dimension."""
    if isinstance(variables, int):
        variables = state_variables(variables)
    text = str(text)
    root = _Parser(text, dict(variables)).parse()
    names = tuple(sorted(variables, key=variables.get))
    return Expression(root, text, names)


# ----------------------------------------------------------------------------
# systems
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemDefinition:
    """The system u_t + A(u) u_x = B(u) with expression-valued entries."""

    name: str
    n: int
    A: tuple  # n rows of n Expressions
    B: tuple  # n Expressions
    delta: float = 0.5

    def __post_init__(self):
        if self.n < 1:
            raise DefinitionError("n must be >= 1")
        if len(self.A) != self.n or any(len(row) != self.n for row in self.A):
            raise DefinitionError(f"A must be {self.n}x{self.n}")
        if len(self.B) != self.n:
            raise DefinitionError(f"B must have {self.n} entries")
        if not self.delta > 0:
            raise DefinitionError("delta must be positive")

    def matrix(self, u) -> np.ndarray:
        """A(u); shape ``(n, n)`` or ``(*batch, n, n)`` for stacked states."""
        u = np.asarray(u, dtype=float)
        batch = u.shape[1:]
        out = np.empty(batch + (self.n, self.n))
        for i, row in enumerate(self.A):
            for j, e in enumerate(row):
                out[..., i, j] = evaluate_expression(e, u)
        return out

    def source(self, u) -> np.ndarray:
        """B(u); shape ``(n,)`` or ``(n, *batch)``."""
        u = np.asarray(u, dtype=float)
        out = np.empty((self.n,) + u.shape[1:])
        for i, e in enumerate(self.B):
            out[i] = evaluate_expression(e, u)
        return out

    @property
    def homogeneous(self) -> bool:
        """True when every entry of B is the literal constant 0."""
        return all(e.is_constant and evaluate_expression(e, np.zeros(self.n)) == 0.0
                   for e in self.B)

    def to_document(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "A": [[e.source or str(e) for e in row] for row in self.A],
            "B": [e.source or str(e) for e in self.B],
            "delta": self.delta,
        }


def build_system(name, n, A, B, delta=0.5) -> SystemDefinition:
    """Build a system from nested lists of expression strings."""
    n = int(n)
    rows = list(A)
    if rows and not isinstance(rows[0], (list, tuple)):
        if len(rows) != n * n:
            raise DefinitionError(
                f"dimension mismatch: n={n} but A has {len(rows)} entries")
        rows = [rows[k * n:(k + 1) * n] for k in range(n)]
    if len(rows) != n or any(len(r) != n for r in rows):
        shape = f"{len(rows)}x{max((len(r) for r in rows), default=0)}"
        raise DefinitionError(f"dimension mismatch: n={n} but A is {shape}")
    B = list(B)
    if len(B) != n:
        raise DefinitionError(f"dimension mismatch: n={n} but B has {len(B)} entries")
    variables = state_variables(n)
    A_expr = tuple(tuple(parse_expression(str(e), variables) for e in r) for r in rows)
    B_expr = tuple(parse_expression(str(e), variables) for e in B)
    return SystemDefinition(str(name), n, A_expr, B_expr, float(delta))


def _ball_samples(n, radius, count=64):
    from scipy.stats import qmc

    pts = qmc.Halton(d=n, scramble=False).random(count + 1)[1:]
    pts = (2.0 * pts - 1.0) * radius
    pts = pts[np.linalg.norm(pts, axis=1) <= radius]
    return np.vstack([np.zeros(n), pts])


def parse_system_definition(text: str) -> SystemDefinition:
    """Parse a system document (YAML or JSON text)."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise DefinitionError(f"cannot read system document: {exc}") from None
    if not isinstance(doc, dict):
        raise DefinitionError("system document must be a mapping")
    missing = {"n", "A", "B"} - set(doc)
    if missing:
        raise DefinitionError(f"missing keys: {sorted(missing)}")
    unknown = set(doc) - {"name", "n", "A", "B", "delta"}
    if unknown:
        raise DefinitionError(f"unknown keys: {sorted(unknown)}")
    n = doc["n"]
    if not isinstance(n, int) or n < 1:
        raise DefinitionError("n must be a positive integer")
    system = build_system(doc.get("name", "unnamed"), n, doc["A"], doc["B"],
                          doc.get("delta", 0.5))
    samples = _ball_samples(n, system.delta).T
    try:
        system.matrix(samples)
        system.source(samples)
    except NonFiniteError as exc:
        raise DefinitionError(
            f"expression not finite inside |u| <= {system.delta}: {exc}") from None
    return system


__all__ = [
    "Expression", "SystemDefinition", "parse_expression", "evaluate_expression",
    "parse_system_definition", "build_system", "state_variables", "FUNCTIONS",
    "Const", "Var", "Neg", "BinOp", "Pow", "Call",
]
