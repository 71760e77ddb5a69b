"""A small infix language for smooth functions of ``x1..xn``.

Grammar (``^`` binds tighter than unary minus, which binds tighter than
``* /``, which bind tighter than ``+ -``; ``^`` is right-associative)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := ("-" | "+") unary | power
    power   := atom ("^" unary)?
    atom    := NUMBER | NAME | NAME "(" expr ("," expr)* ")" | "(" expr ")"

Numbers are decimal with an optional exponent (``2``, ``0.5``, ``1e-3``).
Variables are ``x1 .. xn`` unless another name list is supplied (the
nonlinearity ``F`` uses the single variable ``s``).  Functions:
``sin cos exp log tanh sqrt abs`` (one argument) and ``pow`` (two).
There is no implicit multiplication.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import jet as J

FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "log": 1, "tanh": 1, "sqrt": 1, "abs": 1, "pow": 2}


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


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


Node = Union[Const, Var, Unary, Binary, Call]


@dataclass(frozen=True)
class ParseDiagnostic:
    offset: int
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"offset {self.offset}: {self.message}"


class ParseError(ValueError):
    """Raised by :func:`parse`; carries every diagnostic that was collected."""

    def __init__(self, diagnostics: Sequence[ParseDiagnostic], source: str = ""):
        self.diagnostics = list(diagnostics)
        self.source = source
        super().__init__("; ".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class ExprAst:
    """Parsed expression plus the variable names it was parsed against."""

    root: Node
    dimension: int
    names: tuple

    def __str__(self) -> str:
        return pretty(self)


# ---------------------------------------------------------------------------
# tokenizer

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


@dataclass
class _Tok:
    kind: str  # num | name | op | end
    text: str
    offset: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos = 0
    while True:
        while pos < len(src) and src[pos].isspace():
            pos += 1
        if pos >= len(src):
            toks.append(_Tok("end", "", len(src)))
            return toks
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            raise ParseError([ParseDiagnostic(pos, f"unexpected character {src[pos]!r}")], src)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()


class _Parser:
    def __init__(self, src: str, dimension: int, names: tuple):
        self.src = src
        self.dimension = dimension
        self.names = names
        self.toks = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, offset: int, msg: str):
        raise ParseError([ParseDiagnostic(offset, msg)], self.src)

    def eat(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            if self.tok.text == ")":
                self.fail(self.tok.offset, "unbalanced parentheses: unexpected ')'")
            self.fail(self.tok.offset, f"unexpected token {self.tok.text!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            return Unary(op, self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.eat("^"):
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> Node:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Const(float(t.text))
        if t.kind == "name":
            self.i += 1
            if self.tok.kind == "op" and self.tok.text == "(":
                return self.call(t)
            return self.variable(t)
        if self.eat("("):
            node = self.expr()
            if not self.eat(")"):
                self.fail(self.tok.offset, "unbalanced parentheses: expected ')'")
            return node
        if t.kind == "end":
            self.fail(t.offset, "unexpected end of input")
        self.fail(t.offset, f"unexpected token {t.text!r}")

    def variable(self, t: _Tok) -> Node:
        if t.text in self.names:
            return Var(self.names.index(t.text) + 1)
        m = re.fullmatch(r"x(\d+)", t.text)
        if m and not self.names:
            k = int(m.group(1))
            if not 1 <= k <= self.dimension:
                self.fail(t.offset, f"variable index out of range: {t.text} (dimension {self.dimension})")
            return Var(k)
        if t.text in FUNCTIONS:
            self.fail(t.offset, f"function {t.text!r} must be called with arguments")
        self.fail(t.offset, f"unknown identifier {t.text!r}")

    def call(self, t: _Tok) -> Node:
        if t.text not in FUNCTIONS:
            self.fail(t.offset, f"unknown identifier {t.text!r}")
        open_tok = self.tok
        self.i += 1
        args = [self.expr()]
        while self.eat(","):
            args.append(self.expr())
        if not self.eat(")"):
            self.fail(self.tok.offset if self.tok.kind != "end" else open_tok.offset,
                      "unbalanced parentheses: expected ')'")
        want = FUNCTIONS[t.text]
        if len(args) != want:
            self.fail(t.offset, f"arity mismatch: {t.text} takes {want} argument(s), got {len(args)}")
        return Call(t.text, tuple(args))


def parse(source, dimension: int, names: Sequence[str] | None = None) -> ExprAst:
    """Parse ``source`` into an :class:`ExprAst`.

    Raises :class:`ParseError` (with offsets) on any malformed input; never
    raises anything else, whatever the input bytes are.
    """
    if isinstance(source, (bytes, bytearray)):
        try:
            source = bytes(source).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError([ParseDiagnostic(exc.start, "input is not valid UTF-8")]) from None
    if not isinstance(source, str):
        raise ParseError([ParseDiagnostic(0, f"expected text, got {type(source).__name__}")])
    if dimension < 1:
        raise ParseError([ParseDiagnostic(0, "dimension must be positive")], source)
    names = tuple(names or ())
    if not source.strip():
        raise ParseError([ParseDiagnostic(0, "empty expression")], source)
    try:
        root = _Parser(source, dimension, names).parse()
    except RecursionError:
        raise ParseError([ParseDiagnostic(0, "expression nested too deeply")], source) from None
    return ExprAst(root, dimension, names)


# ---------------------------------------------------------------------------
# printing

def _fmt_number(v: float) -> str:
    if math.isinf(v):
        return "1e999"
    if math.isnan(v):
        return "(1e999-1e999)"
    return repr(float(v))


def _pretty(node: Node, names: tuple) -> str:
    if isinstance(node, Const):
        return _fmt_number(node.value)
    if isinstance(node, Var):
        return names[node.index - 1] if names else f"x{node.index}"
    if isinstance(node, Unary):
        return f"({node.op}{_pretty(node.operand, names)})"
    if isinstance(node, Binary):
        return f"({_pretty(node.left, names)} {node.op} {_pretty(node.right, names)})"
    return f"{node.name}(" + ", ".join(_pretty(a, names) for a in node.args) + ")"


def pretty(ast: ExprAst) -> str:
    """Fully parenthesized text; re-parsing gives a structurally equal tree."""
    return _pretty(ast.root, ast.names)


def variables_used(node: Node) -> set:
    if isinstance(node, Var):
        return {node.index}
    if isinstance(node, Const):
        return set()
    if isinstance(node, Unary):
        return variables_used(node.operand)
    if isinstance(node, Binary):
        return variables_used(node.left) | variables_used(node.right)
    return set().union(*(variables_used(a) for a in node.args))


# ---------------------------------------------------------------------------
# evaluation on jets

def _as_columns(point, n: int) -> np.ndarray:
    """Public point layout (n,) or (N, n) -> jet layout (n,) or (n, N)."""
    p = np.asarray(point, dtype=float)
    if p.ndim == 1:
        if p.shape[0] != n:
            raise ValueError(f"point has {p.shape[0]} coordinates, expected {n}")
        return p
    if p.ndim == 2 and p.shape[1] == n:
        return np.ascontiguousarray(p.T)
    raise ValueError(f"points must have shape ({n},) or (N, {n}); got {p.shape}")


def _int_exponent(v) -> int | None:
    if isinstance(v, (int, float)) and float(v).is_integer() and abs(v) < 2**31:
        return int(v)
    return None


def _jet_call(name: str, a, order: int):
    if not isinstance(a, J.Jet):
        # constant argument: plain float math with the same domain rules
        if name in ("log",) and a <= 0:
            raise J.DomainError("log of a non-positive value")
        if name == "sqrt" and a < 0:
            raise J.DomainError("sqrt of a negative value")
        return float({"sin": math.sin, "cos": math.cos, "exp": math.exp, "log": math.log,
                      "tanh": math.tanh, "sqrt": math.sqrt, "abs": abs}[name](a))
    return {"sin": J.sin, "cos": J.cos, "exp": J.exp, "log": J.log, "tanh": J.tanh,
            "sqrt": J.sqrt, "abs": J.absolute}[name](a)


def _jet_pow(a, b):
    if not isinstance(b, J.Jet):
        k = _int_exponent(b)
        if not isinstance(a, J.Jet):
            if k is None and a < 0:
                raise J.DomainError("non-integer power of a negative constant")
            if a == 0 and b < 0:
                raise J.DomainError("division by zero")
            return float(a) ** float(b)
        if k is not None:
            if k < 0 and np.any(a.value == 0):
                raise J.DomainError("division by zero")
            return a ** k
        return J.compose_univariate(J.power_taylor(a.value, a.order, float(b)), a)
    # non-constant exponent: a^b = exp(b log a)
    if isinstance(a, J.Jet):
        return J.exp(b * J.log(a))
    if a <= 0:
        raise J.DomainError("variable power of a non-positive constant")
    return J.exp(b * math.log(a))


def _eval(node: Node, xs: list, order: int):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return xs[node.index - 1]
    if isinstance(node, Unary):
        v = _eval(node.operand, xs, order)
        return -v if node.op == "-" else v
    if isinstance(node, Binary):
        a = _eval(node.left, xs, order)
        b = _eval(node.right, xs, order)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if isinstance(b, J.Jet):
                if np.any(b.value == 0):
                    raise J.DomainError("division by zero")
            elif b == 0:
                raise J.DomainError("division by zero")
            return a / b
        return _jet_pow(a, b)
    args = [_eval(a, xs, order) for a in node.args]
    if node.name == "pow":
        return _jet_pow(args[0], args[1])
    return _jet_call(node.name, args[0], order)


def eval_jet(ast: ExprAst, point, order: int = J.DEFAULT_ORDER) -> J.Jet:
    """Jet of the expression at ``point`` ((n,) or a batch (N, n))."""
    cols = _as_columns(point, ast.dimension)
    return eval_jet_columns(ast, cols, order)


def eval_jet_columns(ast: ExprAst, cols: np.ndarray, order: int) -> J.Jet:
    xs = J.variables(cols, order)
    out = _eval(ast.root, xs, order)
    if not isinstance(out, J.Jet):
        out = J.Jet.constant(out, cols, order)
    return out


# ---------------------------------------------------------------------------
# plain numeric evaluation (independent of the jet path; used as an oracle)

_NUMPY_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log,
                "tanh": np.tanh, "sqrt": np.sqrt, "abs": np.abs}


def _eval_num(node: Node, xs):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return xs[node.index - 1]
    if isinstance(node, Unary):
        v = _eval_num(node.operand, xs)
        return -v if node.op == "-" else v
    if isinstance(node, Binary):
        a, b = _eval_num(node.left, xs), _eval_num(node.right, xs)
        return {"+": np.add, "-": np.subtract, "*": np.multiply,
                "/": np.divide, "^": np.power}[node.op](a, b)
    args = [_eval_num(a, xs) for a in node.args]
    if node.name == "pow":
        return np.power(args[0], args[1])
    return _NUMPY_FUNCS[node.name](args[0])


def evaluate(ast: ExprAst, points) -> np.ndarray:
    """Scalar values at ``points`` ((n,) or (N, n)) with ordinary float math."""
    cols = _as_columns(points, ast.dimension)
    with np.errstate(all="ignore"):
        out = _eval_num(ast.root, [np.asarray(c, dtype=float) for c in cols])
    return np.broadcast_to(np.asarray(out, dtype=float), cols.shape[1:]).copy()
