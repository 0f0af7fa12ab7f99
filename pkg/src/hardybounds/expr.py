"""Density expression language: parsing, evaluation, printing, compilation.

Weight densities are given as strings in a small arithmetic language over the
free variable ``x``, numeric literals, named parameters, the constants ``pi``
and ``e``, the operators ``+ - * / ^`` and the functions ``exp``, ``log``,
``sqrt``, ``abs`` and ``pow``.  Precedence, strongest first: function call,
``^`` (right associative), unary minus, ``*``/``/``, ``+``/``-``.

Expressions are immutable trees; every operation here is reentrant.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

__all__ = [
    "DensityExpr",
    "ParseError",
    "DomainError",
    "UnboundParameterError",
    "parse",
    "evaluate",
    "to_string",
    "free_parameters",
    "CompiledDensity",
    "compile_density",
    "compose_power",
]


class ParseError(ValueError):
    """Syntax or name error in an expression string.

    Carries ``offset`` (byte position in the source) and, for syntax errors,
    the set of token kinds that would have been accepted there.
    """

    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        detail = f"{message} at offset {offset}"
        if expected:
            detail += " (expected " + " or ".join(sorted(expected)) + ")"
        super().__init__(detail)
        self.offset = offset
        self.expected = tuple(sorted(expected))


class DomainError(ValueError):
    """Evaluation left the real domain (log of a non-positive value, division
    by zero, fractional power of a negative base, ...)."""

    def __init__(self, message: str, x: float | None = None):
        if x is not None:
            message = f"{message} (at x={x!r})"
        super().__init__(message)
        self.x = x


class UnboundParameterError(KeyError):
    """A named parameter had no binding at evaluation/compilation time."""


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    """The integration variable ``x``."""


@dataclass(frozen=True)
class Const:
    name: str  # "pi" or "e"


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple["Node", ...]


Node = Union[Num, Var, Const, Param, Neg, BinOp, Call]

_CONSTANTS = {"pi": math.pi, "e": math.e}
_FUNCTIONS = {"exp": 1, "log": 1, "sqrt": 1, "abs": 1, "pow": 2}


@dataclass(frozen=True)
class DensityExpr:
    """A parsed expression together with its source text."""

    ast: Node
    source: str

    def __str__(self) -> str:
        return to_string(self)


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", pos)
        pos = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        text = m.group()
        tokens.append((kind if kind != "op" else text, text, m.start()))
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str) -> tuple[str, str, int]:
        tok = self.peek()
        if tok[0] != kind:
            raise ParseError(
                f"unexpected token {tok[1]!r}" if tok[0] != "end" else "unexpected end of input",
                tok[2],
                (kind,),
            )
        return self.take()

    # expr := term (("+"|"-") term)*
    def expr(self) -> Node:
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            node = BinOp(op, node, self.term())
        return node

    # term := factor (("*"|"/") factor)*
    def term(self) -> Node:
        node = self.factor()
        while self.peek()[0] in ("*", "/"):
            op = self.take()[0]
            node = BinOp(op, node, self.factor())
        return node

    # factor := "-" factor | power      (unary minus binds below ^)
    def factor(self) -> Node:
        if self.peek()[0] == "-":
            self.take()
            return Neg(self.factor())
        return self.power()

    # power := atom ("^" factor)?      (right associative, so x^2^3 = x^(2^3))
    def power(self) -> Node:
        node = self.atom()
        if self.peek()[0] == "^":
            self.take()
            node = BinOp("^", node, self.factor())
        return node

    def atom(self) -> Node:
        kind, text, off = self.peek()
        if kind == "number":
            self.take()
            return Num(float(text))
        if kind == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "ident":
            self.take()
            if self.peek()[0] == "(":
                return self._call(text, off)
            if text == "x":
                return Var()
            if text in _CONSTANTS:
                return Const(text)
            return Param(text)
        raise ParseError(
            f"unexpected token {text!r}" if kind != "end" else "unexpected end of input",
            off,
            ("number", "ident", "(", "-"),
        )

    def _call(self, name: str, off: int) -> Node:
        if name not in _FUNCTIONS:
            raise ParseError(f"unknown function {name!r}", off)
        self.expect("(")
        args = [self.expr()]
        if self.peek()[0] == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        if len(args) != _FUNCTIONS[name]:
            raise ParseError(
                f"{name} takes {_FUNCTIONS[name]} argument(s), got {len(args)}", off
            )
        return Call(name, tuple(args))


def parse(source: str) -> DensityExpr:
    """Parse ``source`` into a :class:`DensityExpr`.

    Raises :class:`ParseError` with the byte offset (and for syntax errors the
    expected token kinds) on malformed input or unknown function names.
    """
    p = _Parser(source)
    ast = p.expr()
    kind, text, off = p.peek()
    if kind != "end":
        raise ParseError(f"unexpected trailing token {text!r}", off, ("end",))
    return DensityExpr(ast=ast, source=source)


# ---------------------------------------------------------------------------
# Evaluation


def _pow(base: float, expo: float, x: float | None) -> float:
    if base < 0.0 and expo != math.floor(expo):
        raise DomainError(f"negative base {base!r} raised to non-integer power {expo!r}", x)
    if base == 0.0 and expo < 0.0:
        # IEEE pow semantics: +0 to a negative power diverges
        return math.inf
    try:
        return math.pow(base, expo)
    except OverflowError:
        return math.inf


def _eval(node: Node, x: float, params: Mapping[str, float]) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x
    if isinstance(node, Const):
        return _CONSTANTS[node.name]
    if isinstance(node, Param):
        try:
            return float(params[node.name])
        except KeyError:
            raise UnboundParameterError(node.name) from None
    if isinstance(node, Neg):
        return -_eval(node.arg, x, params)
    if isinstance(node, BinOp):
        a = _eval(node.left, x, params)
        b = _eval(node.right, x, params)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if b == 0.0:
                raise DomainError("division by zero", x)
            return a / b
        return _pow(a, b, x)
    if isinstance(node, Call):
        vals = [_eval(arg, x, params) for arg in node.args]
        if node.fn == "exp":
            try:
                return math.exp(vals[0])
            except OverflowError:
                return math.inf
        if node.fn == "log":
            if vals[0] <= 0.0:
                raise DomainError(f"log of non-positive value {vals[0]!r}", x)
            return math.log(vals[0])
        if node.fn == "sqrt":
            if vals[0] < 0.0:
                raise DomainError(f"sqrt of negative value {vals[0]!r}", x)
            return math.sqrt(vals[0])
        if node.fn == "abs":
            return abs(vals[0])
        return _pow(vals[0], vals[1], x)
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(expr: DensityExpr | Node, x: float, params: Mapping[str, float] | None = None) -> float:
    """Evaluate at a point. IEEE semantics for overflow (result becomes inf);
    out-of-domain operations raise :class:`DomainError`."""
    node = expr.ast if isinstance(expr, DensityExpr) else expr
    return _eval(node, float(x), params or {})


def free_parameters(expr: DensityExpr | Node) -> frozenset[str]:
    node = expr.ast if isinstance(expr, DensityExpr) else expr
    names: set[str] = set()

    def walk(n: Node) -> None:
        if isinstance(n, Param):
            names.add(n.name)
        elif isinstance(n, Neg):
            walk(n.arg)
        elif isinstance(n, BinOp):
            walk(n.left)
            walk(n.right)
        elif isinstance(n, Call):
            for a in n.args:
                walk(a)

    walk(node)
    return frozenset(names)


# ---------------------------------------------------------------------------
# Printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _fmt_num(v: float) -> str:
    if v == math.floor(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _print(node: Node) -> tuple[str, int]:
    """Return (text, precedence of the outermost construct)."""
    if isinstance(node, Num):
        if node.value < 0:
            return f"-{_fmt_num(-node.value)}", _PREC["neg"]
        return _fmt_num(node.value), _PREC["atom"]
    if isinstance(node, Var):
        return "x", _PREC["atom"]
    if isinstance(node, Const):
        return node.name, _PREC["atom"]
    if isinstance(node, Param):
        return node.name, _PREC["atom"]
    if isinstance(node, Neg):
        inner, prec = _print(node.arg)
        if prec < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}", _PREC["neg"]
    if isinstance(node, BinOp):
        lt, lp = _print(node.left)
        rt, rp = _print(node.right)
        my = _PREC[node.op]
        if node.op == "^":
            # right associative; the left side must be a bare atom
            if lp < _PREC["atom"]:
                lt = f"({lt})"
            if rp < my:
                rt = f"({rt})"
        else:
            if lp < my:
                lt = f"({lt})"
            # - and / are left associative: parenthesize an equal-precedence rhs
            if rp < my or (rp == my and node.op in ("-", "/")):
                rt = f"({rt})"
        return f"{lt} {node.op} {rt}" if node.op in "+-" else f"{lt}{node.op}{rt}", my
    if isinstance(node, Call):
        args = ", ".join(_print(a)[0] for a in node.args)
        return f"{node.fn}({args})", _PREC["atom"]
    raise TypeError(f"not an expression node: {node!r}")


def to_string(expr: DensityExpr | Node) -> str:
    """Minimal-parentheses rendering; ``parse(to_string(e)).ast == e.ast``."""
    node = expr.ast if isinstance(expr, DensityExpr) else expr
    return _print(node)[0]


# ---------------------------------------------------------------------------
# Compilation to a flat stack program (shared with the evaluation kernels)

OP_CONST = 0
OP_X = 1
OP_ADD = 2
OP_SUB = 3
OP_MUL = 4
OP_DIV = 5
OP_POW = 6
OP_NEG = 7
OP_EXP = 8
OP_LOG = 9
OP_SQRT = 10
OP_ABS = 11

_FN_OP = {"exp": OP_EXP, "log": OP_LOG, "sqrt": OP_SQRT, "abs": OP_ABS}


@dataclass(frozen=True)
class CompiledDensity:
    """Flat postfix program: parallel opcode/argument arrays plus a constant
    pool, ready for the evaluation kernels.  Parameters are folded into the
    constant pool at compile time."""

    ops: tuple[int, ...]
    args: tuple[int, ...]
    consts: tuple[float, ...]
    stack_depth: int
    source: str = ""

    def __call__(self, x):
        """Evaluate through the active kernel backend (vectorized)."""
        from . import quadrature

        return quadrature.eval_density(self, x)


def compile_density(
    expr: DensityExpr | Node, params: Mapping[str, float] | None = None
) -> CompiledDensity:
    node = expr.ast if isinstance(expr, DensityExpr) else expr
    params = params or {}
    ops: list[int] = []
    args: list[int] = []
    consts: list[float] = []

    def const_ix(v: float) -> int:
        for i, c in enumerate(consts):
            if c == v or (math.isnan(c) and math.isnan(v)):
                return i
        consts.append(float(v))
        return len(consts) - 1

    def emit(n: Node) -> int:
        """Emit code for n, return the stack depth it needs."""
        if isinstance(n, Num):
            ops.append(OP_CONST)
            args.append(const_ix(n.value))
            return 1
        if isinstance(n, Const):
            ops.append(OP_CONST)
            args.append(const_ix(_CONSTANTS[n.name]))
            return 1
        if isinstance(n, Param):
            if n.name not in params:
                raise UnboundParameterError(n.name)
            ops.append(OP_CONST)
            args.append(const_ix(float(params[n.name])))
            return 1
        if isinstance(n, Var):
            ops.append(OP_X)
            args.append(0)
            return 1
        if isinstance(n, Neg):
            d = emit(n.arg)
            ops.append(OP_NEG)
            args.append(0)
            return d
        if isinstance(n, BinOp):
            dl = emit(n.left)
            dr = emit(n.right)
            ops.append({"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV, "^": OP_POW}[n.op])
            args.append(0)
            return max(dl, 1 + dr)
        if isinstance(n, Call):
            if n.fn == "pow":
                dl = emit(n.args[0])
                dr = emit(n.args[1])
                ops.append(OP_POW)
                args.append(0)
                return max(dl, 1 + dr)
            d = emit(n.args[0])
            ops.append(_FN_OP[n.fn])
            args.append(0)
            return d
        raise TypeError(f"not an expression node: {n!r}")

    depth = emit(node)
    source = expr.source if isinstance(expr, DensityExpr) else to_string(node)
    return CompiledDensity(
        ops=tuple(ops), args=tuple(args), consts=tuple(consts), stack_depth=depth, source=source
    )


def compose_power(cd: CompiledDensity, exponent: float) -> CompiledDensity:
    """Program computing ``cd(x) ** exponent``."""
    consts = list(cd.consts)
    try:
        ix = consts.index(float(exponent))
    except ValueError:
        consts.append(float(exponent))
        ix = len(consts) - 1
    return CompiledDensity(
        ops=cd.ops + (OP_CONST, OP_POW),
        args=cd.args + (ix, 0),
        consts=tuple(consts),
        stack_depth=max(cd.stack_depth, 2),
        source=f"({cd.source})^{exponent!r}",
    )
