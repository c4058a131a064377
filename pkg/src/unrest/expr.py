"""A small arithmetic expression language for reaction terms, masks and initial data.

Grammar (EBNF)::

    expr     = term , { ("+" | "-") , term } ;
    term     = unary , { ("*" | "/") , unary } ;
    unary    = "-" , unary | power ;
    power    = atom , [ "^" , exponent ] ;
    exponent = "-" , exponent | power ;
    atom     = number | name | name , "(" , [ expr , { "," , expr } ] , ")"
             | "(" , expr , ")" ;
    number   = digits , [ "." , [ digits ] ] , [ expo ]
             | "." , digits , [ expo ] ;
    expo     = ("e" | "E") , [ "+" | "-" ] , digits ;
    name     = ( letter | "_" ) , { letter | digit | "_" } ;

Binding: ``^`` (right associative) > unary minus > ``* /`` > ``+ -``, the binary
operators other than ``^`` being left associative.  So ``-2^2 == -4`` and
``2^3^2 == 512``.  The names ``u v x t`` are variables; any other bare name is a
constant that must be supplied at compile time (``pi`` is predefined).

Evaluation works elementwise on numpy arrays as well as on plain floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Union

import numpy as np

from .errors import (
    EvalDomainError,
    ExprSyntaxError,
    UnboundConstant,
    UnboundVariable,
    UnknownFunction,
)

VARIABLES = ("u", "v", "x", "t")

FUNCTIONS = {
    "pos": 1, "step": 1, "exp": 1, "ln": 1, "sqrt": 1, "abs": 1,
    "sin": 1, "cos": 1, "min": 2, "max": 2,
}

BUILTIN_CONSTANTS = {"pi": math.pi}


# --------------------------------------------------------------------------- AST

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Node = Union[Num, Var, Const, Neg, BinOp, Call]


# ------------------------------------------------------------------------- lexer

@dataclass(frozen=True)
class Token:
    kind: str  # "num", "name", "op", "end"
    text: str
    column: int


def tokenize(source: str) -> list[Token]:
    tokens = []
    i = 0
    n = len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        start = i
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            while i < n and source[i].isdigit():
                i += 1
            if i < n and source[i] == ".":
                i += 1
                while i < n and source[i].isdigit():
                    i += 1
            if i < n and source[i] in "eE":
                j = i + 1
                if j < n and source[j] in "+-":
                    j += 1
                if j < n and source[j].isdigit():
                    i = j
                    while i < n and source[i].isdigit():
                        i += 1
                else:
                    raise ExprSyntaxError("malformed exponent in number", j + 1, ["digit"])
            tokens.append(Token("num", source[start:i], start + 1))
            continue
        if c.isascii() and (c.isalpha() or c == "_"):
            while i < n and source[i].isascii() and (source[i].isalnum() or source[i] == "_"):
                i += 1
            tokens.append(Token("name", source[start:i], start + 1))
            continue
        if c in "+-*/^(),":
            tokens.append(Token("op", c, start + 1))
            i += 1
            continue
        raise ExprSyntaxError(f"unexpected character {c!r}", start + 1)
    tokens.append(Token("end", "", n + 1))
    return tokens


# ------------------------------------------------------------------------ parser

_ATOM_START = ("number", "name", "(")


class _Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            self.fail([text])

    def fail(self, expected):
        tok = self.tok
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExprSyntaxError(f"unexpected {found}", tok.column, expected)

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            self.fail(["+", "-", "*", "/", "^", "end of input"])
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.pos += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.accept("^"):
            return BinOp("^", base, self.exponent())
        return base

    def exponent(self) -> Node:
        if self.accept("-"):
            return Neg(self.exponent())
        return self.power()

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.pos += 1
            return Num(float(tok.text))
        if tok.kind == "name":
            self.pos += 1
            if self.accept("("):
                if tok.text not in FUNCTIONS:
                    raise UnknownFunction(tok.text, tok.column)
                args = []
                if not self.accept(")"):
                    args.append(self.expr())
                    while self.accept(","):
                        args.append(self.expr())
                    self.expect(")")
                arity = FUNCTIONS[tok.text]
                if len(args) != arity:
                    raise ExprSyntaxError(
                        f"{tok.text} takes {arity} argument(s), got {len(args)}", tok.column
                    )
                return Call(tok.text, tuple(args))
            if tok.text in VARIABLES:
                return Var(tok.text)
            return Const(tok.text)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        self.fail(list(_ATOM_START) + ["-"])


def parse(source: str) -> Node:
    """Parse ``source`` into an AST."""
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 1, list(_ATOM_START))
    return _Parser(source).parse()


# ----------------------------------------------------------------------- printer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_NEG_PREC = 3
_ATOM_PREC = 5


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _NEG_PREC
    return _ATOM_PREC


def to_source(node: Node) -> str:
    """Render ``node`` with the minimum parentheses needed to re-parse it identically."""
    if isinstance(node, Num):
        if node.value < 0 or not math.isfinite(node.value):
            raise ValueError(f"literal {node.value!r} has no source form")
        if node.value.is_integer() and node.value < 1e15:
            return str(int(node.value))
        return repr(float(node.value))
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        if _prec(node.operand) < _NEG_PREC:
            inner = f"({inner})"
        return "-" + inner
    p = _PREC[node.op]
    left, right = to_source(node.left), to_source(node.right)
    if node.op == "^":
        if _prec(node.left) <= p:
            left = f"({left})"
        if _prec(node.right) < _NEG_PREC:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


# ---------------------------------------------------------------------- compiler

Evaluator = Callable[[Mapping[str, object]], object]


def _domain(message):
    raise EvalDomainError(message)


def _div(a, b):
    if np.any(np.asarray(b) == 0):
        _domain("division by zero")
    return a / b


def _pow(a, b):
    with np.errstate(all="ignore"):
        out = np.power(np.asarray(a, dtype=float), b)
    a_, b_ = np.asarray(a), np.asarray(b)
    if np.any((a_ == 0) & (b_ < 0)):
        _domain("zero raised to a negative power")
    if np.any(np.isnan(out) & ~np.isnan(a_) & ~np.isnan(b_)):
        _domain("negative base with non-integer exponent")
    return out


def _ln(a):
    if np.any(np.asarray(a) <= 0):
        _domain("ln of a non-positive argument")
    return np.log(a)


def _sqrt(a):
    if np.any(np.asarray(a) < 0):
        _domain("sqrt of a negative argument")
    return np.sqrt(a)


def _step(a):
    return np.where(np.asarray(a) > 0, 1.0, 0.0)


_IMPL = {
    "pos": lambda a: np.maximum(a, 0.0),
    "step": _step,
    "exp": np.exp,
    "ln": _ln,
    "sqrt": _sqrt,
    "abs": np.abs,
    "sin": np.sin,
    "cos": np.cos,
    "min": np.minimum,
    "max": np.maximum,
}

_BINARY = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _div,
    "^": _pow,
}


def _build(node: Node) -> Evaluator:
    if isinstance(node, Num):
        value = node.value
        return lambda env: value
    if isinstance(node, Var):
        name = node.name
        return lambda env: env[name]
    if isinstance(node, Neg):
        inner = _build(node.operand)
        return lambda env: -inner(env)
    if isinstance(node, BinOp):
        fn, left, right = _BINARY[node.op], _build(node.left), _build(node.right)
        return lambda env: fn(left(env), right(env))
    if isinstance(node, Call):
        fn = _IMPL[node.name]
        args = [_build(a) for a in node.args]
        if len(args) == 1:
            (a0,) = args
            return lambda env: fn(a0(env))
        a0, a1 = args
        return lambda env: fn(a0(env), a1(env))
    raise TypeError(f"cannot compile {node!r}")  # Const never survives substitution


def _substitute(node: Node, constants: Mapping[str, float], allowed: frozenset, used: set) -> Node:
    """Replace constants by literals, fold closed subtrees, collect variables."""
    if isinstance(node, Num):
        return node
    if isinstance(node, Var):
        if node.name not in allowed:
            raise UnboundVariable(node.name)
        used.add(node.name)
        return node
    if isinstance(node, Const):
        if node.name in constants:
            value = float(constants[node.name])
        elif node.name in BUILTIN_CONSTANTS:
            value = BUILTIN_CONSTANTS[node.name]
        else:
            raise UnboundConstant(node.name)
        return Num(value)
    if isinstance(node, Neg):
        out: Node = Neg(_substitute(node.operand, constants, allowed, used))
    elif isinstance(node, BinOp):
        out = BinOp(node.op, _substitute(node.left, constants, allowed, used),
                    _substitute(node.right, constants, allowed, used))
    else:
        out = Call(node.name, tuple(_substitute(a, constants, allowed, used) for a in node.args))
    return _fold(out)


def _fold(node: Node) -> Node:
    children = (node.operand,) if isinstance(node, Neg) else (
        (node.left, node.right) if isinstance(node, BinOp) else node.args)
    if not all(isinstance(c, Num) for c in children):
        return node
    try:
        value = float(_build(node)({}))
    except EvalDomainError:
        return node  # left in place so the error surfaces at evaluation time
    if not math.isfinite(value):
        return node
    return Num(value)


@dataclass(frozen=True)
class CompiledExpr:
    """An immutable, evaluable expression.

    ``ast`` has every constant folded in; ``free_vars`` lists the variables it
    actually reads, in the canonical order ``u, v, x, t``.
    """

    ast: Node
    free_vars: tuple
    source: str
    _fn: Evaluator

    def eval(self, bindings: Mapping[str, object] | None = None, **kw):
        env = dict(bindings or {}, **kw)
        for name in self.free_vars:
            if name not in env:
                raise UnboundVariable(name)
        out = self._fn(env)
        if np.ndim(out) == 0:
            return float(out)
        return out

    __call__ = eval

    def eval_on(self, shape, bindings: Mapping[str, object] | None = None, **kw) -> np.ndarray:
        """Evaluate and broadcast the result to ``shape`` (constant expressions included)."""
        out = self.eval(bindings, **kw)
        return np.broadcast_to(np.asarray(out, dtype=float), shape)

    @property
    def is_constant(self) -> bool:
        return not self.free_vars

    def __str__(self) -> str:
        return self.source

    def __repr__(self) -> str:
        return f"CompiledExpr({self.source!r})"


def compile_expr(ast: Node | str, allowed_vars=VARIABLES, constants: Mapping[str, float] | None = None) -> CompiledExpr:
    if isinstance(ast, str):
        ast = parse(ast)
    allowed = frozenset(allowed_vars)
    if not allowed <= set(VARIABLES):
        raise ValueError(f"allowed_vars must be a subset of {VARIABLES}")
    used: set = set()
    folded = _substitute(ast, constants or {}, allowed, used)
    free = tuple(v for v in VARIABLES if v in used)
    return CompiledExpr(folded, free, to_source(ast), _build(folded))


def compile_source(source: str, allowed_vars=VARIABLES, constants: Mapping[str, float] | None = None) -> CompiledExpr:
    return compile_expr(parse(source), allowed_vars, constants)


def evaluate(expr: CompiledExpr, bindings: Mapping[str, object]):
    return expr.eval(bindings)


def constant_value(source: str, constants: Mapping[str, float] | None = None) -> float:
    """Value of a closed expression such as ``"1/3"``."""
    return compile_source(source, (), constants).eval()
