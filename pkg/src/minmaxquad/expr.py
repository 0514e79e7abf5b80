"""A tiny arithmetic language for kernels such as ``(sqrt(u*v)-u)/(v-u)``.

Grammar::

    expr    = term , { ("+" | "-") , term } ;
    term    = unary , { ("*" | "/") , unary } ;
    unary   = "-" , unary | power ;
    power   = primary , [ "^" , unary ] ;          (* right associative *)
    primary = number | call | identifier | "(" , expr , ")" ;
    call    = function , "(" , expr , { "," , expr } , ")" ;
    function = "ln" | "exp" | "sqrt" | "abs" | "min" | "max" | "pow" ;
    number  = digits , [ "." , [ digits ] ] , [ exponent ]
            | "." , digits , [ exponent ] ;
    exponent = ("e" | "E") , [ "+" | "-" ] , digits ;
    identifier = letter , { letter | digit | "_" } ;

So ``-2^2`` is ``-(2^2)``, ``2^3^2`` is ``2^(3^2)`` and ``2^-1`` is allowed.

Evaluation works on floats or numpy arrays.  Domain violations raise
subclasses of :class:`EvalError` rather than producing NaN; overflow
follows IEEE rules.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

MAX_SOURCE_BYTES = 64 * 1024
MAX_DEPTH = 200

FUNCTIONS = {"ln": 1, "exp": 1, "sqrt": 1, "abs": 1, "pow": 2, "min": -1, "max": -1}


class ExprError(Exception):
    pass


class ExprSyntaxError(ExprError, ValueError):
    def __init__(self, message: str, offset: int, expected: str = ""):
        super().__init__(f"{message} at byte {offset}" + (f" (expected {expected})" if expected else ""))
        self.offset = offset
        self.expected = expected


class EvalError(ExprError, ArithmeticError):
    pass


class UnboundVariable(EvalError, NameError):
    pass


class DomainError(EvalError, ValueError):
    pass


class DivByZero(EvalError, ZeroDivisionError):
    pass


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple

    def __str__(self):
        return to_text(self)


Expr = Union[Num, Var, Neg, BinOp, Call]


# ---------------------------------------------------------------------------
# lexer

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # "num", "ident", "op", "end"
    text: str
    offset: int  # byte offset into the UTF-8 source


def tokenize(text: str) -> list[Token]:
    if not isinstance(text, str):
        raise ExprSyntaxError("expression must be text", 0)
    size = len(text.encode("utf-8", errors="surrogatepass"))
    if size > MAX_SOURCE_BYTES:
        raise ExprSyntaxError(f"expression longer than {MAX_SOURCE_BYTES} bytes", MAX_SOURCE_BYTES)
    tokens = []
    pos = 0
    byte = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", byte, "a number, name or operator")
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            tokens.append(Token(kind, chunk, byte))
        byte += len(chunk.encode("utf-8", errors="surrogatepass"))
        pos = m.end()
    tokens.append(Token("end", "", byte))
    return tokens


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0
        self.depth = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind != "op":
            raise ExprSyntaxError(f"unexpected {self._describe(self.tok)}", self.tok.offset, repr(text))
        return self.advance()

    @staticmethod
    def _describe(t: Token) -> str:
        return "end of input" if t.kind == "end" else repr(t.text)

    def nest(self):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ExprSyntaxError("expression nested too deeply", self.tok.offset)

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {self._describe(self.tok)}", self.tok.offset, "an operator or end of input")
        return node

    def expr(self) -> Expr:
        return self._chain(self.term, "+-")

    def term(self) -> Expr:
        return self._chain(self.unary, "*/")

    def _chain(self, operand, ops: str) -> Expr:
        # each operator deepens the left-leaning tree, so it counts as nesting
        base = self.depth
        try:
            node = operand()
            while self.tok.kind == "op" and self.tok.text in ops:
                op = self.advance().text
                self.nest()
                node = BinOp(op, node, operand())
            return node
        finally:
            self.depth = base

    def unary(self) -> Expr:
        self.nest()
        try:
            if self.tok.kind == "op" and self.tok.text == "-":
                self.advance()
                return Neg(self.unary())
            return self.power()
        finally:
            self.depth -= 1

    def power(self) -> Expr:
        base = self.primary()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            value = float(t.text)
            if not np.isfinite(value):
                raise ExprSyntaxError(f"number {t.text[:20]!r} out of range", t.offset)
            return Num(value)
        if t.kind == "ident":
            self.advance()
            if self.tok.kind == "op" and self.tok.text == "(":
                return self.call(t)
            if t.text in FUNCTIONS:
                raise ExprSyntaxError(f"function {t.text!r} needs arguments", self.tok.offset, "'('")
            return Var(t.text)
        if t.kind == "op" and t.text == "(":
            self.advance()
            self.nest()
            node = self.expr()
            self.depth -= 1
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {self._describe(t)}", t.offset, "a number, name or '('")

    def call(self, name: Token) -> Expr:
        if name.text not in FUNCTIONS:
            raise ExprSyntaxError(f"unknown function {name.text!r}", name.offset,
                                  "one of " + ", ".join(sorted(FUNCTIONS)))
        self.expect("(")
        self.nest()
        args = [self.expr()]
        while self.tok.kind == "op" and self.tok.text == ",":
            self.advance()
            args.append(self.expr())
        self.depth -= 1
        self.expect(")")
        arity = FUNCTIONS[name.text]
        if arity > 0 and len(args) != arity:
            raise ExprSyntaxError(f"{name.text} takes {arity} argument(s), got {len(args)}", name.offset)
        return Call(name.text, tuple(args))


def parse(text: str) -> Expr:
    """Parse ``text`` into an AST; raises :class:`ExprSyntaxError`."""
    return _Parser(tokenize(text)).parse()


# ---------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_NEG_PREC = 3
_ATOM = 5


def _prec(node: Expr) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _NEG_PREC
    return _ATOM


def _num_text(x: float) -> str:
    if x < 0 or not np.isfinite(x):
        raise ValueError(f"literal {x!r} cannot be printed")
    if float(x).is_integer() and x < 1e15:
        return str(int(x))
    return repr(float(x))


def to_text(node: Expr) -> str:
    """Print ``node`` with the fewest parentheses that parse back to it."""
    if isinstance(node, Num):
        return _num_text(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_text(a) for a in node.args)})"
    if isinstance(node, Neg):
        inner = to_text(node.operand)
        return "-" + (f"({inner})" if _prec(node.operand) < _NEG_PREC else inner)
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        left, right = to_text(node.left), to_text(node.right)
        if node.op == "^":
            if _prec(node.left) != _ATOM:
                left = f"({left})"
            if _prec(node.right) < _NEG_PREC:
                right = f"({right})"
        else:
            if _prec(node.left) < p:
                left = f"({left})"
            if _prec(node.right) <= p:
                right = f"({right})"
        return f"{left}{node.op}{right}"
    raise TypeError(f"not an expression node: {node!r}")


def free_vars(node: Expr) -> frozenset:
    if isinstance(node, Var):
        return frozenset([node.name])
    if isinstance(node, Num):
        return frozenset()
    if isinstance(node, Neg):
        return free_vars(node.operand)
    if isinstance(node, BinOp):
        return free_vars(node.left) | free_vars(node.right)
    if isinstance(node, Call):
        return frozenset().union(*(free_vars(a) for a in node.args))
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# evaluation


def _pow(base, expo):
    base = np.asarray(base, dtype=float)
    expo = np.asarray(expo, dtype=float)
    base, expo = np.broadcast_arrays(base, expo)
    if np.any((base < 0) & (expo != np.round(expo))):
        raise DomainError("negative base raised to a non-integer power")
    if np.any((base == 0) & (expo < 0)):
        raise DivByZero("zero raised to a negative power")
    return np.power(base, expo)


def _apply(name: str, args: list):
    if name == "ln":
        (x,) = args
        if np.any(np.asarray(x) <= 0):
            raise DomainError("ln of a non-positive number")
        return np.log(x)
    if name == "sqrt":
        (x,) = args
        if np.any(np.asarray(x) < 0):
            raise DomainError("sqrt of a negative number")
        return np.sqrt(x)
    if name == "exp":
        return np.exp(args[0])
    if name == "abs":
        return np.abs(args[0])
    if name == "pow":
        return _pow(*args)
    if name == "min":
        return np.minimum.reduce(np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in args]))
    if name == "max":
        return np.maximum.reduce(np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in args]))
    raise DomainError(f"unknown function {name!r}")


def _eval(node: Expr, env: Mapping):
    if isinstance(node, Num):
        return np.float64(node.value)
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise UnboundVariable(f"variable {node.name!r} is not bound") from None
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, Call):
        return _apply(node.name, [_eval(a, env) for a in node.args])
    if isinstance(node, BinOp):
        left = _eval(node.left, env)
        right = _eval(node.right, env)
        if node.op == "+":
            return np.add(left, right)
        if node.op == "-":
            return np.subtract(left, right)
        if node.op == "*":
            return np.multiply(left, right)
        if node.op == "/":
            if np.any(np.asarray(right) == 0):
                raise DivByZero("division by zero")
            return np.divide(left, right)
        return _pow(left, right)
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(node: Expr, env: Mapping):
    """Evaluate ``node`` with variables from ``env`` (floats or arrays).

    Returns a float when every bound value is scalar, else an array.
    """
    env = {k: (np.asarray(v, dtype=float) if not np.isscalar(v) else np.float64(v)) for k, v in env.items()}
    with np.errstate(all="ignore"):
        out = _eval(node, env)
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def to_callable(node: Expr, params: Sequence[str], constants: Mapping | None = None):
    """Batched function of ``params`` (positional) with ``constants`` bound.

    Raises :class:`UnboundVariable` up front if ``node`` uses any other name.
    """
    constants = dict(constants or {})
    missing = free_vars(node) - set(params) - set(constants)
    if missing:
        raise UnboundVariable(f"unbound variable(s): {', '.join(sorted(missing))}")

    def fn(*values):
        env = dict(constants)
        env.update(zip(params, values))
        shape = np.broadcast(*[np.asarray(v) for v in values]).shape if values else ()
        return np.broadcast_to(evaluate(node, env), shape)

    return fn
