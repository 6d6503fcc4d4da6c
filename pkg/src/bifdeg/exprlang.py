"""Expression language for family-definition files.

Grammar (EBNF), standard precedence, ``^`` right-associative::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = "-" unary | power ;
    power   = atom [ "^" unary ] ;          (* exponent must fold to an integer *)
    atom    = NUMBER | "i" | "pi" | IDENT
            | FUNC "(" expr { "," expr } ")"
            | "(" expr ")" ;
    FUNC    = "sin" | "cos" | "exp" | "sqrt" | "atan2" | "abs2" ;
    NUMBER  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;

Since ``^`` binds tighter than unary minus, ``-x^2`` is ``-(x^2)``.  Variable
names must belong to the declared set supplied to :func:`parse`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from . import dual as D
from .dual import Dual, EvaluationError

__all__ = [
    "Expr",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Pow",
    "Call",
    "ExprSyntaxError",
    "EvaluationError",
    "parse",
    "to_source",
    "evaluate",
    "eval_dual",
    "diff",
    "substitute",
    "free_vars",
    "declared_variables",
]

FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "sqrt": 1, "atan2": 2, "abs2": 1}


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.message = message


# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: complex


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Expr = Union[Num, Var, Neg, BinOp, Pow, Call]


def declared_variables(q: int = 0, n: int = 0, N: int = 0, t: bool = True) -> list[str]:
    """The standard variable set {l1..lq, x1..xn, xi1..xin, u1..uN, t}."""
    names = [f"l{j}" for j in range(1, q + 1)]
    names += [f"x{j}" for j in range(1, n + 1)]
    names += [f"xi{j}" for j in range(1, n + 1)]
    names += [f"u{j}" for j in range(1, N + 1)]
    if t:
        names.append("t")
    return names


# --------------------------------------------------------------------------
# lexer / parser

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos, line, col0 = 0, 1, 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", line, pos - col0 + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            col0 = m.end()
        elif kind != "ws":
            toks.append(_Tok(kind, m.group(), line, pos - col0 + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - col0 + 1))
    return toks


class _Parser:
    def __init__(self, src: str, declared: frozenset):
        self.toks = _tokenize(src)
        self.i = 0
        self.declared = declared

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.tok
        raise ExprSyntaxError(msg, tok.line, tok.col)

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {found!r}")

    def parse(self) -> Expr:
        if self.tok.kind == "eof":
            self.error("empty expression")
        e = self.expr()
        if self.tok.kind != "eof":
            self.error(f"unexpected token {self.tok.text!r}")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            at = self.tok
            self.i += 1
            exponent = _fold_integer(self.unary())
            if exponent is None:
                self.error("exponent must be an integer constant", at)
            return Pow(base, exponent)
        return base

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Num(complex(float(tok.text)))
        if tok.kind == "id":
            self.i += 1
            name = tok.text
            if name in FUNCTIONS:
                self.expect("(")
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[name]:
                    self.error(f"{name} takes {FUNCTIONS[name]} argument(s), got {len(args)}", tok)
                return Call(name, tuple(args))
            if name == "i":
                return Num(1j)
            if name == "pi":
                return Num(complex(math.pi))
            if name not in self.declared:
                self.error(f"undeclared variable {name!r}", tok)
            return Var(name)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        self.error(f"unexpected token {tok.text or 'end of input'!r}")


def _fold_integer(e: Expr):
    """Constant-fold an exponent; None unless it is an exact integer."""
    if isinstance(e, Num):
        v = e.value
        if v.imag == 0 and float(v.real).is_integer():
            return int(v.real)
        return None
    if isinstance(e, Neg):
        v = _fold_integer(e.arg)
        return None if v is None else -v
    if isinstance(e, Pow):
        b = _fold_integer(e.base)
        if b is None or e.exponent < 0:
            return None
        return b ** e.exponent
    return None


def parse(source: str, declared_vars: Iterable[str]) -> Expr:
    """Parse ``source``; raises :class:`ExprSyntaxError` carrying 1-based line/column."""
    if not isinstance(source, str) or not source.strip():
        raise ExprSyntaxError("empty expression", 1, 1)
    return _Parser(source, frozenset(declared_vars)).parse()


# --------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_source(e: Expr) -> str:
    """Render an AST so that ``parse(to_source(e)) == e``."""
    return _show(e, 0)


def _show(e: Expr, ctx: int) -> str:
    if isinstance(e, Num):
        if e.value == 1j:
            return "i"
        if e.value.imag != 0 or e.value.real < 0:
            raise ValueError(f"literal {e.value} has no direct source form")
        return repr(float(e.value.real))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({', '.join(_show(a, 0) for a in e.args)})"
    if isinstance(e, Neg):
        s = "-" + _show(e.arg, 3)
        return f"({s})" if ctx > 3 else s
    if isinstance(e, Pow):
        s = f"{_show(e.base, 5)}^{e.exponent}" if e.exponent >= 0 else f"{_show(e.base, 5)}^({e.exponent})"
        return f"({s})" if ctx > 4 else s
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        s = f"{_show(e.left, p)} {e.op} {_show(e.right, p + 1)}"
        return f"({s})" if ctx > p else s
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------
# evaluation


def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, (Neg,)):
        return free_vars(e.arg)
    if isinstance(e, Pow):
        return free_vars(e.base)
    if isinstance(e, BinOp):
        return free_vars(e.left) | free_vars(e.right)
    return set().union(*(free_vars(a) for a in e.args))


_FUNCS = {
    "sin": D.sin,
    "cos": D.cos,
    "exp": D.exp,
    "sqrt": D.sqrt,
    "atan2": D.atan2,
    "abs2": D.abs2,
}


def _eval(e: Expr, env: Mapping):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise EvaluationError(f"no value supplied for variable {e.name!r}") from None
    if isinstance(e, Neg):
        return -_eval(e.arg, env)
    if isinstance(e, BinOp):
        a = _eval(e.left, env)
        b = _eval(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if not isinstance(b, Dual) and np.any(np.asarray(b) == 0):
            raise EvaluationError("division by zero")
        return a / b
    if isinstance(e, Pow):
        b = _eval(e.base, env)
        if isinstance(b, Dual):
            return b ** e.exponent
        b = np.asarray(b, dtype=complex)
        if e.exponent < 0 and np.any(b == 0):
            raise EvaluationError("division by zero")
        return b ** e.exponent if e.exponent >= 0 else 1.0 / b ** (-e.exponent)
    if isinstance(e, Call):
        return _FUNCS[e.func](*(_eval(a, env) for a in e.args))
    raise TypeError(f"not an expression node: {e!r}")


def evaluate(e: Expr, env: Mapping):
    """Evaluate with array or :class:`Dual` values bound in ``env``.

    Values broadcast; the result has the broadcast shape.  Non-finite results
    raise :class:`EvaluationError` rather than propagating NaN.
    """
    with np.errstate(all="ignore"):
        out = _eval(e, env)
    val = out.value if isinstance(out, Dual) else np.asarray(out)
    if not np.all(np.isfinite(val)):
        raise EvaluationError("non-finite value during evaluation")
    if isinstance(out, Dual) and not np.all(np.isfinite(out.partials)):
        raise EvaluationError("non-finite derivative during evaluation")
    return out


def eval_dual(e: Expr, point: Mapping, active: Sequence[str]) -> Dual:
    """Value and exact first partials of ``e`` with respect to ``active``."""
    active = list(active)
    values = [np.asarray(point[v], dtype=complex) for v in active]
    shape = np.broadcast_shapes(*(v.shape for v in values)) if values else ()
    k = len(active)
    env = {}
    for name, v in point.items():
        env[name] = np.asarray(v, dtype=complex)
    for j, name in enumerate(active):
        p = np.zeros((k,) + shape, dtype=complex)
        p[j] = 1.0
        env[name] = Dual(np.broadcast_to(values[j], shape), p)
    out = evaluate(e, env)
    return D.lift(out, k) if not isinstance(out, Dual) else out


# --------------------------------------------------------------------------
# symbolic differentiation (no simplification beyond trivial constants)

_ZERO = Num(0j)
_ONE = Num(1 + 0j)


def _is(e, v):
    return isinstance(e, Num) and e.value == v


def _add(a, b):
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    return BinOp("+", a, b)


def _sub(a, b):
    if _is(b, 0):
        return a
    if _is(a, 0):
        return Neg(b)
    return BinOp("-", a, b)


def _mul(a, b):
    if _is(a, 0) or _is(b, 0):
        return _ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    return BinOp("*", a, b)


def _div(a, b):
    if _is(a, 0):
        return _ZERO
    return BinOp("/", a, b)


def _num(x: float) -> Expr:
    return Num(complex(x)) if x >= 0 else Neg(Num(complex(-x)))


def diff(e: Expr, var: str) -> Expr:
    """Symbolic partial derivative with respect to a real variable."""
    if isinstance(e, Num):
        return _ZERO
    if isinstance(e, Var):
        return _ONE if e.name == var else _ZERO
    if isinstance(e, Neg):
        d = diff(e.arg, var)
        return _ZERO if _is(d, 0) else Neg(d)
    if isinstance(e, BinOp):
        a, b = e.left, e.right
        da, db = diff(a, var), diff(b, var)
        if e.op == "+":
            return _add(da, db)
        if e.op == "-":
            return _sub(da, db)
        if e.op == "*":
            return _add(_mul(da, b), _mul(a, db))
        # (a/b)' = a'/b - a b' / b^2
        return _sub(_div(da, b), _div(_mul(a, db), Pow(b, 2)))
    if isinstance(e, Pow):
        db = diff(e.base, var)
        if _is(db, 0) or e.exponent == 0:
            return _ZERO
        if e.exponent == 1:
            return db
        inner = e.base if e.exponent == 2 else Pow(e.base, e.exponent - 1)
        return _mul(_mul(_num(e.exponent), inner), db)
    if isinstance(e, Call):
        f = e.func
        if f == "atan2":
            y, x = e.args
            dy, dx = diff(y, var), diff(x, var)
            num = _sub(_mul(x, dy), _mul(y, dx))
            return _div(num, BinOp("+", Pow(x, 2), Pow(y, 2)))
        (a,) = e.args
        da = diff(a, var)
        if _is(da, 0):
            return _ZERO
        if f == "sin":
            return _mul(Call("cos", (a,)), da)
        if f == "cos":
            return Neg(_mul(Call("sin", (a,)), da))
        if f == "exp":
            return _mul(e, da)
        if f == "sqrt":
            return _div(da, _mul(Num(2 + 0j), e))
        if f == "abs2":
            # variables are real: d|a|^2 = 2 Re(conj(a) da); expressed via abs2
            # polarisation so the result stays inside the language.
            return BinOp(
                "/",
                _sub(Call("abs2", (_add(a, da),)), Call("abs2", (_sub(a, da),))),
                Num(2 + 0j),
            )
    raise TypeError(f"cannot differentiate {e!r}")


def substitute(e: Expr, values: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions."""
    if isinstance(e, Var):
        return values.get(e.name, e)
    if isinstance(e, Num):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, values))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, values), e.exponent)
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, values), substitute(e.right, values))
    return Call(e.func, tuple(substitute(a, values) for a in e.args))
