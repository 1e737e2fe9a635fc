"""Small arithmetic expression language for field components and domain margins.

Grammar (UTF-8 text, whitespace between tokens ignored)::

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := '-' unary | power
    power    := atom ('^' exponent)?
    exponent := '-'? INT ('^' exponent)?      # integer literals only, right-assoc
    atom     := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

``^`` binds tightest, then unary minus, then ``*`` ``/``, then ``+`` ``-``.
Exponents are restricted to integer literals so that differentiation stays
inside the language and ``0^0``-style ambiguity never arises at runtime.

Functions: sin, cos, exp, log, sqrt, atan2(y, x), abs, sign.  ``sign`` is
included so the derivative of ``abs`` is expressible; ``sign(0) = 0``, which
fixes ``abs'(0) = 0``.

Names are bound at evaluation time; whether a name is a coordinate or a model
parameter is decided by the caller, not by the parser.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional, Union


class ExprSyntaxError(ValueError):
    """Raised on malformed input; carries the 0-based offset of the problem."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class ExprNameError(ValueError):
    """A free name had no binding at evaluation/compilation time."""


class ExprDomainError(ArithmeticError):
    """Evaluation left the domain of a partial function (log, sqrt, division)."""


_FUNCTION_ARITY = {
    "sin": 1,
    "cos": 1,
    "exp": 1,
    "log": 1,
    "sqrt": 1,
    "atan2": 2,
    "abs": 1,
    "sign": 1,
}


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * /
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple


Node = Union[Num, Var, Neg, Bin, Pow, Call]


# ---------------------------------------------------------------------------
# Tokenizer

_OPS = set("+-*/^(),")


def _tokenize(src: str):
    """Yield (kind, text, pos) triples; kinds: num, int, name, op, end."""
    tokens = []
    i, n = 0, len(src)
    while i < n:
        ch = src[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if ch in _OPS:
            tokens.append(("op", ch, i))
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and src[i + 1].isdigit()):
            j = i
            while j < n and src[j].isdigit():
                j += 1
            is_int = True
            if j < n and src[j] == ".":
                is_int = False
                j += 1
                while j < n and src[j].isdigit():
                    j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                if k < n and src[k].isdigit():
                    is_int = False
                    j = k
                    while j < n and src[j].isdigit():
                        j += 1
            tokens.append(("int" if is_int else "num", src[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            tokens.append(("name", src[i:j], i))
            i = j
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(("end", "", n))
    return tokens


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ExprSyntaxError(f"expected {op!r}", pos)
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                node = Bin(text, node, self.term())
            else:
                return node

    def term(self) -> Node:
        node = self.unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                node = Bin(text, node, self.unary())
            else:
                return node

    def unary(self) -> Node:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            return Pow(base, self.exponent())
        return base

    def exponent(self) -> int:
        """Signed integer literal; a further '^' chain folds right-associatively."""
        sign = 1
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            sign = -1
            kind, text, pos = self.peek()
        if kind != "int":
            raise ExprSyntaxError("exponent must be an integer literal", pos)
        self.advance()
        value = int(text)
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            value = value ** self.exponent()
        return sign * value

    def atom(self) -> Node:
        kind, text, pos = self.advance()
        if kind in ("num", "int"):
            return Num(float(text))
        if kind == "name":
            nk, nt, _ = self.peek()
            if nk == "op" and nt == "(":
                if text not in _FUNCTION_ARITY:
                    raise ExprSyntaxError(f"unknown function {text!r}", pos)
                self.advance()
                args = [self.expr()]
                while True:
                    k2, t2, p2 = self.peek()
                    if k2 == "op" and t2 == ",":
                        self.advance()
                        args.append(self.expr())
                    elif k2 == "op" and t2 == ")":
                        self.advance()
                        break
                    else:
                        raise ExprSyntaxError("expected ',' or ')'", p2)
                if len(args) != _FUNCTION_ARITY[text]:
                    raise ExprSyntaxError(
                        f"{text} takes {_FUNCTION_ARITY[text]} argument(s), got {len(args)}",
                        pos,
                    )
                return Call(text, tuple(args))
            if text in _FUNCTION_ARITY:
                raise ExprSyntaxError(f"function name {text!r} used as a variable", pos)
            return Var(text)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExprSyntaxError("expected a number, name or '('", pos)


# ---------------------------------------------------------------------------
# Evaluation / differentiation / printing


def _free_names(node: Node, out: set):
    if isinstance(node, Var):
        out.add(node.name)
    elif isinstance(node, Neg):
        _free_names(node.arg, out)
    elif isinstance(node, Bin):
        _free_names(node.left, out)
        _free_names(node.right, out)
    elif isinstance(node, Pow):
        _free_names(node.base, out)
    elif isinstance(node, Call):
        for a in node.args:
            _free_names(a, out)


def _eval(node: Node, env: Mapping[str, float]) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return float(env[node.name])
        except KeyError:
            raise ExprNameError(f"unbound name {node.name!r}") from None
    if isinstance(node, Neg):
        return -_eval(node.arg, env)
    if isinstance(node, Bin):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if b == 0.0:
            raise ExprDomainError("division by zero")
        return a / b
    if isinstance(node, Pow):
        base = _eval(node.base, env)
        if base == 0.0 and node.exponent < 0:
            raise ExprDomainError("zero raised to a negative power")
        try:
            return float(base ** node.exponent)
        except OverflowError:
            raise ExprDomainError("overflow in power") from None
    if isinstance(node, Call):
        vals = [_eval(a, env) for a in node.args]
        try:
            if node.fn == "sin":
                return math.sin(vals[0])
            if node.fn == "cos":
                return math.cos(vals[0])
            if node.fn == "exp":
                return math.exp(vals[0])
            if node.fn == "log":
                if vals[0] <= 0.0:
                    raise ExprDomainError("log of a non-positive value")
                return math.log(vals[0])
            if node.fn == "sqrt":
                if vals[0] < 0.0:
                    raise ExprDomainError("sqrt of a negative value")
                return math.sqrt(vals[0])
            if node.fn == "atan2":
                return math.atan2(vals[0], vals[1])
            if node.fn == "abs":
                return abs(vals[0])
            if node.fn == "sign":
                return 0.0 if vals[0] == 0.0 else math.copysign(1.0, vals[0])
        except OverflowError:
            raise ExprDomainError(f"overflow in {node.fn}") from None
    raise TypeError(f"not an expression node: {node!r}")


# Light folding keeps derivative trees readable and evaluation cheap.


def _is_const(node: Node, v: float) -> bool:
    return isinstance(node, Num) and node.value == v


def _add(a: Node, b: Node) -> Node:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return Bin("+", a, b)


def _sub(a: Node, b: Node) -> Node:
    if _is_const(b, 0.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    if _is_const(a, 0.0):
        return _neg(b)
    return Bin("-", a, b)


def _neg(a: Node) -> Node:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _mul(a: Node, b: Node) -> Node:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Num(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return Bin("*", a, b)


def _div(a: Node, b: Node) -> Node:
    if _is_const(a, 0.0):
        return Num(0.0)
    if _is_const(b, 1.0):
        return a
    return Bin("/", a, b)


def _diff(node: Node, var: str) -> Node:
    if isinstance(node, Num):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0) if node.name == var else Num(0.0)
    if isinstance(node, Neg):
        return _neg(_diff(node.arg, var))
    if isinstance(node, Bin):
        da = _diff(node.left, var)
        db = _diff(node.right, var)
        if node.op == "+":
            return _add(da, db)
        if node.op == "-":
            return _sub(da, db)
        if node.op == "*":
            return _add(_mul(da, node.right), _mul(node.left, db))
        # quotient rule
        num = _sub(_mul(da, node.right), _mul(node.left, db))
        return _div(num, Pow(node.right, 2))
    if isinstance(node, Pow):
        k = node.exponent
        if k == 0:
            return Num(0.0)
        du = _diff(node.base, var)
        if k == 1:
            return du
        return _mul(Num(float(k)), _mul(Pow(node.base, k - 1), du))
    if isinstance(node, Call):
        u = node.args[0]
        du = _diff(u, var)
        if node.fn == "sin":
            return _mul(Call("cos", (u,)), du)
        if node.fn == "cos":
            return _neg(_mul(Call("sin", (u,)), du))
        if node.fn == "exp":
            return _mul(Call("exp", (u,)), du)
        if node.fn == "log":
            return _div(du, u)
        if node.fn == "sqrt":
            return _div(du, _mul(Num(2.0), Call("sqrt", (u,))))
        if node.fn == "atan2":
            y, x = node.args
            dy = _diff(y, var)
            dx = _diff(x, var)
            num = _sub(_mul(x, dy), _mul(y, dx))
            den = _add(_mul(x, x), _mul(y, y))
            return _div(num, den)
        if node.fn == "abs":
            # piecewise derivative; sign(0) = 0 pins the value at the kink
            return _mul(Call("sign", (u,)), du)
        if node.fn == "sign":
            return Num(0.0)
    raise TypeError(f"not an expression node: {node!r}")


def _fmt_num(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


# precedence levels used by the printer
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "pow": 4, "atom": 5}


def _to_str(node: Node, parent_prec: int = 0) -> str:
    if isinstance(node, Num):
        s = _fmt_num(node.value)
        if node.value < 0:
            return f"({s})" if parent_prec > _PREC["+"] else s
        return s
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        s = "-" + _to_str(node.arg, _PREC["neg"])
        return f"({s})" if parent_prec > _PREC["neg"] else s
    if isinstance(node, Bin):
        prec = _PREC[node.op]
        left = _to_str(node.left, prec)
        # left-associative: right operand needs strictly higher precedence
        right = _to_str(node.right, prec + 1)
        s = f"{left} {node.op} {right}"
        return f"({s})" if parent_prec > prec else s
    if isinstance(node, Pow):
        base = _to_str(node.base, _PREC["pow"] + 1)
        if node.exponent < 0:
            s = f"{base}^-{-node.exponent}"
        else:
            s = f"{base}^{node.exponent}"
        return f"({s})" if parent_prec > _PREC["pow"] else s
    if isinstance(node, Call):
        args = ", ".join(_to_str(a, 0) for a in node.args)
        return f"{node.fn}({args})"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# Compilation to plain Python for hot loops


def _render_py(node: Node, name_map: Mapping[str, str]) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        try:
            return name_map[node.name]
        except KeyError:
            raise ExprNameError(f"unbound name {node.name!r}") from None
    if isinstance(node, Neg):
        return f"(-{_render_py(node.arg, name_map)})"
    if isinstance(node, Bin):
        return f"({_render_py(node.left, name_map)} {node.op} {_render_py(node.right, name_map)})"
    if isinstance(node, Pow):
        return f"({_render_py(node.base, name_map)} ** {node.exponent})"
    if isinstance(node, Call):
        args = [_render_py(a, name_map) for a in node.args]
        if node.fn == "abs":
            return f"abs({args[0]})"
        if node.fn == "sign":
            return f"_sign({args[0]})"
        return f"_{node.fn}({', '.join(args)})"
    raise TypeError(f"not an expression node: {node!r}")


def _py_sign(v: float) -> float:
    return 0.0 if v == 0.0 else math.copysign(1.0, v)


_COMPILE_GLOBALS = {
    "_sin": math.sin,
    "_cos": math.cos,
    "_exp": math.exp,
    "_log": math.log,
    "_sqrt": math.sqrt,
    "_atan2": math.atan2,
    "_sign": _py_sign,
    "abs": abs,
}


def compile_scalars(
    exprs: Iterable["Expr"],
    arg_names: Iterable[str],
    consts: Optional[Mapping[str, float]] = None,
) -> Callable:
    """Compile several expressions into one positional function.

    The result takes ``len(arg_names)`` floats and returns a tuple of floats,
    one per expression.  Names in ``consts`` are folded in as literals.
    Raises ``ExprNameError`` for names that are neither arguments nor consts.

    The compiled code intentionally does not guard partial functions: callers
    in the integrator catch ``ValueError``/``ZeroDivisionError``/``OverflowError``
    and treat them as leaving the domain.
    """
    args = list(arg_names)
    name_map = {n: f"_v{i}" for i, n in enumerate(args)}
    if consts:
        for k, v in consts.items():
            if k not in name_map:
                name_map[k] = repr(float(v))
    bodies = [_render_py(e.node, name_map) for e in exprs]
    params = ", ".join(f"_v{i}" for i in range(len(args)))
    src = f"def _f({params}):\n    return ({', '.join(bodies)}{',' if len(bodies) == 1 else ''})"
    ns = dict(_COMPILE_GLOBALS)
    exec(compile(src, "<expr>", "exec"), ns)
    return ns["_f"]


# ---------------------------------------------------------------------------
# Public wrapper


class Expr:
    """Parsed expression: evaluate, differentiate, print, compile."""

    __slots__ = ("node", "_free")

    def __init__(self, node: Node):
        self.node = node
        self._free = None

    @property
    def free_names(self) -> frozenset:
        if self._free is None:
            out: set = set()
            _free_names(self.node, out)
            self._free = frozenset(out)
        return self._free

    def eval(self, env: Mapping[str, float]) -> float:
        v = _eval(self.node, env)
        if not math.isfinite(v):
            raise ExprDomainError("non-finite result")
        return v

    def diff(self, var: str) -> "Expr":
        return Expr(_diff(self.node, var))

    def compile(self, arg_names, consts=None) -> Callable:
        fn = compile_scalars([self], arg_names, consts)
        return lambda *vals: fn(*vals)[0]

    def __str__(self) -> str:
        return _to_str(self.node)

    def __repr__(self) -> str:
        return f"Expr({str(self)!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Expr) and self.node == other.node

    def __hash__(self):
        return hash(self.node)


def parse(src: str) -> Expr:
    """Parse ``src`` into an :class:`Expr`; raises :class:`ExprSyntaxError`."""
    return Expr(_Parser(src).parse())
