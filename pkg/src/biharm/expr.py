"""Parser and evaluator for the model expression language.

Infix grammar with standard precedence, `^` for powers (right associative,
binding tighter than unary minus so ``-a^b`` is ``-(a^b)``), and a fixed set
of one-argument functions.  No implicit multiplication, no constant folding:
the tree mirrors the source so errors can point at subexpressions.

Evaluation is generic over the scalar type: floats give plain values, jets
from :mod:`biharm.autodiff` propagate derivatives through every node.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

from . import autodiff as ad

FUNCTION_NAMES = tuple(sorted(ad.FUNCTIONS))

VAR_RE = re.compile(r"[a-z][a-z0-9_]*\Z")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or a function name
    arg: "Expression"


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: "Expression"
    right: "Expression"


Expression = Union[Const, Var, Unary, Binary]


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        self.offset = offset
        self.expected = expected
        detail = f" (expected one of: {', '.join(expected)})" if expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class UnknownFunctionError(ExprSyntaxError):
    pass


class ArityError(ExprSyntaxError):
    pass


class EvalError(ValueError):
    pass


class UnboundVariableError(EvalError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unbound variable '{name}'")


class EvalDomainError(EvalError):
    def __init__(self, message: str, node: Expression):
        self.node = node
        super().__init__(f"{message} in subexpression '{to_string(node)}'")


# ---------------------------------------------------------------------------
# tokenizer / recursive-descent parser
# ---------------------------------------------------------------------------

_NUM_RE = re.compile(r"(?:\d+(?:\.\d+)?|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[a-z][a-z0-9_]*")
_OPS = "+-*/^(),"

_ATOM_EXPECTED = ("number", "identifier", "'('", "'-'")


class _Parser:
    def __init__(self, source: str):
        self.src = source
        self.tokens: list[tuple[str, str, int]] = []  # (kind, text, offset)
        pos = 0
        n = len(source)
        while pos < n:
            ch = source[pos]
            if ch.isspace():
                pos += 1
                continue
            m = _NUM_RE.match(source, pos)
            if m:
                self.tokens.append(("num", m.group(), pos))
                pos = m.end()
                continue
            m = _IDENT_RE.match(source, pos)
            if m:
                self.tokens.append(("ident", m.group(), pos))
                pos = m.end()
                continue
            if ch in _OPS:
                self.tokens.append((ch, ch, pos))
                pos += 1
                continue
            raise ExprSyntaxError(f"unexpected character {ch!r}", pos)
        self.tokens.append(("eof", "", n))
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str, expected: tuple[str, ...]):
        tok = self.peek()
        if tok[0] != kind:
            raise ExprSyntaxError(f"unexpected token {tok[1]!r}" if tok[0] != "eof"
                                  else "unexpected end of input", tok[2], expected)
        return self.advance()

    # expr := term (('+'|'-') term)*
    def parse_expr(self) -> Expression:
        node = self.parse_term()
        while self.peek()[0] in ("+", "-"):
            op = self.advance()[0]
            node = Binary(op, node, self.parse_term())
        return node

    # term := unary (('*'|'/') unary)*
    def parse_term(self) -> Expression:
        node = self.parse_unary()
        while self.peek()[0] in ("*", "/"):
            op = self.advance()[0]
            node = Binary(op, node, self.parse_unary())
        return node

    # unary := '-' unary | power
    def parse_unary(self) -> Expression:
        if self.peek()[0] == "-":
            self.advance()
            return Unary("neg", self.parse_unary())
        return self.parse_power()

    # power := atom ('^' unary)?   (right associative via unary -> power)
    def parse_power(self) -> Expression:
        node = self.parse_atom()
        if self.peek()[0] == "^":
            self.advance()
            return Binary("^", node, self.parse_unary())
        return node

    def parse_atom(self) -> Expression:
        kind, text, offset = self.peek()
        if kind == "num":
            self.advance()
            return Const(float(text))
        if kind == "ident":
            self.advance()
            if self.peek()[0] == "(":
                if text not in ad.FUNCTIONS:
                    raise UnknownFunctionError(f"unknown function '{text}'", offset)
                self.advance()
                arg = self.parse_expr()
                if self.peek()[0] == ",":
                    raise ArityError(f"function '{text}' takes exactly one argument",
                                     self.peek()[2])
                self.expect(")", ("')'",))
                return Unary(text, arg)
            if text in ad.FUNCTIONS:
                raise ExprSyntaxError(
                    f"'{text}' is a reserved function name, not a variable", offset)
            return Var(text)
        if kind == "(":
            self.advance()
            node = self.parse_expr()
            self.expect(")", ("')'",))
            return node
        raise ExprSyntaxError(
            f"unexpected token {text!r}" if kind != "eof" else "unexpected end of input",
            offset, _ATOM_EXPECTED)


def parse(source: str) -> Expression:
    """Parse source text into an expression tree."""
    p = _Parser(source)
    node = p.parse_expr()
    kind, text, offset = p.peek()
    if kind != "eof":
        raise ExprSyntaxError(f"unexpected trailing input {text!r}", offset)
    return node


# ---------------------------------------------------------------------------
# evaluation / queries / printing
# ---------------------------------------------------------------------------

def evaluate(e: Expression, bindings: Mapping[str, object]):
    """Value of the expression under the bindings (floats or jets)."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return bindings[e.name]
        except KeyError:
            raise UnboundVariableError(e.name) from None
    if isinstance(e, Unary):
        arg = evaluate(e.arg, bindings)
        if e.op == "neg":
            return -arg
        try:
            return ad.FUNCTIONS[e.op](arg)
        except ad.ScalarDomainError as err:
            raise EvalDomainError(str(err), e) from None
    if isinstance(e, Binary):
        left = evaluate(e.left, bindings)
        right = evaluate(e.right, bindings)
        try:
            if e.op == "+":
                return left + right
            if e.op == "-":
                return left - right
            if e.op == "*":
                return left * right
            if e.op == "/":
                if isinstance(right, ad.Jet3):
                    return left / right
                if right == 0.0:
                    raise ad.ScalarDomainError("division by zero")
                return left / right
            if e.op == "^":
                return ad.powr(left, right)
        except ad.ScalarDomainError as err:
            raise EvalDomainError(str(err), e) from None
        except ZeroDivisionError:
            raise EvalDomainError("division by zero", e) from None
    raise TypeError(f"not an expression node: {e!r}")


def free_vars(e: Expression) -> frozenset[str]:
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Unary):
        return free_vars(e.arg)
    if isinstance(e, Binary):
        return free_vars(e.left) | free_vars(e.right)
    raise TypeError(f"not an expression node: {e!r}")


_PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(e: Expression) -> int:
    if isinstance(e, Const):
        return _PREC_UNARY if e.value < 0 else _PREC_ATOM
    if isinstance(e, Var):
        return _PREC_ATOM
    if isinstance(e, Unary):
        return _PREC_UNARY if e.op == "neg" else _PREC_ATOM
    return {"+": _PREC_ADD, "-": _PREC_ADD, "*": _PREC_MUL,
            "/": _PREC_MUL, "^": _PREC_POW}[e.op]


def _wrap(e: Expression, minimum: int) -> str:
    s = to_string(e)
    return f"({s})" if _prec(e) < minimum else s


def to_string(e: Expression) -> str:
    """Print the tree; output reparses to a structurally equal tree."""
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return "-" + _wrap(e.arg, _PREC_UNARY)
        return f"{e.op}({to_string(e.arg)})"
    if isinstance(e, Binary):
        if e.op in ("+", "-"):
            return _wrap(e.left, _PREC_ADD) + e.op + _wrap(e.right, _PREC_MUL)
        if e.op in ("*", "/"):
            return _wrap(e.left, _PREC_MUL) + e.op + _wrap(e.right, _PREC_UNARY)
        # '^': base must be atomic, exponent may carry unary minus
        return _wrap(e.left, _PREC_ATOM) + "^" + _wrap(e.right, _PREC_UNARY)
    raise TypeError(f"not an expression node: {e!r}")
