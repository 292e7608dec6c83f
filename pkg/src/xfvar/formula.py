"""Arithmetic expression parser and vectorized evaluator.

Grammar (standard infix, whitespace-insensitive):

    expr    := mul (('+' | '-') mul)*
    mul     := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?          # right-associative
    primary := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

'^' binds tighter than unary minus, so -w^2 is -(w^2); exponents parse a
unary so w^-2 works. Functions: exp, log, abs, sigmoid, sqrt (1 arg),
min, max (2 args). Evaluation is over numpy arrays or scalars and must
produce finite values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ParseError, XfvarError


class FormulaEvalError(XfvarError):
    """Evaluation produced a non-finite value or hit a missing variable."""


_FUNCTIONS = {
    "exp": (1, np.exp),
    "log": (1, np.log),
    "abs": (1, np.abs),
    "sigmoid": (1, expit),
    "sqrt": (1, np.sqrt),
    "min": (2, np.minimum),
    "max": (2, np.maximum),
}

_NAME_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_NAME_CONT = _NAME_START | set("0123456789")
_DIGITS = set("0123456789")


def _tokenize(text):
    """Tokens as (kind, value, byte_offset); kinds: num, name, op, end."""
    tokens = []
    i = 0
    off = 0
    n = len(text)
    while i < n:
        ch = text[i]
        blen = len(ch.encode("utf-8"))
        if ch.isspace():
            i += 1
            off += blen
            continue
        if ch in "+-*/^(),":
            tokens.append(("op", ch, off))
            i += 1
            off += blen
            continue
        if ch in _DIGITS or (ch == "." and i + 1 < n and text[i + 1] in _DIGITS):
            j = i
            seen_dot = False
            while j < n and (text[j] in _DIGITS or (text[j] == "." and not seen_dot)):
                seen_dot = seen_dot or text[j] == "."
                j += 1
            if j < n and text[j] in "eE":
                j2 = j + 1
                if j2 < n and text[j2] in "+-":
                    j2 += 1
                if j2 < n and text[j2] in _DIGITS:
                    j = j2
                    while j < n and text[j] in _DIGITS:
                        j += 1
            lit = text[i:j]
            try:
                value = float(lit)
            except ValueError:
                raise ParseError(f"bad number literal {lit!r}", off) from None
            tokens.append(("num", value, off))
            off += len(lit.encode("utf-8"))
            i = j
            continue
        if ch in _NAME_START:
            j = i
            start = off
            while j < n and text[j] in _NAME_CONT:
                off += len(text[j].encode("utf-8"))
                j += 1
            tokens.append(("name", text[i:j], start))
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", off)
    tokens.append(("end", "", off))
    return tokens


@dataclass(frozen=True)
class Formula:
    """A parsed expression; `variables` lists the names it references."""

    source: str
    root: tuple
    variables: tuple

    def evaluate(self, env):
        """Evaluate against {name: array-or-scalar}; raises on non-finite output."""
        with np.errstate(all="ignore"):
            out = _eval_node(self.root, env)
        arr = np.asarray(out, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise FormulaEvalError(f"formula {self.source!r} produced a non-finite value")
        return out

    def __str__(self):
        return self.source


def _eval_node(node, env):
    op = node[0]
    if op == "num":
        return node[1]
    if op == "var":
        try:
            return env[node[1]]
        except KeyError:
            raise FormulaEvalError(f"no value bound for variable {node[1]!r}") from None
    if op == "neg":
        return -_eval_node(node[1], env)
    if op == "call":
        fn = _FUNCTIONS[node[1]][1]
        return fn(*[_eval_node(a, env) for a in node[2]])
    a = _eval_node(node[1], env)
    b = _eval_node(node[2], env)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    if op == "^":
        return np.power(a, b)
    raise FormulaEvalError(f"corrupt formula node {op!r}")


def parse_formula(text: str, allowed_names) -> Formula:
    """Parse an arithmetic expression referencing only allowed_names.

    Raises ParseError with the byte offset of the problem for syntax
    errors, unknown identifiers, and wrong function arity.
    """
    allowed = set(allowed_names)
    tokens = _tokenize(text)
    pos = [0]
    used = set()

    def peek():
        return tokens[pos[0]]

    def advance():
        tok = tokens[pos[0]]
        pos[0] += 1
        return tok

    def expect_op(ch):
        kind, value, off = advance()
        if kind != "op" or value != ch:
            raise ParseError(f"expected {ch!r}", off)

    def parse_expr():
        node = parse_mul()
        while peek()[0] == "op" and peek()[1] in "+-":
            _, op, _ = advance()
            node = (op, node, parse_mul())
        return node

    def parse_mul():
        node = parse_unary()
        while peek()[0] == "op" and peek()[1] in "*/":
            _, op, _ = advance()
            node = (op, node, parse_unary())
        return node

    def parse_unary():
        if peek()[0] == "op" and peek()[1] == "-":
            advance()
            return ("neg", parse_unary())
        return parse_power()

    def parse_power():
        node = parse_primary()
        if peek()[0] == "op" and peek()[1] == "^":
            advance()
            node = ("^", node, parse_unary())
        return node

    def parse_primary():
        kind, value, off = advance()
        if kind == "num":
            return ("num", value)
        if kind == "op" and value == "(":
            node = parse_expr()
            expect_op(")")
            return node
        if kind == "name":
            if peek()[0] == "op" and peek()[1] == "(":
                if value not in _FUNCTIONS:
                    raise ParseError(f"unknown function {value!r}", off)
                arity, _ = _FUNCTIONS[value]
                advance()
                args = [parse_expr()]
                while peek()[0] == "op" and peek()[1] == ",":
                    advance()
                    args.append(parse_expr())
                expect_op(")")
                if len(args) != arity:
                    raise ParseError(
                        f"{value} takes {arity} argument{'s' if arity > 1 else ''}, got {len(args)}",
                        off,
                    )
                return ("call", value, tuple(args))
            if value not in allowed:
                raise ParseError(f"unknown identifier {value!r}", off)
            used.add(value)
            return ("var", value)
        raise ParseError(
            f"unexpected token {value!r}" if value else "unexpected end of input", off
        )

    root = parse_expr()
    kind, value, off = peek()
    if kind != "end":
        raise ParseError(f"unexpected token {value!r}", off)
    ordered = tuple(n for n in allowed_names if n in used)
    return Formula(text, root, ordered)
