"""Parser for the scalar-expression grammar.

Infix with precedence ``^`` (integer exponents) above unary minus above
``*``/``/`` above ``+``/``-``.  Functions: sin, cos, exp.  Variables are
``x1``..``xN`` by default; scenario paths use ``t``, so a custom name table
can be supplied.  Decimal literals are parsed exactly (Fraction), so
``0.5`` enters the tree as the rational 1/2.
"""

from __future__ import annotations

from fractions import Fraction

from . import _expr as ex
from .errors import ParseError

_FUNCTIONS = {"sin": ex.sin, "cos": ex.cos, "exp": ex.exp}


class _Token:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind, text, pos):
        self.kind = kind
        self.text = text
        self.pos = pos


def _tokenize(s):
    toks = []
    i = 0
    n = len(s)
    while i < n:
        ch = s[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and s[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (s[j].isdigit() or (s[j] == "." and not seen_dot)):
                if s[j] == ".":
                    seen_dot = True
                j += 1
            # scientific exponent
            if j < n and s[j] in "eE":
                k = j + 1
                if k < n and s[k] in "+-":
                    k += 1
                if k < n and s[k].isdigit():
                    while k < n and s[k].isdigit():
                        k += 1
                    j = k
            toks.append(_Token("num", s[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (s[j].isalnum() or s[j] == "_"):
                j += 1
            toks.append(_Token("name", s[i:j], i))
            i = j
            continue
        if ch in "+-*/^()":
            toks.append(_Token(ch, ch, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    toks.append(_Token("end", "", n))
    return toks


class _Parser:
    def __init__(self, tokens, names):
        self.toks = tokens
        self.i = 0
        self.names = names

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None):
        t = self.toks[self.i]
        if kind is not None and t.kind != kind:
            raise ParseError(f"expected {kind!r}, found {t.text or 'end'!r}",
                             t.pos)
        self.i += 1
        return t

    # sum := product (('+'|'-') product)*
    def sum(self):
        e = self.product()
        while self.peek().kind in "+-":
            op = self.take().kind
            rhs = self.product()
            e = ex.add(e, rhs) if op == "+" else ex.sub(e, rhs)
        return e

    # product := unary (('*'|'/') unary)*
    def product(self):
        e = self.unary()
        while self.peek().kind in "*/":
            op = self.take().kind
            rhs = self.unary()
            if op == "*":
                e = ex.mul(e, rhs)
            else:
                e = ex.div(e, rhs)
        return e

    # unary := '-' unary | power
    def unary(self):
        if self.peek().kind == "-":
            self.take()
            return ex.neg(self.unary())
        if self.peek().kind == "+":
            self.take()
            return self.unary()
        return self.power()

    # power := atom ('^' exponent)?   (right-associative)
    def power(self):
        base = self.atom()
        if self.peek().kind == "^":
            tok = self.take()
            n = self.exponent(tok)
            return ex.pow_int(base, n)
        return base

    def exponent(self, op_tok):
        sign = 1
        t = self.peek()
        parens = False
        if t.kind == "(":
            self.take()
            parens = True
            t = self.peek()
        if t.kind == "-":
            self.take()
            sign = -1
            t = self.peek()
        if t.kind != "num":
            raise ParseError("exponent must be an integer literal", t.pos)
        self.take()
        if any(c in t.text for c in ".eE"):
            raise ParseError("exponent must be an integer", t.pos)
        if parens:
            self.take("(") if False else self.take(")")
        return sign * int(t.text)

    def atom(self):
        t = self.peek()
        if t.kind == "num":
            self.take()
            return ex.num(_parse_number(t))
        if t.kind == "name":
            self.take()
            if t.text in _FUNCTIONS:
                self.take("(")
                arg = self.sum()
                self.take(")")
                return _FUNCTIONS[t.text](arg)
            idx = self.names.get(t.text)
            if idx is None:
                raise ParseError(f"unknown variable {t.text!r}", t.pos)
            return ex.var(idx)
        if t.kind == "(":
            self.take()
            e = self.sum()
            self.take(")")
            return e
        raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.pos)


def _parse_number(tok):
    try:
        return Fraction(tok.text)  # exact for decimal and scientific forms
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"bad numeric literal {tok.text!r}", tok.pos)


def default_names(dim: int) -> dict[str, int]:
    return {f"x{i + 1}": i for i in range(dim)}


def parse_expression(text: str, names: dict[str, int]) -> ex.Expr:
    """Parse `text` with the given variable-name table."""
    p = _Parser(_tokenize(text), names)
    e = p.sum()
    t = p.peek()
    if t.kind != "end":
        raise ParseError(f"trailing input {t.text!r}", t.pos)
    return e
