"""Mini-language for boundary and initial-condition expressions.

Supported: ``+ - * / ^``, unary minus, parentheses, the functions ``sin``,
``cos``, ``exp``, ``sqrt``, numeric literals, the constants ``pi`` and ``e``,
and the coordinates ``x``, ``y``, ``z``.  Expressions compile to callables
that accept scalars or numpy arrays.  Parse errors name the offending token.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import ExpressionError

_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt}
_CONSTS = {"pi": np.pi, "e": np.e}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            snippet = text[pos:].lstrip()
            if not snippet:
                break
            raise ExpressionError(
                f"unexpected character {snippet[0]!r} at position {pos} in {text!r}"
            )
        pos = m.end()
        if m.group("num") is not None:
            tokens.append(("num", float(m.group("num"))))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name")))
        else:
            tokens.append(("op", m.group("op")))
    tokens.append(("end", None))
    return tokens


class _Parser:
    """Recursive descent over: expr > term > unary > power > atom."""

    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, what: str):
        kind, val = self.peek()
        shown = "end of expression" if kind == "end" else repr(val)
        raise ExpressionError(f"expected {what}, found {shown} in {self.text!r}")

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail("end of expression")
        return node

    def expr(self):
        node = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            op = self.take()[1]
            rhs = self.term()
            node = ("+" if op == "+" else "-", node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            op = self.take()[1]
            rhs = self.unary()
            node = (op, node, rhs)
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return ("neg", self.unary())
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            # right-associative; exponent may itself carry a unary minus
            return ("^", base, self.unary())
        return base

    def atom(self):
        kind, val = self.peek()
        if kind == "num":
            self.take()
            return ("const", val)
        if kind == "name":
            self.take()
            if self.peek() == ("op", "("):
                if val not in _FUNCS:
                    raise ExpressionError(f"unknown function {val!r} in {self.text!r}")
                self.take()
                arg = self.expr()
                if self.peek() != ("op", ")"):
                    self.fail("')'")
                self.take()
                return ("call", val, arg)
            if val in _CONSTS:
                return ("const", _CONSTS[val])
            if val in ("x", "y", "z"):
                return ("var", val)
            raise ExpressionError(f"unknown name {val!r} in {self.text!r}")
        if kind == "op" and val == "(":
            self.take()
            node = self.expr()
            if self.peek() != ("op", ")"):
                self.fail("')'")
            self.take()
            return node
        self.fail("a number, name, or '('")


def _compile(node):
    tag = node[0]
    if tag == "const":
        c = node[1]
        return lambda x, y, z: c
    if tag == "var":
        v = node[1]
        if v == "x":
            return lambda x, y, z: x
        if v == "y":
            return lambda x, y, z: y
        return lambda x, y, z: z
    if tag == "neg":
        f = _compile(node[1])
        return lambda x, y, z: -f(x, y, z)
    if tag == "call":
        fn = _FUNCS[node[1]]
        f = _compile(node[2])
        return lambda x, y, z: fn(f(x, y, z))
    a = _compile(node[1])
    b = _compile(node[2])
    if tag == "+":
        return lambda x, y, z: a(x, y, z) + b(x, y, z)
    if tag == "-":
        return lambda x, y, z: a(x, y, z) - b(x, y, z)
    if tag == "*":
        return lambda x, y, z: a(x, y, z) * b(x, y, z)
    if tag == "/":
        return lambda x, y, z: a(x, y, z) / b(x, y, z)
    if tag == "^":
        return lambda x, y, z: a(x, y, z) ** b(x, y, z)
    raise AssertionError(f"unhandled node {tag}")


class Expression:
    """Compiled scalar expression of (x, y, z)."""

    def __init__(self, text: str):
        self.text = text
        self._fn = _compile(_Parser(text).parse())

    def __call__(self, x, y, z):
        return self._fn(x, y, z)

    def __repr__(self):
        return f"Expression({self.text!r})"


def parse_expression(text: str) -> Expression:
    return Expression(text)
