"""Tiny arithmetic expression parser for user-supplied warping profiles A(t).

Supports +, -, *, /, ^ (or **), parentheses, the variable t, the constants
pi and e, and the functions exp, log, sqrt, sin, cos, sinh, cosh, tanh, abs,
pow(a, b).  Compiles to a closure evaluating on numpy arrays.
"""

import re

import numpy as np

from .errors import ConfigError

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)

_FUNCS = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "abs": np.abs,
}

_CONSTS = {"pi": np.pi, "e": np.e}


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise ConfigError("cannot tokenize %r at position %d" % (text, pos))
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
    def __init__(self, tokens, var="t"):
        self.tokens = tokens
        self.var = var
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        kind, val = self.next()
        if kind != "op" or val != op:
            raise ConfigError("expected %r, got %r" % (op, val))

    def expr(self):
        node = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.next()
            rhs = self.term()
            node = (op, node, rhs)
        return node

    def term(self):
        node = self.factor()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            _, op = self.next()
            rhs = self.factor()
            node = (op, node, rhs)
        return node

    def factor(self):
        node = self.unary()
        if self.peek() in (("op", "^"), ("op", "**")):
            self.next()
            rhs = self.factor()  # right associative
            node = ("^", node, rhs)
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.next()
            return ("neg", self.unary())
        return self.atom()

    def atom(self):
        kind, val = self.next()
        if kind == "num":
            return ("num", val)
        if kind == "name":
            if val == self.var:
                return ("var",)
            if val in _CONSTS:
                return ("num", _CONSTS[val])
            if val == "pow":
                self.expect("(")
                a = self.expr()
                self.expect(",")
                b = self.expr()
                self.expect(")")
                return ("^", a, b)
            if val in _FUNCS:
                self.expect("(")
                a = self.expr()
                self.expect(")")
                return ("call", val, a)
            raise ConfigError("unknown name %r in expression" % val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ConfigError("unexpected token %r" % (val,))


def _evaluate(node, t):
    op = node[0]
    if op == "num":
        return node[1]
    if op == "var":
        return t
    if op == "neg":
        return -_evaluate(node[1], t)
    if op == "call":
        return _FUNCS[node[1]](_evaluate(node[2], t))
    a = _evaluate(node[1], t)
    b = _evaluate(node[2], t)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    if op == "^":
        return a ** b
    raise ConfigError("bad node %r" % (node,))


def compile_expression(text, var="t"):
    """Compile an expression in one free variable to a vectorized callable."""
    parser = _Parser(_tokenize(text), var=var)
    tree = parser.expr()
    kind, val = parser.peek()
    if kind != "end":
        raise ConfigError("trailing input %r in expression" % (val,))

    def fn(t):
        return np.asarray(_evaluate(tree, np.asarray(t, dtype=float)), dtype=float)

    fn.source = text
    return fn
