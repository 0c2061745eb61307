"""Recursive-descent parser for coefficient and load expressions.

Grammar (standard precedence, left associative):

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | primary
    primary := NUMBER | 'x' | 'y' | ('exp' | 'sin') '(' expr ')' | '(' expr ')'

Parsed expressions are callables f(x) or f(x, y) accepting scalars or numpy
arrays. This intentionally tiny language covers smooth-on-subdomain
coefficient fields without shipping a scripting dependency.
"""

from __future__ import annotations

import numpy as np

from .errors import ExpressionError

_FUNCTIONS = {"exp": np.exp, "sin": np.sin}


class _Tokenizer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.tokens = []
        self._scan()
        self.index = 0

    def _scan(self):
        text = self.text
        i = 0
        while i < len(text):
            ch = text[i]
            if ch.isspace():
                i += 1
                continue
            if ch in "+-*/()":
                self.tokens.append(("op", ch, i))
                i += 1
                continue
            if ch.isdigit() or ch == ".":
                j = i
                seen_exp = False
                while j < len(text):
                    c = text[j]
                    if c.isdigit() or c == ".":
                        j += 1
                    elif c in "eE" and j + 1 < len(text) and (
                        text[j + 1].isdigit() or text[j + 1] in "+-"
                    ):
                        seen_exp = True
                        j += 2
                    elif seen_exp and c in "+-" and text[j - 1] in "eE":
                        j += 1
                    else:
                        break
                try:
                    value = float(text[i:j])
                except ValueError:
                    raise ExpressionError(
                        f"bad number {text[i:j]!r} at position {i}"
                    ) from None
                self.tokens.append(("num", value, i))
                i = j
                continue
            if ch.isalpha():
                j = i
                while j < len(text) and text[j].isalpha():
                    j += 1
                self.tokens.append(("name", text[i:j], i))
                i = j
                continue
            raise ExpressionError(f"unexpected character {ch!r} at position {i}")
        self.tokens.append(("eof", None, len(text)))

    def peek(self):
        return self.tokens[self.index]

    def next(self):
        tok = self.tokens[self.index]
        self.index += 1
        return tok


class Expression:
    """Compiled expression; call with x (and y for 2-d fields)."""

    def __init__(self, fn, text: str):
        self._fn = fn
        self.text = text

    def __call__(self, x, y=0.0):
        return self._fn(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def __repr__(self):
        return f"Expression({self.text!r})"


def parse_expression(text: str) -> Expression:
    tk = _Tokenizer(text)

    def parse_expr():
        node = parse_term()
        while True:
            kind, val, _ = tk.peek()
            if kind == "op" and val in "+-":
                tk.next()
                rhs = parse_term()
                if val == "+":
                    node = (lambda l, r: lambda x, y: l(x, y) + r(x, y))(node, rhs)
                else:
                    node = (lambda l, r: lambda x, y: l(x, y) - r(x, y))(node, rhs)
            else:
                return node

    def parse_term():
        node = parse_unary()
        while True:
            kind, val, _ = tk.peek()
            if kind == "op" and val in "*/":
                tk.next()
                rhs = parse_unary()
                if val == "*":
                    node = (lambda l, r: lambda x, y: l(x, y) * r(x, y))(node, rhs)
                else:
                    node = (lambda l, r: lambda x, y: l(x, y) / r(x, y))(node, rhs)
            else:
                return node

    def parse_unary():
        kind, val, _ = tk.peek()
        if kind == "op" and val == "-":
            tk.next()
            inner = parse_unary()
            return lambda x, y: -inner(x, y)
        return parse_primary()

    def parse_primary():
        kind, val, pos = tk.next()
        if kind == "num":
            # Broadcast constants against the evaluation points.
            return lambda x, y, _v=val: _v + 0.0 * (x + y)
        if kind == "name":
            if val == "x":
                return lambda x, y: x
            if val == "y":
                return lambda x, y: y
            if val in _FUNCTIONS:
                fn = _FUNCTIONS[val]
                k2, v2, p2 = tk.next()
                if not (k2 == "op" and v2 == "("):
                    raise ExpressionError(f"expected '(' after {val} at position {p2}")
                inner = parse_expr()
                k3, v3, p3 = tk.next()
                if not (k3 == "op" and v3 == ")"):
                    raise ExpressionError(f"expected ')' at position {p3}")
                return lambda x, y, _f=fn, _i=inner: _f(_i(x, y))
            raise ExpressionError(f"unknown identifier {val!r} at position {pos}")
        if kind == "op" and val == "(":
            inner = parse_expr()
            k2, v2, p2 = tk.next()
            if not (k2 == "op" and v2 == ")"):
                raise ExpressionError(f"expected ')' at position {p2}")
            return inner
        raise ExpressionError(f"unexpected token at position {pos}")

    root = parse_expr()
    kind, _, pos = tk.peek()
    if kind != "eof":
        raise ExpressionError(f"trailing input at position {pos}")
    return Expression(lambda x, y: np.asarray(root(x, y), dtype=float), text)
