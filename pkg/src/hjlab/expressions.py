"""Small expression grammar for potentials, drifts, winding potentials and data.

An expression is a sum of terms, each one of

    C                       constant
    A*sin(W1*x1 + ... + B)  sine wave (A, B optional; "x" is an alias for "x1")
    A*cos(...)              cosine wave
    A*abs(affine)           absolute value of an affine form
    A*min(affine, affine)   pointwise min of two or more affine forms
    A*max(affine, affine)   pointwise max

Coefficients are numeric literals, optionally scaled by pi ("2pi", "0.5pi",
"pi"). The restriction buys two things the rest of the package relies on:
Lipschitz constants are computable term by term, and waves with integer
frequency (in units of 2pi) are exactly periodic on the unit cell.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class _Affine:
    """w . x + b"""

    w: tuple
    b: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        w = np.asarray(self.w)
        return x @ w + self.b


@dataclass(frozen=True)
class _Term:
    kind: str  # const | sin | cos | abs | min | max
    coef: float = 1.0
    args: tuple = field(default_factory=tuple)  # _Affine operands


class Expression:
    """Parsed expression over points in R^n, vectorized over leading axes."""

    def __init__(self, terms, dim, source=""):
        self.terms = tuple(terms)
        self.dim = dim
        self.source = source

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected points with last axis {self.dim}, got shape {x.shape}")
        out = np.zeros(x.shape[:-1])
        for t in self.terms:
            if t.kind == "const":
                out = out + t.coef
            elif t.kind == "sin":
                out = out + t.coef * np.sin(t.args[0](x))
            elif t.kind == "cos":
                out = out + t.coef * np.cos(t.args[0](x))
            elif t.kind == "abs":
                out = out + t.coef * np.abs(t.args[0](x))
            elif t.kind == "min":
                out = out + t.coef * np.minimum.reduce([a(x) for a in t.args])
            else:
                out = out + t.coef * np.maximum.reduce([a(x) for a in t.args])
        return out

    def gradient(self, x):
        """Analytic gradient; only available when every term is smooth."""
        if not self.is_smooth():
            raise ValueError(f"expression {self.source!r} has kinked terms; no gradient")
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (self.dim,))
        for t in self.terms:
            if t.kind == "const":
                continue
            a = t.args[0]
            w = np.asarray(a.w)
            if t.kind == "sin":
                out = out + t.coef * np.cos(a(x))[..., None] * w
            else:
                out = out - t.coef * np.sin(a(x))[..., None] * w
        return out

    def is_smooth(self):
        return all(t.kind in ("const", "sin", "cos") for t in self.terms)

    def lipschitz(self):
        """Upper bound on the Euclidean Lipschitz constant, summed over terms."""
        k = 0.0
        for t in self.terms:
            if t.kind == "const":
                continue
            norms = [math.sqrt(sum(c * c for c in a.w)) for a in t.args]
            k += abs(t.coef) * max(norms)
        return k

    def is_cell_periodic(self, tol=1e-12):
        """True when the expression has period one along every axis."""
        for t in self.terms:
            if t.kind == "const":
                continue
            if t.kind not in ("sin", "cos"):
                if any(any(c != 0.0 for c in a.w) for a in t.args):
                    return False
                continue
            for c in t.args[0].w:
                if abs(c / _TWO_PI - round(c / _TWO_PI)) > tol:
                    return False
        return True

    def __repr__(self):
        return f"Expression({self.source!r}, dim={self.dim})"


_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)?pi\b|\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?")
_VAR = re.compile(r"x(\d*)\b")
_FUNC = re.compile(r"(sin|cos|abs|min|max)\b")


class _Parser:
    def __init__(self, text, dim):
        self.text = text
        self.dim = dim
        self.pos = 0

    def error(self, msg):
        raise ValueError(f"bad expression {self.text!r} at position {self.pos}: {msg}")

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def eat(self, ch):
        if self.peek() != ch:
            self.error(f"expected {ch!r}")
        self.pos += 1

    def try_number(self):
        self.skip_ws()
        m = _NUMBER.match(self.text, self.pos)
        if not m:
            return None
        self.pos = m.end()
        s = m.group(0)
        if s.endswith("pi"):
            head = s[:-2]
            return (float(head) if head else 1.0) * math.pi
        return float(s)

    def parse(self):
        terms = []
        sign = 1.0
        if self.peek() == "-":
            self.eat("-")
            sign = -1.0
        elif self.peek() == "+":
            self.eat("+")
        terms.append(self.term(sign))
        while self.peek() in ("+", "-"):
            sign = 1.0 if self.peek() == "+" else -1.0
            self.pos += 1
            terms.append(self.term(sign))
        self.skip_ws()
        if self.pos != len(self.text):
            self.error("trailing input")
        return terms

    def term(self, sign):
        coef = self.try_number()
        if coef is not None:
            if self.peek() == "*":
                self.eat("*")
            else:
                return _Term("const", sign * coef)
        else:
            coef = 1.0
        self.skip_ws()
        m = _FUNC.match(self.text, self.pos)
        if not m:
            self.error("expected sin/cos/abs/min/max term")
        fname = m.group(1)
        self.pos = m.end()
        self.eat("(")
        args = [self.affine()]
        while self.peek() == ",":
            self.eat(",")
            args.append(self.affine())
        self.eat(")")
        if fname in ("sin", "cos", "abs") and len(args) != 1:
            self.error(f"{fname} takes one argument")
        if fname in ("min", "max") and len(args) < 2:
            self.error(f"{fname} takes at least two arguments")
        return _Term(fname, sign * coef, tuple(args))

    def affine(self):
        w = [0.0] * self.dim
        b = 0.0
        sign = 1.0
        if self.peek() == "-":
            self.eat("-")
            sign = -1.0
        elif self.peek() == "+":
            self.eat("+")
        while True:
            coef = self.try_number()
            if coef is not None and self.peek() == "*":
                self.eat("*")
                axis = self.var()
                w[axis] += sign * coef
            elif coef is not None:
                b += sign * coef
            else:
                axis = self.var()
                w[axis] += sign
            nxt = self.peek()
            if nxt in ("+", "-"):
                sign = 1.0 if nxt == "+" else -1.0
                self.pos += 1
                continue
            break
        return _Affine(tuple(w), b)

    def var(self):
        self.skip_ws()
        m = _VAR.match(self.text, self.pos)
        if not m:
            self.error("expected variable x or x<i>")
        self.pos = m.end()
        idx = int(m.group(1)) - 1 if m.group(1) else 0
        if not 0 <= idx < self.dim:
            self.error(f"variable x{idx + 1} out of range for dim {self.dim}")
        return idx


def parse_expression(text, dim=1):
    """Parse an expression string; raises ValueError with position on bad input."""
    text = text.strip()
    if not text:
        raise ValueError("empty expression")
    terms = _Parser(text, dim).parse()
    return Expression(terms, dim, source=text)


def zero_expression(dim=1):
    return Expression([_Term("const", 0.0)], dim, source="0")
