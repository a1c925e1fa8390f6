"""
Exact polynomial arithmetic over monomials with rational exponents.

A :class:`Poly` maps exponent tuples (one rational per variable in
``VARS``) to rational coefficients.  It supports the handful of operations
the coefficient construction needs: sums, products, integer powers,
partial derivatives and substitution.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

VARS = ("Kc", "Ktau", "z", "rho", "r", "u", "m", "mx", "mxx", "a", "ad", "add", "alpha", "beta", "Y")
INDEX = {name: i for i, name in enumerate(VARS)}
ZERO_EXP = (Fraction(0),) * len(VARS)


def _frac(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    return Fraction(v).limit_denominator(10 ** 9)


class Poly:
    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {}
        for k, c in (terms or {}).items():
            c = _frac(c)
            if c != 0:
                self.terms[k] = self.terms.get(k, Fraction(0)) + c
                if self.terms[k] == 0:
                    del self.terms[k]

    @classmethod
    def const(cls, c):
        return cls({ZERO_EXP: c})

    @classmethod
    def mono(cls, coef=1, **powers):
        e = list(ZERO_EXP)
        for name, p in powers.items():
            e[INDEX[name]] = _frac(p)
        return cls({tuple(e): coef})

    @classmethod
    def var(cls, name):
        return cls.mono(1, **{name: 1})

    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def _coerce(self, other):
        return other if isinstance(other, Poly) else Poly.const(other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            s = out.get(k, Fraction(0)) + c
            if s == 0:
                out.pop(k, None)
            else:
                out[k] = s
        p = Poly()
        p.terms = out
        return p

    __radd__ = __add__

    def __neg__(self):
        p = Poly()
        p.terms = {k: -c for k, c in self.terms.items()}
        return p

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        out = {}
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                s = out.get(k, Fraction(0)) + c1 * c2
                if s == 0:
                    out.pop(k, None)
                else:
                    out[k] = s
        p = Poly()
        p.terms = out
        return p

    __rmul__ = __mul__

    def __truediv__(self, other):
        """Division by a scalar or a single monomial."""
        other = self._coerce(other)
        if len(other.terms) != 1:
            raise ValueError("can only divide by a monomial")
        (k, c), = other.terms.items()
        inv = Poly({tuple(-e for e in k): 1 / c})
        return self * inv

    def __pow__(self, n):
        if not isinstance(n, int) or n < 0:
            if len(self.terms) == 1:
                (k, c), = self.terms.items()
                n = _frac(n)
                if c != 1 and n.denominator != 1:
                    raise ValueError("fractional power of a monomial needs unit coefficient")
                coef = c ** int(n) if n.denominator == 1 else Fraction(1)
                return Poly({tuple(e * n for e in k): coef})
            raise ValueError("only non-negative integer powers of sums")
        out = Poly.const(1)
        for _ in range(n):
            out = out * self
        return out

    def diff(self, name):
        i = INDEX[name]
        out = {}
        for k, c in self.terms.items():
            if k[i] != 0:
                kk = list(k)
                kk[i] -= 1
                out[tuple(kk)] = c * k[i]
        return Poly(out)

    def degree(self, name):
        i = INDEX[name]
        return max((k[i] for k in self.terms), default=Fraction(0))

    def depends_on(self, name):
        i = INDEX[name]
        return any(k[i] != 0 for k in self.terms)

    def coeff(self, name, power):
        """Coefficient of name**power, as a Poly free of ``name``."""
        i = INDEX[name]
        power = _frac(power)
        out = {}
        for k, c in self.terms.items():
            if k[i] == power:
                kk = list(k)
                kk[i] = Fraction(0)
                out[tuple(kk)] = c
        return Poly(out)

    def subs(self, name, value):
        """Replace ``name`` by a Poly.

        Non-negative integer powers expand; other powers need ``value`` to be
        a monomial.
        """
        i = INDEX[name]
        value = self._coerce(value)
        out = Poly()
        cache = {}
        for k, c in self.terms.items():
            e = k[i]
            kk = list(k)
            kk[i] = Fraction(0)
            rest = Poly({tuple(kk): c})
            if e == 0:
                out = out + rest
                continue
            if e not in cache:
                if e.denominator == 1 and e > 0:
                    cache[e] = value ** int(e)
                else:
                    cache[e] = value ** e
            out = out + rest * cache[e]
        return out

    def monomials(self):
        """List of (coefficient, {var: exponent}) with zero exponents dropped."""
        out = []
        for k, c in sorted(self.terms.items()):
            out.append((c, {VARS[i]: e for i, e in enumerate(k) if e != 0}))
        return out

    def evaluate(self, **values):
        """Numerical value with variables bound to floats or arrays."""
        total = 0.0
        for c, powers in self.monomials():
            term = float(c)
            for name, e in powers.items():
                v = values[name]
                term = term * (np.power(v, int(e)) if e.denominator == 1 else np.power(v, float(e)))
            total = total + term
        return total

    def __repr__(self):
        parts = []
        for c, powers in self.monomials():
            s = "*".join(f"{n}^{e}" if e != 1 else n for n, e in powers.items())
            parts.append(f"({c})" + ("*" + s if s else ""))
        return " + ".join(parts) if parts else "0"
