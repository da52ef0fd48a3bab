"""Exact arithmetic in small number fields Q(theta).

Elements are coordinate vectors over Q in the power basis of a monic
integral minimal polynomial.  This is deliberately minimal: the fields that
occur here are Q, imaginary quadratic fields, and cyclotomic fields of tiny
conductor, so dense Fraction vectors with schoolbook multiplication are
plenty.

Embeddings provided:
  * complex (mpmath, root selected by index),
  * p-adic (Hensel root in Z_p, for split behaviour),
  * mod-ell reduction (root of the minimal polynomial in F_ell), used by the
    CRT linear-algebra solvers.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import mpmath


def _poly_trim(c):
    while c and c[-1] == 0:
        c.pop()
    return c


def _poly_divmod(a, b):
    # a, b lists of Fractions, b monic-ish (b[-1] invertible)
    a = list(a)
    q = [Fraction(0)] * max(0, len(a) - len(b) + 1)
    inv = 1 / b[-1]
    while len(a) >= len(b) and _poly_trim(a):
        d = len(a) - len(b)
        c = a[-1] * inv
        q[d] = c
        for i, bc in enumerate(b):
            a[d + i] -= c * bc
        _poly_trim(a)
    return q, a


def _poly_xgcd(a, b):
    # extended gcd over Q[x]; returns (g, u, v) with u*a + v*b = g
    r0, r1 = list(a), list(b)
    s0, s1 = [Fraction(1)], []
    t0, t1 = [], [Fraction(1)]
    while _poly_trim(list(r1)):
        q, r = _poly_divmod(r0, r1)
        r0, r1 = r1, r
        s0, s1 = s1, _poly_sub(s0, _poly_mul(q, s1))
        t0, t1 = t1, _poly_sub(t0, _poly_mul(q, t1))
    return r0, s0, t0


def _poly_mul(a, b):
    if not a or not b:
        return []
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                if y:
                    out[i + j] += x * y
    return _poly_trim(out)


def _poly_sub(a, b):
    out = [Fraction(0)] * max(len(a), len(b))
    for i, x in enumerate(a):
        out[i] += x
    for i, y in enumerate(b):
        out[i] -= y
    return _poly_trim(out)


class NumberField:
    """Q(theta) for a monic irreducible polynomial with integer coefficients."""

    def __init__(self, minpoly, name="theta"):
        self.minpoly = [Fraction(c) for c in minpoly]
        if self.minpoly[-1] != 1:
            raise ValueError("minimal polynomial must be monic")
        self.degree = len(self.minpoly) - 1
        self.name = name
        # x^(deg) reduced: theta^deg = -(lower part)
        self._red = [-c for c in self.minpoly[:-1]]
        self._pow_cache = self._build_pow_cache()

    def _build_pow_cache(self):
        # theta^i for i in [deg, 2*deg-2] as coordinate vectors
        n = self.degree
        cache = []
        cur = list(self._red)
        for _ in range(max(0, n - 1)):
            cache.append(list(cur))
            # multiply by theta
            nxt = [Fraction(0)] + cur[:-1]
            lead = cur[-1]
            if lead:
                for i in range(n):
                    nxt[i] += lead * self._red[i]
            cur = nxt
        return cache

    # --- element constructors -------------------------------------------
    def elem(self, coords):
        v = [Fraction(c) for c in coords]
        v += [Fraction(0)] * (self.degree - len(v))
        if len(v) != self.degree:
            raise ValueError("coordinate vector too long")
        return NFElem(self, tuple(v))

    def zero(self):
        return self.elem([0])

    def one(self):
        return self.elem([1])

    def gen(self):
        if self.degree == 1:
            return self.elem([self._red[0]])
        return self.elem([0, 1])

    def from_int(self, n):
        return self.elem([n])

    # --- ring operations on raw coordinate tuples ------------------------
    def _mul(self, a, b):
        n = self.degree
        if n == 1:
            return (a[0] * b[0],)
        raw = [Fraction(0)] * (2 * n - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    if y:
                        raw[i + j] += x * y
        out = raw[:n]
        for k in range(n, 2 * n - 1):
            c = raw[k]
            if c:
                red = self._pow_cache[k - n]
                for i in range(n):
                    out[i] += c * red[i]
        return tuple(out)

    def _inv(self, a):
        g, u, _v = _poly_xgcd(list(a), self.minpoly)
        if len(g) != 1:
            raise ZeroDivisionError("element not invertible")
        c = 1 / g[0]
        u = [x * c for x in u]
        u += [Fraction(0)] * (self.degree - len(u))
        return tuple(u[: self.degree])

    # --- embeddings -------------------------------------------------------
    def complex_roots(self, prec_bits=96):
        with mpmath.workprec(prec_bits):
            coeffs = [mpmath.mpf(int(c.numerator)) / int(c.denominator)
                      for c in reversed(self.minpoly)]
            roots = mpmath.polyroots(coeffs, maxsteps=200, extraprec=80)
        return roots

    def complex_embedding(self, root_index=0, prec_bits=96):
        root = self.complex_roots(prec_bits)[root_index]

        def emb(x):
            acc = mpmath.mpc(0)
            for c in reversed(x.coords):
                acc = acc * root + mpmath.mpf(int(c.numerator)) / int(c.denominator)
            return acc

        return emb

    def padic_roots(self, p, prec):
        """All roots of the minimal polynomial in Z_p to p^prec (simple roots)."""
        f = [c for c in self.minpoly]
        roots = []
        for r0 in range(p):
            val = sum(int(c) * pow(r0, i, p) for i, c in enumerate(f)) % p
            if val % p:
                continue
            der = sum(int(c) * i * pow(r0, i - 1, p) for i, c in enumerate(f) if i) % p
            if der % p == 0:
                continue  # only simple roots are lifted
            r = r0
            pk = p
            while pk < p ** prec:
                pk = min(pk * pk, p ** prec)
                fr = sum(int(c) * pow(r, i, pk) for i, c in enumerate(f)) % pk
                dr = sum(int(c) * i * pow(r, i - 1, pk) for i, c in enumerate(f) if i) % pk
                r = (r - fr * pow(dr, -1, pk)) % pk
            roots.append(r % p ** prec)
        return sorted(roots)

    def reduction_mod(self, ell, root=None):
        """Map to F_ell sending theta to a chosen root of minpoly mod ell.

        Returns None when minpoly has no simple root mod ell (prime not
        usable for CRT with this field).
        """
        if root is None:
            cands = []
            for r in range(ell):
                v = sum(int(c % ell) * pow(r, i, ell) for i, c in enumerate(self.minpoly)) % ell
                if v == 0:
                    d = sum(int(c % ell) * i * pow(r, i - 1, ell)
                            for i, c in enumerate(self.minpoly) if i) % ell
                    if d:
                        cands.append(r)
            if not cands:
                return None
            root = cands[0]

        powers = [pow(root, i, ell) for i in range(self.degree)]

        def red(x):
            acc = 0
            for c, pw in zip(x.coords, powers):
                num = c.numerator % ell
                den = c.denominator % ell
                if den == 0:
                    raise ZeroDivisionError("denominator divisible by ell")
                acc = (acc + num * pow(den, -1, ell) * pw) % ell
            return acc

        return red

    def __repr__(self):
        return f"NumberField(deg {self.degree}, {self.name})"


class NFElem:
    __slots__ = ("field", "coords")

    def __init__(self, field, coords):
        self.field = field
        self.coords = coords

    def _coerce(self, other):
        if isinstance(other, NFElem):
            if other.field is not self.field:
                raise TypeError("mixed number fields")
            return other
        if isinstance(other, (int, Fraction)):
            return self.field.elem([other])
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return NFElem(self.field, tuple(a + b for a, b in zip(self.coords, o.coords)))

    __radd__ = __add__

    def __neg__(self):
        return NFElem(self.field, tuple(-a for a in self.coords))

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return NFElem(self.field, tuple(a - b for a, b in zip(self.coords, o.coords)))

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return NFElem(self.field, tuple(a * other for a in self.coords))
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return NFElem(self.field, self.field._mul(self.coords, o.coords))

    __rmul__ = __mul__

    def inverse(self):
        return NFElem(self.field, self.field._inv(self.coords))

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return NFElem(self.field, tuple(a / other for a in self.coords))
        o = self._coerce(other)
        return self * o.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, n):
        if n < 0:
            return self.inverse() ** (-n)
        out = self.field.one()
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = self.field.elem([other])
        if not isinstance(other, NFElem):
            return NotImplemented
        return self.coords == other.coords

    def __hash__(self):
        return hash((id(self.field), self.coords))

    def is_zero(self):
        return all(c == 0 for c in self.coords)

    def is_rational(self):
        return all(c == 0 for c in self.coords[1:])

    def rational_part(self):
        return self.coords[0]

    def apply_auto(self, gen_image):
        """Image under the automorphism sending the generator to gen_image."""
        acc = self.field.zero()
        for c in reversed(self.coords):
            acc = acc * gen_image + self.field.elem([c])
        return acc

    def __repr__(self):
        name = self.field.name
        parts = []
        for i, c in enumerate(self.coords):
            if c == 0:
                continue
            if i == 0:
                parts.append(str(c))
            elif i == 1:
                parts.append(f"{c}*{name}")
            else:
                parts.append(f"{c}*{name}^{i}")
        return " + ".join(parts) if parts else "0"


@lru_cache(maxsize=None)
def cyclotomic_field(n):
    """Q(zeta_n) with the power basis of Phi_n. Small n only."""
    if n == 1:
        return NumberField([Fraction(-1), Fraction(1)], name="one")
    if n == 2:
        return NumberField([Fraction(1), Fraction(1)], name="minus_one")
    # compute Phi_n by dividing x^n - 1 by Phi_d for d | n, d < n
    polys = {1: [Fraction(-1), Fraction(1)]}
    for m in range(2, n + 1):
        if n % m:
            continue
        num = [Fraction(0)] * (m + 1)
        num[0] = Fraction(-1)
        num[m] = Fraction(1)
        for d, pd in polys.items():
            if m % d == 0 and d < m:
                num, rem = _poly_divmod(num, pd)
                assert not _poly_trim(rem)
        polys[m] = num
    return NumberField(polys[n], name=f"zeta{n}")


def gaussian_field():
    return NumberField([1, 0, 1], name="i")


def quad_field_nf(D):
    """Q(sqrt(D)) with generator sqrt(D) (D a fundamental discriminant or
    any nonsquare integer)."""
    return NumberField([-D, 0, 1], name=f"sqrt({D})")


def nf_conjugation(field):
    """Complex conjugation for Q(sqrt(D)) with D<0, or zeta -> zeta^{-1} for
    cyclotomic fields built by cyclotomic_field."""
    if field.degree == 1:
        return lambda x: x
    if field.degree == 2 and field.minpoly[1] == 0:
        # sqrt(D) -> -sqrt(D)
        img = field.elem([0, -1])
        return lambda x: x.apply_auto(img)
    # cyclotomic: send generator to its inverse
    img = field.gen().inverse()
    return lambda x: x.apply_auto(img)
