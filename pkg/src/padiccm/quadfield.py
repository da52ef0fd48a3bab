"""Ideal and character arithmetic for an imaginary quadratic field.

Elements of O_K = Z[w] are integer pairs (x, y) = x + y*w where w is the
standard quadratic integer:  w = sqrt(D)/2 (trace 0) for D = 0 mod 4 and
w = (1+sqrt(D))/2 (trace 1) for D = 1 mod 4.

Ideals are kept in two-dimensional HNF: content * (a*Z + (b+w)*Z).

Ray class characters are supported for squarefree moduli (products of
distinct prime ideals); every built-in test case lives there.  Characters
take values in a small cyclotomic field or in K itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import gcd, isqrt

from .errors import (
    CharacterError,
    NonFundamentalDiscriminant,
    NormOverflow,
    NotCoprime,
    PSplitError,
    TorsionAmbiguity,
)
from .nfield import NumberField, cyclotomic_field, quad_field_nf
from .padic import PadicScalar, angle_bracket, iwasawa_log, nth_root_one_unit



def _is_prime(n):
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True

def kronecker(D, n):
    """Kronecker symbol (D|n) for n > 0."""
    if n == 0:
        return 1 if D in (1, -1) else 0
    result = 1
    if n < 0:
        n = -n
        if D < 0:
            result = -result
    while n % 2 == 0:
        n //= 2
        if D % 2 == 0:
            return 0
        if D % 8 in (3, 5):
            result = -result
    if n == 1:
        return result
    # odd part: Jacobi with reciprocity
    a = D % n
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def is_fundamental(D):
    if D >= 0:
        return False
    if D % 4 == 1:
        return _squarefree(-D)
    if D % 4 == 0:
        m = D // 4
        return m % 4 in (2, 3) and _squarefree(-m)
    return False


def _squarefree(n):
    i = 2
    while i * i <= n:
        if n % (i * i) == 0:
            return False
        i += 1
    return True


def factorize(n):
    n = abs(n)
    out = {}
    d = 2
    while d * d <= n:
        while n % d == 0:
            out[d] = out.get(d, 0) + 1
            n //= d
        d += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


# --------------------------------------------------------------------------
# the field and its elements
# --------------------------------------------------------------------------


class QuadField:
    def __init__(self, D, p=None, prec=20):
        if not is_fundamental(D):
            raise NonFundamentalDiscriminant(f"{D} is not fundamental < 0")
        self.D = D
        if D % 4 == 0:
            self.trace, self.nrm = 0, -D // 4
        else:
            self.trace, self.nrm = 1, (1 - D) // 4
        self.w_K = 4 if D == -4 else (6 if D == -3 else 2)
        self.cls = ClassGroup(self)
        self.h_K = self.cls.h
        self.nf = quad_field_nf(D)  # Q(sqrt(D)) with generator sqrt(D)
        self.p = p
        self.prec = prec
        if p is not None:
            if p in (2, 3):
                raise PSplitError("p = 2, 3 are out of scope")
            if kronecker(D, p) != 1:
                raise PSplitError(f"p={p} does not split in Q(sqrt({D}))")
            if (6 * D * self.h_K) % p == 0:
                raise PSplitError(f"p={p} divides 6*Delta*h")
            if (p - 1) % self.w_K != 0:
                raise TorsionAmbiguity(f"w_K={self.w_K} does not divide p-1")
            self.P, self.Pbar, self._w_root = self._split_p(p, prec)

    # elements are tuples (x, y) = x + y*w
    def elem_conj(self, e):
        x, y = e
        return (x + self.trace * y, -y)

    def elem_mul(self, e1, e2):
        x1, y1 = e1
        x2, y2 = e2
        # (x1 + y1 w)(x2 + y2 w); w^2 = trace*w - nrm
        x = x1 * x2 - self.nrm * y1 * y2
        y = x1 * y2 + x2 * y1 + self.trace * y1 * y2
        return (x, y)

    def elem_pow(self, e, n):
        out = (1, 0)
        while n:
            if n & 1:
                out = self.elem_mul(out, e)
            e = self.elem_mul(e, e)
            n >>= 1
        return out

    def elem_norm(self, e):
        x, y = e
        return x * x + self.trace * x * y + self.nrm * y * y

    def units(self):
        if self.D == -4:
            return [(1, 0), (0, 1), (-1, 0), (0, -1)]
        if self.D == -3:
            u = (0, 1)  # w = zeta6
            out = [(1, 0)]
            for _ in range(5):
                out.append(self.elem_mul(out[-1], u))
            return out
        return [(1, 0), (-1, 0)]

    def in_nf(self, e):
        """Element as an NFElem of Q(sqrt(D))."""
        x, y = e
        if self.trace == 0:
            # w = sqrt(D)/2
            return self.nf.elem([Fraction(x), Fraction(y, 2)])
        return self.nf.elem([Fraction(2 * x + y, 2), Fraction(y, 2)])

    def complex_value(self, e, prec_bits=96):
        import mpmath

        x, y = e
        with mpmath.workprec(prec_bits):
            sq = mpmath.sqrt(mpmath.mpf(-self.D))
            w = sq * 1j / 2 if self.trace == 0 else (1 + sq * 1j) / 2
            return x + y * w

    def _split_p(self, p, prec):
        # roots of x^2 - trace*x + nrm mod p, Hensel-lifted
        rr = [r for r in range(p) if (r * r - self.trace * r + self.nrm) % p == 0]
        assert len(rr) == 2, "p must split"
        roots = []
        for r0 in rr:
            r, pk = r0, p
            while pk < p ** prec:
                pk = min(pk * pk, p ** prec)
                f = (r * r - self.trace * r + self.nrm) % pk
                df = (2 * r - self.trace) % pk
                r = (r - f * pow(df, -1, pk)) % pk
            roots.append(r)
        # P = prime where w == w_root, i.e. the kernel of x+y*w -> x+y*w_root
        w_root = roots[0]
        P = self.prime_over(p, bfe=(-w_root) % p)
        Pbar = P.conj()
        return P, Pbar, w_root

    def iota_P(self, e, prec=None):
        """P-adic embedding K -> Z_p (p split), sending w to the chosen root."""
        prec = prec or self.prec
        x, y = e
        m = self.p ** prec
        return PadicScalar.from_int((x + y * self._w_root) % m, self.p, prec)

    def iota_Pbar(self, e, prec=None):
        return self.iota_P(self.elem_conj(e), prec)

    # --- ideals -----------------------------------------------------------
    def ideal(self, a, b, content=1):
        return IdealHNF(self, a, b % a, content)

    def unit_ideal(self):
        return IdealHNF(self, 1, 0, 1)

    def principal(self, e):
        """The principal ideal (x + y*w)."""
        x, y = e
        if x == 0 and y == 0:
            raise ValueError("zero ideal")
        gens = [(x, y), self.elem_mul((x, y), (0, 1))]
        return IdealHNF.from_z_generators(self, gens)

    def prime_over(self, ell, bfe=None):
        """A prime ideal above the rational prime ell (the one with
        w = -bfe mod ell when split and bfe given)."""
        ch = kronecker(self.D, ell)
        if ch == -1:
            return IdealHNF(self, 1, 0, ell)
        sols = [
            b for b in range(ell)
            if (b * b + self.trace * b + self.nrm) % ell == 0
        ]
        if bfe is not None:
            assert bfe in sols
            return IdealHNF(self, ell, bfe, 1)
        return IdealHNF(self, ell, sols[0], 1)

    def primes_over(self, ell):
        ch = kronecker(self.D, ell)
        if ch == -1:
            return [IdealHNF(self, 1, 0, ell)]
        sols = sorted(
            b for b in range(ell)
            if (b * b + self.trace * b + self.nrm) % ell == 0
        )
        if ch == 0:
            return [IdealHNF(self, ell, sols[0], 1)]
        return [IdealHNF(self, ell, b, 1) for b in sols]

    def ideals_of_norm(self, n):
        """All integral ideals of norm n."""
        if n <= 0:
            return []
        if n == 1:
            return [self.unit_ideal()]
        out = [self.unit_ideal()]
        for ell, e in factorize(n).items():
            ch = kronecker(self.D, ell)
            local = []
            if ch == -1:
                if e % 2:
                    return []
                local = [IdealHNF(self, 1, 0, ell ** (e // 2))]
            elif ch == 0:
                P = self.primes_over(ell)[0]
                local = [P ** e]
            else:
                P, Q = self.primes_over(ell)
                local = [(P ** i) * (Q ** (e - i)) for i in range(e + 1)]
            out = [I * J for I in out for J in local]
        return out

    def __repr__(self):
        return f"QuadField(D={self.D}, h={self.h_K}, w={self.w_K})"


class IdealHNF:
    """content * (a*Z + (b + w)*Z), a | N(b + w), 0 <= b < a."""

    __slots__ = ("K", "a", "b", "content")

    def __init__(self, K, a, b, content=1):
        if a <= 0 or content <= 0:
            raise ValueError("bad HNF data")
        b %= a
        if (b * b + K.trace * b + K.nrm) % a != 0:
            raise ValueError(f"a={a} does not divide N(b+w) for b={b}")
        self.K = K
        self.a = a
        self.b = b
        self.content = content

    @classmethod
    def from_z_generators(cls, K, gens):
        """HNF of the Z-span of elements (assumed an O_K-module)."""
        vecs = [g for g in gens if g != (0, 0)]
        if not vecs:
            raise ValueError("zero ideal")
        # sweep the y-coordinates into a single vector (B, c) by the
        # euclidean algorithm on columns, collecting y = 0 leftovers
        xs = []
        B, c = 0, 0
        for (x, y) in vecs:
            while y:
                q = c // y
                B, c, x, y = x, y, B - q * x, c - q * y
            xs.append(x)
        if c < 0:
            B, c = -B, -c
        A = 0
        for x in xs:
            A = gcd(A, x)
        if A == 0 or c == 0:
            raise ValueError("rank-deficient generators")
        # ideal = A*Z + (B + c*w)*Z ; O_K-stability forces c | A, c | B
        if A % c or B % c:
            raise ValueError("generators do not span an O_K-ideal")
        return cls(K, A // c, (B // c) % (A // c), c)

    def norm(self):
        return self.content ** 2 * self.a

    def z_basis(self):
        c = self.content
        return [(c * self.a, 0), (c * self.b, c)]

    def __mul__(self, other):
        if not isinstance(other, IdealHNF):
            return NotImplemented
        K = self.K
        gens = []
        for v1 in self.z_basis():
            for v2 in other.z_basis():
                gens.append(K.elem_mul(v1, v2))
        return IdealHNF.from_z_generators(K, gens)

    def __pow__(self, n):
        out = self.K.unit_ideal()
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def conj(self):
        K = self.K
        return IdealHNF(K, self.a, (-self.b - K.trace) % self.a, self.content)

    def contains(self, e):
        # e = s*(c*a) + t*(c*b + c*w) requires c | y and c*a | x - (y/c)*c*b
        x, y = e
        c = self.content
        if y % c:
            return False
        t = y // c
        return (x - t * c * self.b) % (c * self.a) == 0

    def is_coprime(self, other):
        if isinstance(other, int):
            return gcd(self.norm(), other) == 1
        # two integral ideals are coprime iff their norms share no prime
        # dividing both with matching primes; cheap sufficient check via sum
        g = gcd(self.norm(), other.norm())
        if g == 1:
            return True
        for ell in factorize(g):
            mine = self.valuation_at_primes(ell)
            theirs = other.valuation_at_primes(ell)
            for P, v in mine.items():
                if v and theirs.get(P, 0):
                    return False
        return True

    def valuation_at_primes(self, ell):
        """Valuations at the primes over ell, keyed by (a, b, inert-flag)."""
        K = self.K
        out = {}
        for P in K.primes_over(ell):
            v = 0
            I = self
            while True:
                J = I.divide_exact(P)
                if J is None:
                    break
                v += 1
                I = J
            out[(P.a, P.b, P.content)] = v
        return out

    def divide_exact(self, P):
        """self / P if P divides self, else None (P prime).

        P * conj(P) = (N P), so P | I iff N(P) divides the content of
        I * conj(P); the quotient is that product rescaled.
        """
        NP = P.norm()
        prod = self * P.conj()
        if prod.content % NP == 0:
            return IdealHNF(self.K, prod.a, prod.b, prod.content // NP)
        return None

    def __eq__(self, other):
        return (
            isinstance(other, IdealHNF)
            and (self.a, self.b, self.content) == (other.a, other.b, other.content)
        )

    def __hash__(self):
        return hash((self.a, self.b, self.content))

    def key(self):
        return (self.a, self.b, self.content)

    def __repr__(self):
        return f"Ideal({self.content}*[{self.a}, {self.b}+w])"


def principal_gen(I: IdealHNF):
    """A generator of I when principal, else None (positive-definite search)."""
    K = I.K
    a, b, c = I.a, I.b, I.content
    # search alpha = s*a + t*(b+w) (times content) with N = a
    A = a
    B = 2 * b + K.trace
    C = (b * b + K.trace * b + K.nrm) // a
    # A s^2 + B s t + C t^2 = 1
    tmax = isqrt(4 * A // (-K.D)) + 1
    for t in range(-tmax, tmax + 1):
        # solve A s^2 + B t s + (C t^2 - 1) = 0
        disc = B * B * t * t - 4 * A * (C * t * t - 1)
        if disc < 0:
            continue
        sq = isqrt(disc)
        if sq * sq != disc:
            continue
        for sgn in (1, -1):
            num = -B * t + sgn * sq
            if num % (2 * A) == 0:
                s = num // (2 * A)
                alpha = (s * a + t * b, t)
                if K.elem_norm(alpha) == a:
                    return (c * alpha[0], c * alpha[1])
    return None


# --------------------------------------------------------------------------
# class group via reduced binary quadratic forms
# --------------------------------------------------------------------------


class ClassGroup:
    """Cl(K) as reduced positive-definite forms with a polycyclic
    generator/relation presentation (generic, works for any finite h)."""

    def __init__(self, K_or_D):
        self.K = K_or_D if isinstance(K_or_D, QuadField) else None
        self.D = self.K.D if self.K else K_or_D
        self.forms = self._reduced_forms(self.D)
        self.h = len(self.forms)
        self._index = {f: i for i, f in enumerate(self.forms)}
        self._structure = None

    @staticmethod
    def _reduced_forms(D):
        out = []
        A = 1
        while A * A <= -D // 3 + 1:
            for B in range(-A + 1, A + 1):
                rem = B * B - D
                if rem % (4 * A):
                    continue
                C = rem // (4 * A)
                if C < A:
                    continue
                if A == C and B < 0:
                    continue
                from math import gcd as _g

                if _g(_g(A, abs(B)), C) != 1:
                    continue  # imprimitive (cannot occur for fundamental D)
                out.append((A, B, C))
            A += 1
        return sorted(out)

    @staticmethod
    def reduce_form(A, B, C):
        D = B * B - 4 * A * C
        while True:
            if B > A or B <= -A:
                B = ((B + A) % (2 * A)) - A  # into [-A, A)
                if B == -A:
                    B = A
                C = (B * B - D) // (4 * A)
                continue
            if C < A or (C == A and B < 0):
                A, B, C = C, -B, A
                continue
            return (A, B, C)

    def form_of_ideal(self, I: IdealHNF):
        K = self.K
        a, b = I.a, I.b
        A = a
        B = 2 * b + K.trace
        C = (b * b + K.trace * b + K.nrm) // a
        return self.reduce_form(A, B, C)

    def ideal_of_form(self, f):
        A, B, _C = f
        b = (B - self.K.trace) // 2
        return IdealHNF(self.K, A, b % A, 1)

    def principal_form(self):
        if self.D % 4 == 0:
            return self.reduce_form(1, 0, -self.D // 4)
        return self.reduce_form(1, 1, (1 - self.D) // 4)

    def is_principal(self, I):
        return self.form_of_ideal(I) == self.principal_form()

    def compose(self, f, g):
        I = self.ideal_of_form(f) * self.ideal_of_form(g)
        return self.form_of_ideal(I)

    def structure(self):
        """Polycyclic presentation: list of (generator form, relative order,
        relation word) and a dict form -> exponent tuple."""
        if self._structure is not None:
            return self._structure
        e = self.principal_form()
        table = {e: ()}
        gens = []  # (form, rel_order, relation_vector)
        for f in self.forms:
            if f in table:
                continue
            # order of f relative to the current subgroup
            m = 1
            g = f
            while g not in table:
                g = self.compose(g, f)
                m += 1
            rel = table[g]
            # rebuild the table over the extended generating set
            new_table = {}
            power = e
            for j in range(m):
                for elem, vec in table.items():
                    key = self.compose(elem, power) if j else elem
                    padded = vec + (0,) * (len(gens) - len(vec))
                    new_table[key] = padded + (j,)
                if j < m - 1:
                    power = self.compose(power, f)
            gens.append((f, m, rel))
            table = new_table
        # pad all vectors to full length
        n = len(gens)
        table = {k: v + (0,) * (n - len(v)) for k, v in table.items()}
        self._structure = (gens, table)
        return self._structure

    def dlog(self, I: IdealHNF):
        """Exponent vector of the class of I in the polycyclic presentation."""
        gens, table = self.structure()
        return table[self.form_of_ideal(I)]

    def characters(self, field=None):
        """All characters of Cl as ClassChar objects (exact values)."""
        gens, table = self.structure()
        import itertools

        exps = self.exponent()
        F = field or cyclotomic_field(exps)
        out = []
        for choice in itertools.product(*[range(m) for (_f, m, _r) in gens]):
            ch = self._char_from_choice(choice, F)
            if ch is not None:
                out.append(ch)
        return out

    def exponent(self):
        gens, _ = self.structure()
        from math import lcm

        e = 1
        for (_f, m, _r) in gens:
            e = lcm(e, m)
        return e

    def _char_from_choice(self, choice, F):
        """Character with chi(gen_i) = zeta_e^(choice_i * e / m_i) when the
        polycyclic relations allow it; None otherwise."""
        gens, table = self.structure()
        e = self.exponent()
        zeta = F.gen() if e > 2 else (F.from_int(-1) if e == 2 else F.one())
        # value exponents mod e for each generator, must satisfy relations
        vals = []
        for i, (f, m, rel) in enumerate(gens):
            c = choice[i] * (e // m) % e
            # relation: gen_i^m = word(rel) over earlier generators
            lhs = c * m % e
            rhs = sum(vals[j] * rel[j] for j in range(len(rel))) % e
            if lhs != rhs:
                return None
            vals.append(c)
        return ClassChar(self, vals, e, F)


class ClassChar:
    """A character of the class group (unramified everywhere)."""

    def __init__(self, cls_group, val_exponents, e, F):
        self.cls = cls_group
        self.vals = val_exponents
        self.e = e
        self.field = F

    def order(self):
        from math import gcd as _g, lcm

        o = 1
        for v in self.vals:
            if v:
                o = lcm(o, self.e // _g(self.e, v))
        return o

    def root(self, expo):
        e = self.e
        expo %= e
        if e == 1:
            return self.field.one()
        if e == 2:
            return self.field.from_int(1 if expo == 0 else -1)
        return self.field.gen() ** expo

    def __call__(self, I: IdealHNF):
        vec = self.cls.dlog(I)
        expo = sum(v * x for v, x in zip(self.vals, vec)) % self.e
        return self.root(expo)

    def conj_char(self):
        """chi^c: (chi^c)(A) = chi(conj A); for class chars = chi^{-1}."""
        return ClassChar(self.cls, [(-v) % self.e for v in self.vals], self.e, self.field)

    def inverse(self):
        return ClassChar(self.cls, [(-v) % self.e for v in self.vals], self.e, self.field)


# --------------------------------------------------------------------------
# residue fields and ray class characters (squarefree moduli)
# --------------------------------------------------------------------------


class ResidueField:
    """(O_K/P)^x for a prime ideal P, as an explicit cyclic group."""

    def __init__(self, K, P: IdealHNF):
        self.K = K
        self.P = P
        self.q = P.norm()  # size of the residue field
        self.n = self.q - 1  # order of the unit group
        self._inert = P.a == 1 and P.content > 1
        self._gen = self._find_generator()
        self._dlog_table = None

    def reduce(self, e):
        """Canonical residue representative of an element x + y*w."""
        K, P = self.K, self.P
        if self._inert:
            ell = P.content
            return (e[0] % ell, e[1] % ell)
        # split/ramified: O/P = F_ell via w -> -b
        ell = P.a
        return ((e[0] - e[1] * P.b) % ell, 0)

    def is_unit(self, e):
        r = self.reduce(e)
        if self._inert:
            return r != (0, 0)
        return r[0] % self.P.a != 0

    def mul(self, r1, r2):
        return self.reduce(self.K.elem_mul(r1, r2))

    def pow(self, r, n):
        n %= self.n
        out = self.reduce((1, 0))
        while n:
            if n & 1:
                out = self.mul(out, r)
            r = self.mul(r, r)
            n >>= 1
        return out

    def _find_generator(self):
        fac = factorize(self.n)
        ell = self.P.content if self._inert else self.P.a

        def order_ok(r):
            for q in fac:
                if self.pow(r, self.n // q) == self.reduce((1, 0)):
                    return False
            return True

        if self._inert:
            for x in range(ell):
                for y in range(ell):
                    if (x, y) == (0, 0):
                        continue
                    if order_ok((x, y)):
                        return (x, y)
        else:
            for x in range(1, ell):
                if order_ok((x, 0)):
                    return (x, 0)
        raise RuntimeError("no generator found")

    def dlog(self, e):
        """Discrete log of e with respect to the stored generator."""
        if not self.is_unit(e):
            raise NotCoprime(f"{e} not a unit mod P")
        if self._dlog_table is None:
            tbl = {}
            cur = self.reduce((1, 0))
            for k in range(self.n):
                tbl[cur] = k
                cur = self.mul(cur, self._gen)
            self._dlog_table = tbl
        return self._dlog_table[self.reduce(e)]


class RayClassChar:
    """A ray class character of K with squarefree modulus.

    Finite part: for each prime P of the modulus an exponent c_P, the local
    character being x -> zeta_{n_P}^(c_P * dlog_P(x)).  Class part: a value
    chi(G_i) = e^(2 pi i t_i) for each polycyclic class-group generator,
    recorded as an exact rational turn t_i.  Values live in the cyclotomic
    field of the character order.
    """

    def __init__(self, K, local, class_turns=None, anticyclotomic=None,
                 validate=True):
        self.K = K
        self.local = [(rf, c % rf.n) for rf, c in local]
        gens, _ = K.cls.structure()
        self.class_turns = [Fraction(t) % 1 for t in (class_turns or [0] * len(gens))]
        if len(self.class_turns) != len(gens):
            raise CharacterError("wrong number of class values")
        self.order = self._order()
        self.field = cyclotomic_field(self.order)
        self._cache = {}
        self.anticyclotomic = anticyclotomic
        if validate:
            self._validate()

    def _order(self):
        from math import gcd as _g, lcm

        o = 1
        for rf, c in self.local:
            if c % rf.n:
                o = lcm(o, rf.n // _g(rf.n, c))
        for t in self.class_turns:
            if t:
                o = lcm(o, t.denominator)
        return o

    def _root(self, turn):
        """e^(2 pi i turn) as an element of the value field."""
        turn = Fraction(turn) % 1
        if self.order % turn.denominator:
            raise CharacterError("value outside the character's field")
        expo = turn.numerator * (self.order // turn.denominator) % self.order
        if self.order == 1:
            return self.field.one()
        if self.order == 2:
            return self.field.from_int(1 if expo % 2 == 0 else -1)
        return self.field.gen() ** expo

    def modulus_primes(self):
        return [rf.P for rf, _c in self.local]

    def modulus_norm(self):
        n = 1
        for rf, _c in self.local:
            n *= rf.q
        return n

    def chi0_turn(self, e):
        """Finite part at an element, as an exact rational turn."""
        turn = Fraction(0)
        for rf, c in self.local:
            turn += Fraction(c * rf.dlog(e), rf.n)
        return turn % 1

    def chi0(self, e):
        return self._root(self.chi0_turn(e))

    # --- evaluation --------------------------------------------------------
    def value_turn(self, I: IdealHNF):
        """chi(I) as a rational turn (exact)."""
        key = I.key()
        if key in self._cache:
            return self._cache[key]
        K = self.K
        for rf, _c in self.local:
            if not I.is_coprime(rf.P):
                raise NotCoprime("ideal not coprime to the conductor")
        gens, _ = K.cls.structure()
        vec = K.cls.dlog(I)
        W = K.unit_ideal()
        for (f, _m, _r), v in zip(gens, vec):
            if v:
                G = self._class_rep(f)
                W = W * (G ** v)
        # I * conj(W) = (gamma); chi(W) chi(conj W) = chi0(N W) as principal
        J = I * W.conj()
        gamma = principal_gen(J)
        if gamma is None:
            raise CharacterError("principal generator search failed")
        turn = self.chi0_turn(gamma)
        if any(vec):
            wturn = sum((t * v for t, v in zip(self.class_turns, vec)), Fraction(0))
            turn += wturn
            turn += wturn - wturn  # no-op for clarity
            turn -= self.chi0_turn((W.norm(), 0))
            turn += sum((t * v for t, v in zip(self.class_turns, vec)), Fraction(0)) * 0
        self._cache[key] = turn % 1
        return self._cache[key]

    def __call__(self, I: IdealHNF):
        return self._root(self.value_turn(I))

    @lru_cache(maxsize=None)
    def _class_rep_cached(self, fkey):
        pass

    def _class_rep(self, f):
        """Representative ideal of the class of the form f, coprime to the
        modulus and to p (deterministic smallest split prime)."""
        if not hasattr(self, "_reps"):
            self._reps = {}
        if f in self._reps:
            return self._reps[f]
        K = self.K
        bad = self.modulus_norm() * (K.p or 1) * abs(K.D)
        if f == K.cls.principal_form():
            self._reps[f] = K.unit_ideal()
            return self._reps[f]
        ell = 2
        while ell < 100000:
            if _is_prime(ell) and gcd(ell, bad) == 1 and kronecker(K.D, ell) == 1:
                for P in K.primes_over(ell):
                    if K.cls.form_of_ideal(P) == f:
                        self._reps[f] = P
                        return P
            ell += 1
        raise CharacterError("no coprime class representative found")

    def _validate(self):
        for u in self.K.units():
            if self.chi0_turn(u) != 0:
                raise CharacterError("finite part not trivial on global units")
        # full multiplicativity across class representatives (catches any
        # inconsistent class values, since carries exercise the relations)
        K = self.K
        reps = [self._class_rep(f) for f in K.cls.forms]
        # include one ramified-in-K-free principal prime for good measure
        for I in reps:
            for J in reps:
                if I.norm() == 1 and J.norm() == 1:
                    continue
                lhs = self.value_turn(I * J)
                rhs = (self.value_turn(I) + self.value_turn(J)) % 1
                if lhs != rhs:
                    raise CharacterError(
                        f"class values inconsistent at {I} * {J}"
                    )

    # --- derived characters --------------------------------------------------
    def conj_char(self):
        """chi^c with chi^c(A) = chi(conj A)."""
        local = []
        for rf, c in self.local:
            Pb = rf.P.conj()
            rfb = ResidueField(self.K, Pb)
            dd = rf.dlog(self.K.elem_conj(rfb._gen))
            local.append((rfb, (c * dd) % rfb.n))
        turns = [(-t) % 1 for t in self.class_turns]
        # conj class = inverse class, and chi(conj G) = chi(G^{-1} * (N G))
        # = chi(G)^{-1} chi0(N G): absorb the chi0(NG) correction per gen
        gens, _ = self.K.cls.structure()
        new_turns = []
        for (f, _m, _r), t in zip(gens, self.class_turns):
            G = self._class_rep(f)
            corr = self.chi0_turn((G.norm(), 0))
            new_turns.append((corr - t) % 1)
        return RayClassChar(self.K, local, new_turns)

    def inverse(self):
        local = [(rf, (-c) % rf.n) for rf, c in self.local]
        turns = [(-t) % 1 for t in self.class_turns]
        return RayClassChar(self.K, local, turns)

    def mul_char(self, other):
        locs = {}
        for rf, c in self.local:
            locs[rf.P.key()] = (rf, c)
        for rf, c in other.local:
            if rf.P.key() in locs:
                rf0, c0 = locs[rf.P.key()]
                locs[rf.P.key()] = (rf0, (c0 + c) % rf0.n)
            else:
                locs[rf.P.key()] = (rf, c)
        local = [(rf, c) for _k, (rf, c) in sorted(locs.items()) if c % rf.n]
        turns = [
            (a + b) % 1 for a, b in zip(self.class_turns, other.class_turns)
        ]
        return RayClassChar(self.K, local, turns)

    def one_minus_c(self):
        """phi^(1-c) = phi * (phi^c)^(-1): anticyclotomic by construction."""
        chi = self.mul_char(self.conj_char().inverse())
        chi.anticyclotomic = True
        return chi

    def is_anticyclotomic(self, trials=200):
        K = self.K
        count = 0
        ell = 2
        while count < trials and ell < 10 ** 5:
            if _is_prime(ell) and gcd(ell, self.modulus_norm() * (K.p or 1)) == 1 and kronecker(K.D, ell) == 1:
                P = K.primes_over(ell)[0]
                if (self.value_turn(P) + self.value_turn(P.conj())) % 1 != 0:
                    return False
                count += 1
            ell += 1
        return True

    def is_trivial(self):
        return self.order == 1


def trivial_ray_char(K):
    return RayClassChar(K, [], None)


def one_sided_char(K, P: IdealHNF, exponent, class_turns=None):
    """Ray class character ramified exactly at the prime P with the local
    character sending the canonical generator to zeta_{N(P)-1}^exponent.
    For h > 1 consistent class values must be supplied or searched via
    class_extensions."""
    rf = ResidueField(K, P)
    return RayClassChar(K, [(rf, exponent % rf.n)], class_turns)


def class_extensions(K, local, max_order=60):
    """All consistent ray class characters with the given finite part."""
    gens, _ = K.cls.structure()
    if not gens:
        return [RayClassChar(K, local)]
    import itertools

    from math import lcm

    # candidate denominators: class values have order dividing
    # lcm(exponent, local order) * h in the worst case; enumerate turns with
    # denominator dividing M
    M = K.cls.exponent()
    for rf, c in local:
        if c % rf.n:
            M = lcm(M, rf.n // gcd(rf.n, c))
    M *= K.cls.exponent()
    out = []
    ranges = [range(M) for _ in gens]
    for choice in itertools.product(*ranges):
        turns = [Fraction(j, M) for j in choice]
        try:
            out.append(RayClassChar(K, local, turns))
        except CharacterError:
            continue
    return out


def diagonal_norm_char(K, ell, dirichlet_exp, dirichlet_order):
    """The Dirichlet character mod ell (odd prime, unramified in K) of given
    order composed with the ideal norm; local data at the primes over ell."""
    local = []
    for P in K.primes_over(ell):
        rf = ResidueField(K, P)
        if rf._inert:
            # residue field F_{ell^2}; the norm to F_ell is g -> g^(ell+1)
            if (ell - 1) % dirichlet_order:
                raise CharacterError("order does not divide ell - 1")
            # chi(N(x)) = zeta_m^(d * dlog_Fl(N x)); on the generator g of
            # F_{ell^2}^x, N(g) generates F_ell^x, with dlog additive:
            # dlog_Fl(N(g)) * (ell+1)-compat: exponent c with
            # c = d * (n/(ell-1)) works since N(g) = g^(ell+1) has order ell-1
            c = dirichlet_exp * (rf.n // (ell - 1)) * 1
            local.append((rf, c % rf.n))
        else:
            if (ell - 1) % dirichlet_order:
                raise CharacterError("order does not divide ell - 1")
            c = dirichlet_exp * (rf.n // dirichlet_order)
            local.append((rf, c % rf.n))
    chis = class_extensions(K, local) if K.h_K > 1 else [RayClassChar(K, local)]
    if not chis:
        raise CharacterError("no consistent class extension")
    # among the consistent extensions, pick the one that actually equals
    # chi_ell(N(.)) on small split primes
    def target_turn(nrm):
        # the Dirichlet character of order m with chi(g) = zeta_m^exp
        g = _primitive_root(ell)
        d = _dlog_cyclic(nrm % ell, g, ell)
        return Fraction(dirichlet_exp * d, dirichlet_order) % 1

    for chi in chis:
        ok = True
        q = 2
        checked = 0
        while checked < 6 and q < 2000:
            if _is_prime(q) and q != ell and gcd(q, abs(K.D)) == 1 and kronecker(K.D, q) == 1:
                Q = K.primes_over(q)[0]
                if chi.value_turn(Q) != target_turn(Q.norm()):
                    ok = False
                    break
                checked += 1
            q += 1
        if ok:
            return chi
    raise CharacterError("no extension matches chi(N(.))")


def _primitive_root(ell):
    fac = factorize(ell - 1)
    for g in range(2, ell):
        if all(pow(g, (ell - 1) // q, ell) != 1 for q in fac):
            return g
    raise RuntimeError


def _dlog_cyclic(x, g, ell):
    cur = 1
    for k in range(ell - 1):
        if cur == x % ell:
            return k
        cur = cur * g % ell
    raise ValueError("dlog failed")


# --------------------------------------------------------------------------
# epsilon_Sigma and eta_Sigma
# --------------------------------------------------------------------------


def epsilon_sigma(K: QuadField, I: IdealHNF, prec=None):
    """eps_Sigma(Frob_I) in 1 + pZp: the h_K-th root of <iota_P(alpha)> for
    I^h = (alpha).  The canonical 1-unit-valued choice; the root-of-unity
    ambiguity in alpha is killed because w_K | p - 1."""
    p = K.p
    if p is None:
        raise PSplitError("field constructed without p")
    prec = prec or K.prec
    if not I.is_coprime(p):
        raise NotCoprime("ideal not coprime to p")
    Ih = I ** K.h_K
    alpha = principal_gen(Ih)
    if alpha is None:
        raise CharacterError("I^h not principal: class group bug")
    u = angle_bracket(K.iota_P(alpha, prec), p, prec)
    return nth_root_one_unit(u, K.h_K)


def eta_sigma(K: QuadField, I: IdealHNF, prec=None):
    """eta_Sigma(Frob_I) = -log_p eps_Sigma(Frob_I); additive in I."""
    return -iwasawa_log(epsilon_sigma(K, I, prec))


# --------------------------------------------------------------------------
# module-level operations mirroring the spec surface
# --------------------------------------------------------------------------


def class_group(D):
    """(h, generator forms, dlog) for the fundamental discriminant D."""
    cg = ClassGroup(QuadField(D))
    gens, table = cg.structure()
    return cg.h, gens, cg

    
def ideal_factor(K: QuadField, n):
    """Prime ideal factorization of (n) or of an IdealHNF."""
    if isinstance(n, int):
        if abs(n) > 10 ** 9:
            raise NormOverflow("norm exceeds 10^9")
        out = []
        for ell, e in factorize(n).items():
            ch = kronecker(K.D, ell)
            if ch == -1:
                out.append((K.primes_over(ell)[0], e))
            elif ch == 0:
                out.append((K.primes_over(ell)[0], 2 * e))
            else:
                P, Q = K.primes_over(ell)
                out.append((P, e))
                out.append((Q, e))
        return out
    I = n
    if I.norm() > 10 ** 9:
        raise NormOverflow("norm exceeds 10^9")
    out = []
    for ell in factorize(I.norm()):
        for P in K.primes_over(ell):
            v = 0
            J = I
            while True:
                J2 = J.divide_exact(P)
                if J2 is None:
                    break
                v += 1
                J = J2
            if v:
                out.append((P, v))
    return out


def character_file_dump(chi: RayClassChar, path):
    """Plain-text character definition (External Interfaces format)."""
    lines = [f"field D={chi.K.D}"]
    for rf, c in chi.local:
        P = rf.P
        lines.append(f"prime={P.a},{P.b},{P.content} exp={c}/{rf.n}")
    gens, _ = chi.K.cls.structure()
    for (f, _m, _r), t in zip(gens, chi.class_turns):
        lines.append(f"classgen={f[0]},{f[1]},{f[2]} value={t.numerator}/{t.denominator}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def character_file_load(K: QuadField, path):
    local = []
    turns = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("field"):
                D = int(line.split("D=")[1])
                if D != K.D:
                    raise CharacterError("field mismatch in character file")
            elif line.startswith("prime="):
                spec_part, val = line.split(" exp=")
                a, b, c = map(int, spec_part[len("prime="):].split(","))
                num, den = map(int, val.split("/"))
                P = IdealHNF(K, a, b, c)
                rf = ResidueField(K, P)
                if rf.n != den:
                    raise CharacterError("local order mismatch")
                local.append((rf, num % den))
            elif line.startswith("classgen="):
                _g, val = line.split(" value=")
                num, den = map(int, val.split("/"))
                turns.append(Fraction(num, den))
    return RayClassChar(K, local, turns or None)
