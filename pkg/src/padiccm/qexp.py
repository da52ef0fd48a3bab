"""Truncated q-expansions over exact coefficient rings, Hecke operators,
Eisenstein series, and modular-form spaces with a computable basis.

Linear algebra on spaces is done exactly, accelerated by reduction modulo
word-sized primes with CRT + rational reconstruction; solutions used in
final results are verified exactly over the coefficient field.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import gcd, lcm

import numpy as np

from .errors import (
    InsufficientPrecision,
    NotInSpace,
    ParityMismatch,
    PrecisionLoss,
    SpanDeficient,
    UnsupportedWeight,
)
from .nfield import NFElem, NumberField
from .quadfield import factorize, kronecker, _is_prime

# --------------------------------------------------------------------------
# Dirichlet characters (quadratic Kronecker ones are rational-valued)
# --------------------------------------------------------------------------


class DirichletChar:
    """Base: value_turn(n) returns the exact turn (Fraction mod 1) or None
    when gcd(n, modulus) > 1 (value 0)."""

    modulus = 1
    order = 1

    def value_turn(self, n):
        raise NotImplementedError

    def is_even(self):
        t = self.value_turn(self.modulus - 1) if self.modulus > 1 else Fraction(0)
        return t == 0

    def rational_value(self, n):
        t = self.value_turn(n)
        if t is None:
            return Fraction(0)
        if t == 0:
            return Fraction(1)
        if t == Fraction(1, 2):
            return Fraction(-1)
        raise ValueError("character is not quadratic")

    def nf_value(self, n, field, zeta_order):
        t = self.value_turn(n)
        if t is None:
            return field.zero()
        expo = t * zeta_order
        assert expo.denominator == 1
        if zeta_order == 1:
            return field.one()
        if zeta_order == 2:
            return field.from_int(1 if int(expo) % 2 == 0 else -1)
        return field.gen() ** (int(expo) % zeta_order)


class TrivialChar(DirichletChar):
    def __init__(self, modulus=1):
        self.modulus = modulus
        self.conductor = 1
        self.order = 1

    def value_turn(self, n):
        if self.modulus > 1 and gcd(n, self.modulus) > 1:
            return None
        return Fraction(0)

    def __repr__(self):
        return f"TrivialChar({self.modulus})"


class KroneckerChar(DirichletChar):
    """The quadratic character attached to a fundamental discriminant."""

    def __init__(self, D):
        self.D = D
        self.modulus = abs(D)
        self.conductor = abs(D)
        self.order = 1 if D == 1 else 2

    def value_turn(self, n):
        v = kronecker(self.D, n)
        if v == 0:
            return None
        return Fraction(0) if v == 1 else Fraction(1, 2)

    def __repr__(self):
        return f"KroneckerChar({self.D})"


class CyclicChar(DirichletChar):
    """Character mod an odd prime q: g -> e^(2 pi i exponent / order)."""

    def __init__(self, q, exponent, order):
        assert _is_prime(q) and q % 2 == 1
        assert (q - 1) % order == 0
        self.q = q
        self.modulus = q
        self.conductor = q if exponent % order else 1
        self.exponent = exponent % order
        self.order = order // gcd(order, exponent) if exponent else 1
        self._g = self._primitive_root(q)
        self._dlog = {}
        cur = 1
        for k in range(q - 1):
            self._dlog[cur] = k
            cur = cur * self._g % q
        self._order_full = order

    @staticmethod
    def _primitive_root(q):
        fac = factorize(q - 1)
        for g in range(2, q):
            if all(pow(g, (q - 1) // r, q) != 1 for r in fac):
                return g
        raise RuntimeError

    def value_turn(self, n):
        n %= self.q
        if n == 0:
            return None
        return Fraction(self.exponent * self._dlog[n], self._order_full) % 1

    def __repr__(self):
        return f"CyclicChar(mod {self.q}, zeta^{self.exponent}/{self._order_full})"


class ProductChar(DirichletChar):
    def __init__(self, chars):
        self.chars = [c for c in chars if not isinstance(c, TrivialChar)]
        self.modulus = 1
        for c in self.chars:
            self.modulus = lcm(self.modulus, c.modulus)
        self.conductor = 1
        for c in self.chars:
            self.conductor = lcm(self.conductor, getattr(c, "conductor", c.modulus))
        self.order = 1
        for c in self.chars:
            self.order = lcm(self.order, c.order)

    def value_turn(self, n):
        t = Fraction(0)
        for c in self.chars:
            v = c.value_turn(n)
            if v is None:
                return None
            t += v
        return t % 1

    def __repr__(self):
        return f"ProductChar({self.chars})"


def product_char(*chars):
    cs = [c for c in chars if not isinstance(c, TrivialChar)]
    if not cs:
        return TrivialChar()
    if len(cs) == 1:
        return cs[0]
    return ProductChar(cs)


# --------------------------------------------------------------------------
# Bernoulli numbers, ordinary and generalized
# --------------------------------------------------------------------------


@lru_cache(maxsize=None)
def bernoulli(n):
    """Exact Bernoulli number B_n (B_1 = -1/2)."""
    if n == 0:
        return Fraction(1)
    if n == 1:
        return Fraction(-1, 2)
    if n % 2:
        return Fraction(0)
    # recursion sum_{j=0}^{n} C(n+1, j) B_j = 0
    from math import comb

    acc = Fraction(0)
    for j in range(n):
        acc += comb(n + 1, j) * bernoulli(j)
    return -acc / (n + 1)


@lru_cache(maxsize=None)
def _bern_poly_coeffs(k):
    from math import comb

    return [comb(k, j) * bernoulli(k - j) for j in range(k + 1)]


def bernoulli_poly(k, x):
    """B_k(x) for Fraction x."""
    coeffs = _bern_poly_coeffs(k)
    acc = Fraction(0)
    xp = Fraction(1)
    for j, c in enumerate(coeffs):
        acc += c * xp
        xp *= x
    return acc


def generalized_bernoulli_turns(k, char: DirichletChar):
    """B_{k,chi} as a list of (turn, rational) pairs to be assembled in a
    value field:  B = f^(k-1) * sum_a chi(a) B_k(a/f)."""
    f = char.modulus if char.modulus > 1 else 1
    out = []
    for a in range(1, f + 1):
        t = char.value_turn(a)
        if t is None:
            continue
        out.append((t, Fraction(f) ** (k - 1) * bernoulli_poly(k, Fraction(a, f))))
    return out


def generalized_bernoulli_rational(k, char):
    """B_{k,chi} for characters of order <= 2 (exact Fraction)."""
    acc = Fraction(0)
    for t, r in generalized_bernoulli_turns(k, char):
        if t == 0:
            acc += r
        elif t == Fraction(1, 2):
            acc -= r
        else:
            raise ValueError("character not quadratic")
    return acc


def generalized_bernoulli_nf(k, char, field, zeta_order):
    acc = field.zero()
    for t, r in generalized_bernoulli_turns(k, char):
        expo = t * zeta_order
        assert expo.denominator == 1
        if zeta_order <= 2:
            val = field.from_int(1 if int(expo) % max(zeta_order, 1) == 0 else -1)
        else:
            val = field.gen() ** (int(expo) % zeta_order)
        acc = acc + val * r
    return acc


# --------------------------------------------------------------------------
# q-expansions
# --------------------------------------------------------------------------


class QExpansion:
    """Truncated q-series sum c[n] q^n, 0 <= n <= nq, with weight/level tags.

    Coefficients live in any exact ring supporting +, -, *, == (Fraction,
    NFElem, PadicScalar, LambdaTrunc)."""

    __slots__ = ("coeffs", "weight", "level", "char", "zero_elt")

    def __init__(self, coeffs, weight=None, level=None, char=None, zero_elt=Fraction(0)):
        self.coeffs = list(coeffs)
        self.weight = weight
        self.level = level
        self.char = char
        self.zero_elt = zero_elt

    @property
    def nq(self):
        return len(self.coeffs) - 1

    def c(self, n):
        if n > self.nq:
            raise InsufficientPrecision(f"coefficient {n} beyond precision {self.nq}")
        return self.coeffs[n]

    def truncate(self, nq):
        if nq > self.nq:
            raise InsufficientPrecision("cannot extend a truncated series")
        return QExpansion(self.coeffs[: nq + 1], self.weight, self.level, self.char, self.zero_elt)

    def __add__(self, other):
        n = min(self.nq, other.nq)
        return QExpansion(
            [a + b for a, b in zip(self.coeffs[: n + 1], other.coeffs[: n + 1])],
            self.weight, lcm(self.level or 1, other.level or 1), self.char, self.zero_elt,
        )

    def __sub__(self, other):
        n = min(self.nq, other.nq)
        return QExpansion(
            [a - b for a, b in zip(self.coeffs[: n + 1], other.coeffs[: n + 1])],
            self.weight, lcm(self.level or 1, other.level or 1), self.char, self.zero_elt,
        )

    def scale(self, s):
        return QExpansion([c * s for c in self.coeffs], self.weight, self.level, self.char, self.zero_elt)

    def __mul__(self, other):
        """Series product; exact to min(nq1, nq2)."""
        n = min(self.nq, other.nq)
        a, b = self.coeffs, other.coeffs
        out = []
        for m in range(n + 1):
            acc = None
            for i in range(m + 1):
                ai = a[i]
                bi = b[m - i]
                term = ai * bi
                acc = term if acc is None else acc + term
            out.append(acc)
        w = None
        if self.weight is not None and other.weight is not None:
            w = self.weight + other.weight
        return QExpansion(out, w, lcm(self.level or 1, other.level or 1), None, self.zero_elt)

    def is_zero(self):
        return all(_is_zero(c) for c in self.coeffs)

    def __repr__(self):
        head = ", ".join(str(c) for c in self.coeffs[:6])
        return f"QExp[{head}, ...; nq={self.nq}, wt={self.weight}, N={self.level}]"


def _is_zero(c):
    if isinstance(c, Fraction):
        return c == 0
    if isinstance(c, NFElem):
        return c.is_zero()
    if hasattr(c, "is_zero"):
        return c.is_zero()
    return c == 0


def hecke_T(f: QExpansion, ell, weight=None, char=None):
    """T_ell for ell prime to the level: c(n) -> c(n ell) + chi(ell) ell^(w-1) c(n/ell)."""
    w = weight if weight is not None else f.weight
    chi = char if char is not None else f.char
    if w is None:
        raise ValueError("weight required for T_ell")
    new_n = f.nq // ell
    if new_n < 1:
        raise InsufficientPrecision("series too short for T_ell")
    chival = Fraction(1) if chi is None else chi.rational_value(ell) if hasattr(chi, "rational_value") else chi(ell)
    mult = chival * Fraction(ell) ** (w - 1)
    out = []
    for n in range(new_n + 1):
        c = f.coeffs[n * ell]
        if n % ell == 0:
            c = c + f.coeffs[n // ell] * mult
        out.append(c)
    return QExpansion(out, w, f.level, chi, f.zero_elt)


def hecke_U(f: QExpansion, ell):
    """U_ell: c(n) -> c(n ell) (constant term untouched)."""
    new_n = f.nq // ell
    return QExpansion([f.coeffs[n * ell] for n in range(new_n + 1)],
                      f.weight, f.level, f.char, f.zero_elt)


def hecke_V(f: QExpansion, d):
    """V_d: c(n) -> c(n/d); level multiplied by d."""
    out = []
    for n in range(f.nq * d + 1):
        if n % d == 0:
            out.append(f.coeffs[n // d])
        else:
            out.append(f.zero_elt)
    return QExpansion(out, f.weight, (f.level or 1) * d, f.char, f.zero_elt)


DEFAULT_QPREC = 120


def dirichlet_eisenstein(k, chi1, chi2, nq=DEFAULT_QPREC):
    """E_k^{chi1, chi2} with c(n) = sum_{d|n} chi1(n/d) chi2(d) d^(k-1) and
    constant term -B_{k,chi2}/(2k) when chi1 is trivial, else 0.

    Rational-valued characters only (order <= 2); level = f1*f2."""
    par1 = chi1.value_turn(chi1.modulus - 1) if chi1.modulus > 1 else Fraction(0)
    parity = ((Fraction(0) if chi1.modulus == 1 else chi1.value_turn(-1 % chi1.modulus) or Fraction(0))
              + (Fraction(0) if chi2.modulus == 1 else chi2.value_turn(-1 % chi2.modulus) or Fraction(0))) % 1
    want = Fraction(0) if k % 2 == 0 else Fraction(1, 2)
    if parity != want:
        raise ParityMismatch(f"chi1*chi2(-1) != (-1)^{k}")
    if k == 2 and chi1.order == 1 and chi2.order == 1 and chi1.conductor == 1 and chi2.conductor == 1:
        raise UnsupportedWeight("E_2 with trivial characters is not modular")
    f1 = getattr(chi1, "conductor", chi1.modulus)
    if chi1.order == 1 and f1 == 1:
        c0 = -generalized_bernoulli_rational(k, chi2) / (2 * k)
    else:
        c0 = Fraction(0)
    coeffs = [c0]
    for n in range(1, nq + 1):
        acc = Fraction(0)
        for d in _divisors(n):
            t1 = chi1.value_turn(n // d)
            t2 = chi2.value_turn(d)
            if t1 is None or t2 is None:
                continue
            sgn = 1
            if t1 == Fraction(1, 2):
                sgn = -sgn
            elif t1 != 0:
                raise ValueError("non-quadratic character")
            if t2 == Fraction(1, 2):
                sgn = -sgn
            elif t2 != 0:
                raise ValueError("non-quadratic character")
            acc += sgn * Fraction(d) ** (k - 1)
        coeffs.append(acc)
    level = getattr(chi1, "conductor", chi1.modulus) * getattr(chi2, "conductor", chi2.modulus)
    return QExpansion(coeffs, k, max(level, 1), product_char(chi1, chi2))


@lru_cache(maxsize=None)
def _divisors_cached(n):
    out = []
    d = 1
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            if d != n // d:
                out.append(n // d)
        d += 1
    return sorted(out)


def _divisors(n):
    return _divisors_cached(n)


def eisenstein_e2_level(d, nq=DEFAULT_QPREC):
    """E_2(q) - d E_2(q^d), a form of weight 2 and level d."""
    c = [Fraction(1, 24) * (d - 1)]
    for n in range(1, nq + 1):
        s = sum(_divisors(n))
        s2 = sum(_divisors(n // d)) if n % d == 0 else 0
        c.append(Fraction(-s + d * s2))
    # normalized from E2 = 1 - 24 sum sigma_1 q^n: (E2 - dE2(q^d))/(-24)*...
    # we return (1-d)/(-24) + sum (sigma(n) - d sigma(n/d)) q^n scaled by -1:
    out = [Fraction(d - 1, 24)]
    for n in range(1, nq + 1):
        s = sum(_divisors(n))
        s2 = sum(_divisors(n // d)) if n % d == 0 else 0
        out.append(Fraction(s - d * s2))
    return QExpansion(out, 2, d, TrivialChar())


# --------------------------------------------------------------------------
# dimensions (Cohen-Oesterle) and the Sturm bound
# --------------------------------------------------------------------------


def gamma0_index(N):
    out = N
    for q in factorize(N):
        out = out * (q + 1) // q
    return out


def sturm_bound(k, N, margin=10):
    return k * gamma0_index(N) // 12 + 1 + margin


def _co_lambda(r, s, p):
    if 2 * s <= r:
        if r % 2 == 0:
            rp = r // 2
            return p ** rp + p ** (rp - 1)
        rp = (r - 1) // 2
        return 2 * p ** rp
    return 2 * p ** (r - s)


def _char_sum_roots(N, chi, poly):
    """sum over x mod N with poly(x) = 0 of chi(x); returns exact complex
    pair (real Fraction, imag Fraction coefficient of i) -- our characters
    have order dividing 4 in all uses; orders 3/6 handled as turns."""
    total = {}
    for x in range(N):
        if (poly(x)) % N == 0:
            t = chi.value_turn(x) if N > 1 else Fraction(0)
            if t is None:
                continue
            total[t] = total.get(t, 0) + 1
    return total


def dim_modforms(k, N, chi):
    """dim M_k(Gamma0(N), chi) for k >= 2 via Cohen-Oesterle + Eisenstein count."""
    return dim_cuspforms(k, N, chi) + dim_eisenstein(k, N, chi)


def dim_cuspforms(k, N, chi):
    """Cohen-Oesterle dimension of S_k(N, chi), k >= 2."""
    if k < 2:
        raise UnsupportedWeight("weight must be >= 2")
    parity = chi.value_turn(N - 1) if N > 1 else Fraction(0)
    if parity is None:
        parity = Fraction(0)
    if (k % 2 == 0) != (parity == 0):
        return 0
    f = getattr(chi, "conductor", chi.modulus)
    lam = 1
    for p, r in factorize(N).items():
        s = factorize(f).get(p, 0)
        lam *= _co_lambda(r, s, p)
    # elliptic terms
    g4 = {0: Fraction(1, 4), 2: Fraction(-1, 4)}.get(k % 4)
    g3 = {0: Fraction(1, 3), 2: Fraction(-1, 3)}.get(k % 3)
    term4 = _elliptic_term(N, chi, lambda x: x * x + 1, k, 4)
    term3 = _elliptic_term(N, chi, lambda x: x * x + x + 1, k, 3)
    base = Fraction(k - 1, 12) * gamma0_index(N) - Fraction(lam, 2) + term4 + term3
    if k == 2 and f == 1:
        base += 1
    assert base.denominator == 1, (base, k, N)
    return int(base)


def _elliptic_term(N, chi, poly, k, which):
    """gamma_4(k) * sum chi(x) over x^2+1=0, or gamma_3(k) * sum over
    x^2+x+1=0; the sum of chi-values is assembled from turns and the whole
    term is rational."""
    sols = [x for x in range(N) if poly(x) % N == 0] if N > 1 else [0]
    if not sols:
        return Fraction(0)
    # chi-value sum as sum of e^(2 pi i t); with gamma-coefficients below the
    # total is rational.  Our chi have order dividing a small m; the sum of
    # roots of unity over the solution set is Galois-stable in the cases the
    # formula needs, yielding a rational combination of 1 and i (resp. zeta3).
    turns = []
    for x in sols:
        t = chi.value_turn(x) if N > 1 else Fraction(0)
        if t is None:
            return Fraction(0)
        turns.append(t)
    if which == 4:
        if k % 4 == 0:
            gr, gi = Fraction(1, 4), Fraction(0)
        elif k % 4 == 2:
            gr, gi = Fraction(-1, 4), Fraction(0)
        elif k % 4 == 1:
            gr, gi = Fraction(0), Fraction(1, 4)
        else:
            gr, gi = Fraction(0), Fraction(-1, 4)
        # sum of e^{2 pi i t} with t in {0, 1/4, 1/2, 3/4} for our chars
        re = Fraction(0)
        im = Fraction(0)
        for t in turns:
            if t == 0:
                re += 1
            elif t == Fraction(1, 2):
                re -= 1
            elif t == Fraction(1, 4):
                im += 1
            elif t == Fraction(3, 4):
                im -= 1
            else:
                raise ValueError(f"unexpected turn {t} in elliptic term")
        # real part of (gr + i gi) * (re + i im)
        val = gr * re - gi * im
        # the imaginary part must cancel in the total formula; keep real part
        return val
    # which == 3
    if k % 3 == 0:
        g = Fraction(1, 3)
        # sum of chi(x): for order-3 turns pair to -1; handle turns 0,1/3,2/3,1/2...
        return g * _sum_turns_real(turns, allow_sixth=True)
    if k % 3 == 2:
        return Fraction(-1, 3) * _sum_turns_real(turns, allow_sixth=True)
    # k = 1 mod 3: gamma mixes zeta3; implemented via turn pairing
    return _zeta3_term(turns, k)


def _sum_turns_real(turns, allow_sixth=False):
    re = Fraction(0)
    pending = {}
    for t in turns:
        if t == 0:
            re += 1
        elif t == Fraction(1, 2):
            re -= 1
        else:
            pending[t] = pending.get(t, 0) + 1
    # conjugate turns must pair up, each pair t, 1-t summing 2cos(2 pi t)
    for t, cnt in list(pending.items()):
        if cnt == 0:
            continue
        tc = (1 - t) % 1
        if tc == t:
            continue
        if pending.get(tc, 0) != cnt:
            raise ValueError("unpaired complex character values in dimension formula")
        if t < tc:
            if t == Fraction(1, 3):
                re += cnt * Fraction(-1)  # 2cos(2pi/3) = -1
            elif t == Fraction(1, 6):
                re += cnt * Fraction(1)  # 2cos(pi/3) = 1
            elif t == Fraction(1, 4):
                pass  # 2cos(pi/2) = 0
            else:
                raise ValueError(f"unsupported turn {t}")
            pending[t] = pending[tc] = 0
    return re


def _zeta3_term(turns, k):
    # gamma_3(k) vanishes for k = 1 mod 3
    return Fraction(0)


def dim_eisenstein(k, N, chi):
    """Dimension of the Eisenstein subspace of M_k(N, chi), k >= 2 (k=2
    handles the trivial-pair correction)."""
    f_chi = getattr(chi, "conductor", chi.modulus)
    count = 0
    prim = _primitive_pairs_cache(N)
    for (f1, f2, key1, key2, prod_key) in prim:
        if f1 * f2 > N or N % (f1 * f2):
            continue
        if prod_key != _char_key(chi, N):
            continue
        mult = len(_divisors(N // (f1 * f2)))
        if k == 2 and f1 == 1 and f2 == 1:
            mult -= 1
        count += mult
    if k < 2:
        raise UnsupportedWeight("k >= 2 only")
    return count


@lru_cache(maxsize=None)
def _primitive_pairs_cache(N):
    """All pairs of primitive quadratic-or-trivial characters; sufficient for
    real nebentypus.  Keys identify characters by value tables mod N."""
    prim = _primitive_real_chars(N)
    out = []
    for f1, c1 in prim:
        for f2, c2 in prim:
            out.append((f1, f2, _char_key(c1, N), _char_key(c2, N),
                        _char_key(product_char(c1, c2), N)))
    return out


def _primitive_real_chars(N):
    """Primitive real characters of conductor dividing N (including 1)."""
    out = [(1, TrivialChar())]
    # fundamental discriminants with |D| dividing N
    for f in _divisors(N):
        if f == 1:
            continue
        for D in (f, -f):
            from .quadfield import is_fundamental

            if D == 1:
                continue
            if (D > 0 and _is_fundamental_pos(D)) or (D < 0 and is_fundamental(D)):
                out.append((abs(D), KroneckerChar(D)))
    return out


def _is_fundamental_pos(D):
    if D == 1:
        return False
    if D % 4 == 1:
        return _squarefree_int(D)
    if D % 4 == 0:
        m = D // 4
        return m % 4 in (2, 3) and _squarefree_int(m)
    return False


def _squarefree_int(n):
    i = 2
    while i * i <= abs(n):
        if n % (i * i) == 0:
            return False
        i += 1
    return True


def _char_key(chi, N):
    vals = []
    for n in range(1, N + 1):
        if gcd(n, N) == 1:
            vals.append(chi.value_turn(n))
    return tuple(vals)


# --------------------------------------------------------------------------
# exact linear algebra via CRT over word-size primes
# --------------------------------------------------------------------------


class PrimeReducer:
    """Reduce Fraction / NFElem coefficient vectors modulo a word prime."""

    def __init__(self, ell, fields=()):
        self.ell = ell
        self.maps = {}
        for F in fields:
            red = F.reduction_mod(ell)
            if red is None:
                raise ValueError("field has no root mod ell")
            self.maps[id(F)] = red

    def reduce_scalar(self, x):
        ell = self.ell
        if isinstance(x, Fraction):
            den = x.denominator % ell
            if den == 0:
                raise ZeroDivisionError
            return x.numerator % ell * pow(den, -1, ell) % ell
        if isinstance(x, int):
            return x % ell
        if isinstance(x, NFElem):
            red = self.maps.get(id(x.field))
            if red is None:
                red = x.field.reduction_mod(ell)
                if red is None:
                    raise ZeroDivisionError("no root mod ell")
                self.maps[id(x.field)] = red
            return red(x)
        raise TypeError(type(x))

    def reduce_vector(self, xs):
        return np.array([self.reduce_scalar(x) for x in xs], dtype=np.int64)


def _solve_mod(A, B, ell):
    """Solve A x = b for each column b of B over F_ell.

    A: (m x n) int64 array, B: (m x r).  Returns (X, pivots) with X (n x r),
    or None if some system is inconsistent.  Requires A to have full column
    rank mod ell (raises ValueError otherwise).
    """
    m, n = A.shape
    r = B.shape[1]
    M = np.concatenate([A % ell, B % ell], axis=1).astype(np.int64)
    piv_rows = []
    piv_cols = []
    row = 0
    for col in range(n):
        sel = None
        for i in range(row, m):
            if M[i, col] % ell:
                sel = i
                break
        if sel is None:
            raise ValueError(f"column {col} not pivotable: basis dependent mod {ell}")
        if sel != row:
            M[[row, sel]] = M[[sel, row]]
        inv = pow(int(M[row, col]), -1, ell)
        M[row] = M[row] * inv % ell
        colvals = M[:, col].copy()
        colvals[row] = 0
        nz = np.nonzero(colvals)[0]
        if len(nz):
            M[nz] = (M[nz] - np.outer(colvals[nz], M[row])) % ell
        piv_rows.append(row)
        piv_cols.append(col)
        row += 1
        if row == m:
            break
    if len(piv_cols) < n:
        raise ValueError("matrix not of full column rank")
    # consistency: rows beyond the pivots must have zero RHS
    if row < m:
        if np.any(M[row:, n:] % ell):
            return None
    X = np.zeros((n, r), dtype=np.int64)
    for i, col in enumerate(piv_cols):
        X[col] = M[i, n:]
    return X


def rank_mod(A, ell):
    M = (A % ell).astype(np.int64)
    m, n = M.shape
    row = 0
    for col in range(n):
        sel = None
        for i in range(row, m):
            if M[i, col] % ell:
                sel = i
                break
        if sel is None:
            continue
        if sel != row:
            M[[row, sel]] = M[[sel, row]]
        inv = pow(int(M[row, col]), -1, ell)
        M[row] = M[row] * inv % ell
        colvals = M[:, col].copy()
        colvals[row] = 0
        nz = np.nonzero(colvals)[0]
        if len(nz):
            M[nz] = (M[nz] - np.outer(colvals[nz], M[row])) % ell
        row += 1
        if row == m:
            break
    return row


def _rational_reconstruct(a, m):
    """num/den with a = num/den mod m, |num|, den <= sqrt(m/2) (Wang)."""
    a %= m
    bound = isqrt_int(m // 2)
    r0, r1 = m, a
    s0, s1 = 0, 1
    while r1 > bound:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        s0, s1 = s1, s0 - q * s1
    if abs(s1) > bound or s1 == 0:
        return None
    if gcd(r1, s1) != 1:
        return None
    num, den = (r1, s1) if s1 > 0 else (-r1, -s1)
    return Fraction(num, den)


def isqrt_int(n):
    from math import isqrt

    return isqrt(n)


class CRTSolver:
    """Solve B x = f exactly (B a Sturm x dim exact matrix over Q or a small
    number field) by CRT over 61-bit-safe primes with rational
    reconstruction.  Columns of B are basis q-expansions."""

    def __init__(self, columns, fields=(), start_prime=2 ** 20 + 7):
        self.columns = columns  # list of lists (coefficient vectors)
        self.m = len(columns[0])
        self.n = len(columns)
        self.fields = [f for f in fields if f.degree > 1]
        self.start_prime = start_prime
        self._reductions = {}

    def _usable_primes(self):
        ell = self.start_prime
        while True:
            if _is_prime(ell):
                try:
                    red = PrimeReducer(ell, self.fields)
                    A = self._reduced_matrix(ell, red)
                    yield ell, red, A
                except (ZeroDivisionError, ValueError):
                    pass
            ell += 1

    def _reduced_matrix(self, ell, red):
        if ell in self._reductions:
            return self._reductions[ell]
        cols = [red.reduce_vector(c) for c in self.columns]
        A = np.stack(cols, axis=1)
        self._reductions[ell] = A
        return A

    def solve(self, rhs_vectors, max_primes=80):
        """Exact solutions for each rhs (list of exact coefficient vectors).
        Returns list of Fraction/NF coordinate vectors or raises NotInSpace.

        Components of number-field rhs entries are handled by solving for
        each power-basis coordinate separately (the basis must be rational).
        """
        # split NF rhs into rational component vectors
        split = []
        shapes = []
        for f in rhs_vectors:
            comps = _nf_components(f)
            shapes.append(len(comps))
            split.extend(comps)
        sols = self._solve_rational(split, max_primes)
        if sols is None:
            raise NotInSpace("rhs not in the span of the basis")
        out = []
        i = 0
        for f, sh in zip(rhs_vectors, shapes):
            comps = sols[i: i + sh]
            i += sh
            out.append(_nf_recombine(f, comps))
        return out

    def _solve_rational(self, rhs_list, max_primes):
        r = len(rhs_list)
        residues = []  # list of (ell, X)
        crt_mod = 1
        crt_val = None
        result = [[None] * r for _ in range(self.n)]
        gen = self._usable_primes()
        stable = None
        for _count in range(max_primes):
            ell, red, A = next(gen)
            Bcols = [red.reduce_vector(v) for v in rhs_list]
            B = np.stack(Bcols, axis=1) if r else np.zeros((self.m, 0), dtype=np.int64)
            X = _solve_mod(A, B, ell)
            if X is None:
                return None
            if crt_val is None:
                crt_val = X.astype(object)
                crt_mod = ell
            else:
                # CRT combine entrywise
                inv = pow(crt_mod % ell, -1, ell)
                diff = (X - crt_val % ell) % ell
                crt_val = crt_val + crt_mod * ((diff * inv) % ell)
                crt_mod *= ell
            # attempt reconstruction
            done = True
            cand = [[None] * r for _ in range(self.n)]
            for i in range(self.n):
                for j in range(r):
                    q = _rational_reconstruct(int(crt_val[i, j]), crt_mod)
                    if q is None:
                        done = False
                        break
                    cand[i][j] = q
                if not done:
                    break
            if done:
                if stable == cand:
                    return [list(col) for col in zip(*cand)] if r else []
                stable = cand
        raise PrecisionLoss("CRT reconstruction did not stabilize")


def _nf_components(vec):
    """Decompose a vector of Fraction/NFElem into rational component
    vectors (one per power-basis coordinate)."""
    deg = 1
    field = None
    for x in vec:
        if isinstance(x, NFElem):
            field = x.field
            deg = x.field.degree
            break
    if field is None:
        return [list(vec)]
    comps = [[] for _ in range(deg)]
    for x in vec:
        if isinstance(x, NFElem):
            for i in range(deg):
                comps[i].append(x.coords[i])
        else:
            comps[0].append(Fraction(x))
            for i in range(1, deg):
                comps[i].append(Fraction(0))
    return comps


def _nf_recombine(orig_vec, comps):
    field = None
    for x in orig_vec:
        if isinstance(x, NFElem):
            field = x.field
            break
    if field is None:
        return comps[0]
    n = len(comps[0])
    out = []
    for i in range(n):
        out.append(field.elem([comps[j][i] for j in range(len(comps))]))
    return out


# --------------------------------------------------------------------------
# modular-form spaces
# --------------------------------------------------------------------------


class ModFormSpace:
    """M_k(Gamma0(N), chi) spanned by an explicit basis of q-expansions.

    The basis is rational (chi must be real-valued); Hecke operators and
    coefficient extraction run through the CRT solver with exact final
    verification."""

    def __init__(self, weight, level, char, basis, nq, margin=10):
        self.weight = weight
        self.level = level
        self.char = char
        self.basis = basis
        self.nq = nq
        self.sturm = sturm_bound(weight, level, margin)
        if self.sturm > nq:
            raise InsufficientPrecision("basis shorter than the Sturm bound")
        self._solver = CRTSolver(
            [[Fraction(b.coeffs[n]) for n in range(self.sturm + 1)] for b in basis]
        )
        self.hecke_cache = {}

    @property
    def dim(self):
        return len(self.basis)

    def express(self, f: QExpansion, verify=True):
        """Exact coordinates of f in the basis; residual checked through
        min(f.nq, self.nq) when verify is set."""
        if f.nq < self.sturm:
            raise InsufficientPrecision(
                f"need {self.sturm} coefficients, got {f.nq}"
            )
        vec = [f.coeffs[n] for n in range(self.sturm + 1)]
        (x,) = self._solver.solve([vec])
        if verify:
            upto = min(f.nq, self.nq)
            self._verify_exact(x, f, upto)
        return x

    def _verify_exact(self, x, f, upto):
        for n in range(upto + 1):
            acc = None
            for xi, b in zip(x, self.basis):
                if isinstance(xi, Fraction) and xi == 0:
                    continue
                term = xi * b.coeffs[n] if not isinstance(xi, NFElem) else xi * b.coeffs[n]
                acc = term if acc is None else acc + term
            target = f.coeffs[n]
            if acc is None:
                ok = _is_zero(target)
            else:
                diff = acc - target
                ok = _is_zero(diff)
            if not ok:
                raise NotInSpace(f"residual at q^{n}")

    def express_many(self, fs, verify=False):
        vecs = [[f.coeffs[n] for n in range(self.sturm + 1)] for f in fs]
        xs = self._solver.solve(vecs)
        if verify:
            for x, f in zip(xs, fs):
                self._verify_exact(x, f, min(f.nq, self.nq))
        return xs

    def hecke_matrix(self, op, *args):
        """Matrix of a Hecke operator in the basis (columns = images).

        op in {"T", "U"}; args = (ell,).  Entry [i][j]: coefficient of
        basis_i in op(basis_j)."""
        key = (op, args)
        if key in self.hecke_cache:
            return self.hecke_cache[key]
        ell = args[0]
        images = []
        for b in self.basis:
            if op == "T":
                g = hecke_T(b, ell, weight=self.weight, char=self.char)
            elif op == "U":
                g = hecke_U(b, ell)
            else:
                raise ValueError(op)
            if g.nq < self.sturm:
                raise InsufficientPrecision("basis too short for the operator")
            images.append(g)
        cols = self.express_many(images, verify=False)
        # probabilistic exactness is not enough for cached matrices: verify
        # each image against its expansion through the available precision
        for x, g in zip(cols, images):
            self._verify_exact(x, g, min(g.nq, self.sturm))
        mat = [[cols[j][i] for j in range(self.dim)] for i in range(self.dim)]
        self.hecke_cache[key] = mat
        return mat


def build_space(weight, level, char, nq=None, extra_gens=(), margin=10,
                sturm_cap=4000, require_full=True):
    """Span M_weight(Gamma0(level), char) by Eisenstein series, their
    V-shifts and pairwise products, plus caller-supplied generators.

    Raises SpanDeficient when the achieved rank misses the Cohen-Oesterle
    dimension (hard error per the design contract)."""
    if weight < 2:
        raise UnsupportedWeight("weight >= 2 required")
    B = sturm_bound(weight, level, margin)
    if B > sturm_cap:
        from .errors import ResourceCapExceeded

        raise ResourceCapExceeded(
            f"Sturm bound {B} exceeds the configured cap {sturm_cap}"
        )
    nq = nq or (B + 10)
    want = dim_modforms(weight, level, char)
    gens = list(extra_gens)
    gens.extend(_eisenstein_generators(weight, level, char, nq))
    # greedy rank selection modulo one prime
    ell = 2 ** 20 + 7
    while not _is_prime(ell):
        ell += 1
    red = PrimeReducer(ell)
    chosen = []
    rows = []
    Amat = None
    for g in gens:
        if g.nq < B:
            continue
        try:
            v = red.reduce_vector([Fraction(c) for c in g.coeffs[: B + 1]])
        except ZeroDivisionError:
            continue
        rows.append(v)
        test = np.stack(rows, axis=0)
        if rank_mod(test.T, ell) == len(rows):
            chosen.append(g)
        else:
            rows.pop()
        if len(chosen) == want:
            break
    if require_full and len(chosen) < want:
        raise SpanDeficient(len(chosen), want,
                            f"level {level} weight {weight}")
    return ModFormSpace(weight, level, char, chosen, nq, margin)


def _eisenstein_generators(weight, level, char, nq):
    """Candidate spanning set: E_k^{chi1,chi2} V-shifted, and products of
    lower-weight Eisenstein series (V-shifted) with matching character."""
    prim = _primitive_real_chars(level)
    singles = []
    target = _char_key(char, level)
    out = []

    def shifted(e, f1f2):
        for d in _divisors(level // f1f2):
            if e.nq >= nq:
                yield hecke_V(e.truncate(nq), d) if d > 1 else e.truncate(nq)

    # direct weight-k Eisenstein series
    for f1, c1 in prim:
        for f2, c2 in prim:
            if f1 * f2 == 0 or level % (f1 * f2):
                continue
            if _char_key(product_char(c1, c2), level) != target:
                continue
            try:
                if weight == 2 and f1 == 1 and f2 == 1:
                    for d in _divisors(level):
                        if d > 1:
                            out.append(eisenstein_e2_level(d, nq))
                    continue
                e = dirichlet_eisenstein(weight, c1, c2, nq)
            except (ParityMismatch, UnsupportedWeight):
                continue
            out.extend(shifted(e, f1 * f2))
    # products of two Eisenstein series of lower weight
    lower = {}
    for w in range(1, weight):
        for f1, c1 in prim:
            for f2, c2 in prim:
                if f1 * f2 == 0 or level % (f1 * f2):
                    continue
                try:
                    if w == 2 and f1 == 1 and f2 == 1:
                        continue
                    e = dirichlet_eisenstein(w, c1, c2, nq)
                except (ParityMismatch, UnsupportedWeight):
                    continue
                lower.setdefault(w, []).append((f1 * f2, product_char(c1, c2), e))
        if w == 2:
            for d in _divisors(level):
                if d > 1:
                    lower.setdefault(2, []).append((d, TrivialChar(), eisenstein_e2_level(d, nq)))
    for w1 in range(1, weight):
        w2 = weight - w1
        if w2 < 1 or w2 < w1:
            continue
        for (m1, ch1, e1) in lower.get(w1, []):
            for (m2, ch2, e2) in lower.get(w2, []):
                if level % lcm(m1, m2):
                    continue
                if _char_key(product_char(ch1, ch2), level) != target:
                    continue
                prod = e1 * e2
                for d in _divisors(level // lcm(m1, m2)):
                    out.append(hecke_V(prod, d) if d > 1 else prod)
    return out
