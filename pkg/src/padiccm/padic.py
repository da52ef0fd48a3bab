"""Exact p-adic scalars at capped absolute precision, the Iwasawa logarithm,
truncated Iwasawa-algebra elements, and p-adic matrix algebra including the
ordinary (unit-root) idempotent.

A scalar is p^v * u with u a unit, known modulo p^N (N = absolute
precision).  Operations propagate the honest precision: nothing is ever
reported beyond what the inputs support.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import (
    HDivisibleByP,
    NonUnitInput,
    NotOneUnit,
    PrecisionLoss,
    ZeroInput,
)

DEFAULT_PREC = 20


def _vp(n, p):
    if n == 0:
        return None
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


class PadicScalar:
    """p^valuation * unit, known modulo p^prec (absolute precision)."""

    __slots__ = ("p", "valuation", "unit", "prec")

    def __init__(self, p, valuation, unit, prec):
        self.p = p
        self.prec = prec
        rel = prec - valuation
        if rel <= 0 or unit % p ** rel == 0:
            # indistinguishable from zero at this precision
            self.valuation = prec
            self.unit = 0
            return
        unit %= p ** rel
        # factor any residual p-part into the valuation
        w = _vp(unit, p)
        if w:
            valuation += w
            rel -= w
            unit //= p ** w
            if rel <= 0:
                self.valuation = prec
                self.unit = 0
                return
            unit %= p ** rel
        self.valuation = valuation
        self.unit = unit

    # --- constructors -----------------------------------------------------
    @classmethod
    def from_int(cls, n, p, prec=DEFAULT_PREC):
        if n == 0:
            return cls(p, prec, 0, prec)
        v = _vp(n, p)
        return cls(p, v, n // p ** v, prec)

    @classmethod
    def from_rational(cls, q, p, prec=DEFAULT_PREC):
        q = Fraction(q)
        if q == 0:
            return cls(p, prec, 0, prec)
        vn = _vp(q.numerator, p)
        vd = _vp(q.denominator, p)
        v = vn - vd
        num = q.numerator // p ** vn
        den = q.denominator // p ** vd
        rel = prec - v
        if rel <= 0:
            return cls(p, prec, 0, prec)
        unit = num * pow(den, -1, p ** rel) % p ** rel
        return cls(p, v, unit, prec)

    @classmethod
    def zero(cls, p, prec=DEFAULT_PREC):
        return cls(p, prec, 0, prec)

    @classmethod
    def one(cls, p, prec=DEFAULT_PREC):
        return cls(p, 0, 1, prec)

    # --- structure ----------------------------------------------------------
    def is_zero(self):
        return self.unit == 0

    def is_unit(self):
        return not self.is_zero() and self.valuation == 0

    def lift(self):
        """Integer representative of p^v*u in [0, p^prec) (requires v >= 0)."""
        if self.is_zero():
            return 0
        if self.valuation < 0:
            raise ValueError("negative valuation has no integer lift")
        return self.unit * self.p ** self.valuation % self.p ** self.prec

    def rel_prec(self):
        return self.prec - self.valuation

    def _check(self, other):
        if self.p != other.p:
            raise ValueError("mixed primes")

    # --- arithmetic ----------------------------------------------------------
    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        self._check(other)
        p = self.p
        N = min(self.prec, other.prec)
        if self.is_zero():
            return PadicScalar(p, other.valuation, other.unit, N)
        if other.is_zero():
            return PadicScalar(p, self.valuation, self.unit, N)
        v = min(self.valuation, other.valuation)
        rel = N - v
        if rel <= 0:
            return PadicScalar.zero(p, N)
        m = p ** rel
        a = self.unit * pow(p, self.valuation - v) % m
        b = other.unit * pow(p, other.valuation - v) % m
        s = (a + b) % m
        return PadicScalar(p, v, s, N)

    __radd__ = __add__

    def __neg__(self):
        if self.is_zero():
            return self
        rel = self.rel_prec()
        return PadicScalar(self.p, self.valuation, self.p ** rel - self.unit, self.prec)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def _coerce(self, other):
        if isinstance(other, PadicScalar):
            return other
        if isinstance(other, int):
            return PadicScalar.from_int(other, self.p, self.prec)
        if isinstance(other, Fraction):
            return PadicScalar.from_rational(other, self.p, self.prec)
        return NotImplemented

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        self._check(other)
        p = self.p
        if self.is_zero() or other.is_zero():
            # O(p^N) * (p^v * unit known mod p^M) = O(p^(N+v)) at worst
            if self.is_zero() and other.is_zero():
                return PadicScalar.zero(p, self.prec + other.prec)
            z, y = (self, other) if self.is_zero() else (other, self)
            return PadicScalar.zero(p, z.prec + y.valuation)
        N = min(self.valuation + other.prec, other.valuation + self.prec)
        v = self.valuation + other.valuation
        rel = N - v
        if rel <= 0:
            return PadicScalar.zero(p, N)
        u = self.unit * other.unit % p ** rel
        return PadicScalar(p, v, u, N)

    __rmul__ = __mul__

    def inverse(self):
        if self.is_zero():
            raise ZeroInput("cannot invert zero at precision")
        p = self.p
        rel = self.rel_prec()
        u = pow(self.unit, -1, p ** rel)
        return PadicScalar(p, -self.valuation, u, rel - self.valuation)

    def __truediv__(self, other):
        other = self._coerce(other)
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, n):
        if n < 0:
            return self.inverse() ** (-n)
        out = PadicScalar.one(self.p, self.prec)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return (self - other).is_zero()

    def __repr__(self):
        if self.is_zero():
            return f"O({self.p}^{self.prec})"
        return f"{self.unit}*{self.p}^{self.valuation} + O({self.p}^{self.prec})"


# --------------------------------------------------------------------------
# basic p-adic functions
# --------------------------------------------------------------------------


def teichmuller(a, p, prec=DEFAULT_PREC):
    """The (p-1)-st root of unity congruent to a mod p."""
    if isinstance(a, PadicScalar):
        if not a.is_unit():
            raise NonUnitInput("teichmuller needs a p-adic unit")
        prec = min(prec, a.prec)
        x = a.lift()
    else:
        if a % p == 0:
            raise NonUnitInput(f"{a} is divisible by {p}")
        x = a
    m = p ** prec
    x %= m
    while True:
        y = pow(x, p, m)
        if y == x:
            break
        x = y
    return PadicScalar(p, 0, x, prec)


def angle_bracket(n, p, prec=DEFAULT_PREC):
    """1-unit part <n> = n / omega(n) of an integer (or unit scalar)."""
    if isinstance(n, PadicScalar):
        x = n
        if not x.is_unit():
            raise NonUnitInput("angle_bracket needs a unit")
        prec = min(prec, x.prec)
    else:
        if n % p == 0:
            raise NonUnitInput(f"{n} is divisible by {p}")
        x = PadicScalar.from_int(n, p, prec)
    w = teichmuller(x, p, prec)
    return x / w


def _log_one_unit(z_lift, p, prec):
    """log(1+z) for v_p(z) >= 1, via the convergent series with guard digits."""
    # term k has valuation >= k - v_p(k); run k until that clears prec
    kmax = prec
    while kmax - _vp_bound(kmax, p) <= prec:
        kmax += 1
    guard = _vp_bound(kmax, p) + 2
    m = p ** (prec + guard)
    z = z_lift % m
    term = z  # z^k mod m, exact to the guard
    acc = 0
    for k in range(1, kmax + 1):
        vk = _vp(k, p) or 0
        kp = k // p ** vk
        t = term
        if vk:
            # z^k is divisible by p^k as a p-adic integer; the stored residue
            # keeps enough guard digits for an exact shift
            t = t // p ** vk if t % p ** vk == 0 else (t % m) // p ** vk
        contrib = t * pow(kp, -1, m) % m
        acc = (acc - contrib) % m if k % 2 == 0 else (acc + contrib) % m
        term = term * z % m
    acc %= p ** prec
    if acc == 0:
        return PadicScalar.zero(p, prec)
    return PadicScalar(p, 0, acc, prec)


def _vp_bound(n, p):
    # floor(log_p(n))
    b = 0
    while p ** (b + 1) <= n:
        b += 1
    return b


def iwasawa_log(x: PadicScalar):
    """Iwasawa logarithm: log_p(p) = 0, log_p(zeta) = 0, series on 1-units."""
    if x.is_zero():
        raise ZeroInput("log of zero")
    p, prec = x.p, x.rel_prec()
    w = teichmuller(PadicScalar(p, 0, x.unit, prec), p, prec)
    one_unit = PadicScalar(p, 0, x.unit, prec) / w
    z = one_unit - PadicScalar.one(p, prec)
    if z.is_zero():
        return PadicScalar.zero(p, prec)
    return _log_one_unit(z.lift(), p, prec)


def nth_root_one_unit(x: PadicScalar, h: int):
    """Unique h-th root of a 1-unit in 1 + pZp (h coprime to p), by Newton."""
    p = x.p
    if h % p == 0:
        raise HDivisibleByP(f"{h} divisible by {p}")
    if x.is_zero() or x.valuation != 0 or (x.unit - 1) % p:
        if not (not x.is_zero() and x.valuation == 0 and (x.unit - 1) % p == 0):
            raise NotOneUnit("argument not congruent to 1 mod p")
    if h == 1:
        return x
    if h < 0:
        return nth_root_one_unit(x.inverse(), -h)
    prec = x.rel_prec()
    m = p ** prec
    a = x.lift() % m
    y = 1
    pk = p
    while pk < m:
        pk = min(pk * pk, m)
        # Newton for f(y) = y^h - a
        fy = (pow(y, h, pk) - a) % pk
        dy = h * pow(y, h - 1, pk) % pk
        y = (y - fy * pow(dy, -1, pk)) % pk
    assert pow(y, h, m) == a % m
    return PadicScalar(p, 0, y, prec)


# --------------------------------------------------------------------------
# truncated Iwasawa algebra
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PadicContext:
    """Shared computation context: prime, absolute precision, X-truncation
    order, and the normalization epsilon_Sigma(gamma0) = 1 + p."""

    p: int
    prec: int = DEFAULT_PREC
    r: int = 1

    def gamma_unit(self):
        return PadicScalar.from_int(1 + self.p, self.p, self.prec)

    def gamma_log(self):
        return iwasawa_log(self.gamma_unit())

    def zero(self):
        return PadicScalar.zero(self.p, self.prec)

    def one(self):
        return PadicScalar.one(self.p, self.prec)

    def scalar(self, q):
        return PadicScalar.from_rational(Fraction(q), self.p, self.prec)


class LambdaTrunc:
    """Polynomial in X modulo X^(r+1) with PadicScalar coefficients."""

    __slots__ = ("ctx", "coeffs")

    def __init__(self, ctx: PadicContext, coeffs):
        self.ctx = ctx
        cs = list(coeffs)[: ctx.r + 1]
        while len(cs) < ctx.r + 1:
            cs.append(ctx.zero())
        self.coeffs = cs

    @classmethod
    def const(cls, ctx, scalar):
        if not isinstance(scalar, PadicScalar):
            scalar = ctx.scalar(scalar)
        return cls(ctx, [scalar])

    @classmethod
    def X(cls, ctx):
        return cls(ctx, [ctx.zero(), ctx.one()])

    def __add__(self, other):
        other = self._coerce(other)
        return LambdaTrunc(self.ctx, [a + b for a, b in zip(self.coeffs, other.coeffs)])

    __radd__ = __add__

    def __neg__(self):
        return LambdaTrunc(self.ctx, [-a for a in self.coeffs])

    def __sub__(self, other):
        other = self._coerce(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def _coerce(self, other):
        if isinstance(other, LambdaTrunc):
            return other
        if isinstance(other, (int, Fraction, PadicScalar)):
            return LambdaTrunc.const(self.ctx, other)
        raise TypeError(f"cannot coerce {type(other)}")

    def __mul__(self, other):
        other = self._coerce(other)
        r = self.ctx.r
        out = [self.ctx.zero() for _ in range(r + 1)]
        for i, a in enumerate(self.coeffs):
            if a.is_zero():
                continue
            for j, b in enumerate(other.coeffs):
                if i + j > r:
                    break
                out[i + j] = out[i + j] + a * b
        return LambdaTrunc(self.ctx, out)

    __rmul__ = __mul__

    def __pow__(self, n):
        out = LambdaTrunc.const(self.ctx, 1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other):
        other = self._coerce(other)
        return all((a - b).is_zero() for a, b in zip(self.coeffs, other.coeffs))

    def specialize(self, k):
        """nu_k: X -> ((1+p)^k - 1)/log(1+p); exact for polynomials."""
        ctx = self.ctx
        xk = (ctx.gamma_unit() ** k - ctx.one()) / ctx.gamma_log()
        acc = ctx.zero()
        for c in reversed(self.coeffs):
            acc = acc * xk + c
        return acc

    def __repr__(self):
        return " + ".join(f"({c})*X^{i}" for i, c in enumerate(self.coeffs))


def group_element(a, ctx: PadicContext):
    """[gamma0^a] = (1 + c X)^a truncated at X^(r+1), c = log_p(eps(gamma0)).

    a may be an integer or a PadicScalar exponent; binom(a, j) is p-integral.
    """
    if not isinstance(a, PadicScalar):
        a = ctx.scalar(a)
    c = ctx.gamma_log()
    coeffs = [ctx.one()]
    binom = ctx.one()
    cj = ctx.one()
    for j in range(1, ctx.r + 1):
        binom = binom * (a - (j - 1)) / ctx.scalar(j)
        cj = cj * c
        coeffs.append(binom * cj)
    return LambdaTrunc(ctx, coeffs)


def group_element_of_unit(u: PadicScalar, ctx: PadicContext):
    """[sigma] for the group element with eps_Sigma(sigma) = u (a 1-unit)."""
    a = iwasawa_log(u) / ctx.gamma_log()
    return group_element(a, ctx)


# --------------------------------------------------------------------------
# dense p-adic matrices and the ordinary idempotent
# --------------------------------------------------------------------------


class PadicMatrix:
    """Dense square matrix over Z/p^prec (integer entries, common precision)."""

    __slots__ = ("p", "prec", "n", "rows")

    def __init__(self, p, prec, rows):
        self.p = p
        self.prec = prec
        self.n = len(rows)
        m = p ** prec
        self.rows = [[int(x) % m for x in row] for row in rows]
        for row in self.rows:
            if len(row) != self.n:
                raise ValueError("matrix not square")

    @classmethod
    def from_scalars(cls, entries, p=None, prec=None):
        n = len(entries)
        ps = [x for row in entries for x in row if isinstance(x, PadicScalar)]
        if ps:
            p = ps[0].p
            prec = min(x.prec for x in ps)
        rows = []
        for row in entries:
            r = []
            for x in row:
                if isinstance(x, PadicScalar):
                    if x.valuation < 0:
                        raise PrecisionLoss("matrix entry not p-integral")
                    r.append(x.lift() % p ** prec)
                else:
                    r.append(int(x) % p ** prec)
            rows.append(r)
        return cls(p, prec, rows)

    @classmethod
    def identity(cls, n, p, prec):
        return cls(p, prec, [[1 if i == j else 0 for j in range(n)] for i in range(n)])

    def __mul__(self, other):
        if isinstance(other, PadicMatrix):
            m = self.p ** min(self.prec, other.prec)
            n = self.n
            bt = list(zip(*other.rows))
            rows = [
                [sum(a * b for a, b in zip(row, col)) % m for col in bt]
                for row in self.rows
            ]
            return PadicMatrix(self.p, min(self.prec, other.prec), rows)
        m = self.p ** self.prec
        return PadicMatrix(
            self.p, self.prec, [[x * other % m for x in row] for row in self.rows]
        )

    def __add__(self, other):
        m = self.p ** min(self.prec, other.prec)
        rows = [
            [(a + b) % m for a, b in zip(r1, r2)]
            for r1, r2 in zip(self.rows, other.rows)
        ]
        return PadicMatrix(self.p, min(self.prec, other.prec), rows)

    def __sub__(self, other):
        m = self.p ** min(self.prec, other.prec)
        rows = [
            [(a - b) % m for a, b in zip(r1, r2)]
            for r1, r2 in zip(self.rows, other.rows)
        ]
        return PadicMatrix(self.p, min(self.prec, other.prec), rows)

    def power(self, e):
        out = PadicMatrix.identity(self.n, self.p, self.prec)
        base = self
        while e:
            if e & 1:
                out = out * base
            base = base * base
            e >>= 1
        return out

    def equal_mod(self, other, digits):
        m = self.p ** digits
        return all(
            (a - b) % m == 0
            for r1, r2 in zip(self.rows, other.rows)
            for a, b in zip(r1, r2)
        )

    def charpoly(self):
        """Characteristic polynomial mod p^prec by Berkowitz (division-free).

        Returns [c0, ..., cn] with cn = 1 (monic), det(T*I - A).
        """
        n = self.n
        mod = self.p ** self.prec
        A = self.rows
        # Berkowitz: iteratively build the char poly of leading principal minors
        poly = [1]  # char poly of the empty matrix
        for i in range(n):
            # principal submatrix A[0..i][0..i]
            a = A[i][i]
            R = [A[i][j] for j in range(i)]  # row to the left
            C = [A[j][i] for j in range(i)]  # column above
            M = [row[:i] for row in A[:i]]
            # Toeplitz coefficients t_0 .. t_{i+1}
            t = [1, -a % mod]
            vec = C[:]
            for k in range(i):
                s = sum(R[j] * vec[j] for j in range(i)) % mod
                t.append(-s % mod)
                if k < i - 1:
                    vec = [sum(M[x][y] * vec[y] for y in range(i)) % mod for x in range(i)]
            # multiply poly (degree i) by the Toeplitz polynomial
            newpoly = [0] * (i + 2)
            for d1, c1 in enumerate(poly):
                if c1:
                    for d2, c2 in enumerate(t):
                        if d1 + d2 <= i + 1 and c2:
                            newpoly[d1 + d2] = (newpoly[d1 + d2] + c1 * c2) % mod
            poly = newpoly
        # poly[d] is the coefficient of T^{n-d} (Berkowitz order); reverse
        coeffs = list(reversed(poly))
        return [c % mod for c in coeffs]

    def __repr__(self):
        return f"PadicMatrix({self.n}x{self.n} mod {self.p}^{self.prec})"


def _polymod_mul(a, b, mod):
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] = (out[i + j] + x * y) % mod
    while out and out[-1] % mod == 0:
        out.pop()
    return out


def _polymod_divmod(a, b, mod):
    # b monic required
    a = [x % mod for x in a]
    assert b[-1] % mod == 1
    q = [0] * max(0, len(a) - len(b) + 1)
    while len(a) >= len(b):
        if a[-1] % mod == 0:
            a.pop()
            continue
        d = len(a) - len(b)
        c = a[-1] % mod
        q[d] = c
        for i in range(len(b)):
            a[d + i] = (a[d + i] - c * b[i]) % mod
        while a and a[-1] % mod == 0:
            a.pop()
    return [x % mod for x in q], a


def _pm_add(a, b, mod):
    out = [0] * max(len(a), len(b))
    for i, x in enumerate(a):
        out[i] = x % mod
    for i, y in enumerate(b):
        out[i] = (out[i] + y) % mod
    while out and out[-1] % mod == 0:
        out.pop()
    return out


def _pm_sub(a, b, mod):
    return _pm_add(a, [-y for y in b], mod)


def _poly_xgcd_fp(a, b, p):
    # over F_p; returns (g, u, v) with u*a + v*b = g, g monic
    r0, r1 = [x % p for x in a], [x % p for x in b]
    while r0 and r0[-1] == 0:
        r0.pop()
    while r1 and r1[-1] == 0:
        r1.pop()
    s0, s1 = [1], []
    t0, t1 = [], [1]
    while r1:
        inv = pow(r1[-1], -1, p)
        mon = [x * inv % p for x in r1]
        q, r = _polymod_divmod(r0, mon, p)
        q = [x * inv % p for x in q]
        r0, r1 = r1, r
        s0, s1 = s1, _pm_sub(s0, _polymod_mul(q, s1, p), p)
        t0, t1 = t1, _pm_sub(t0, _polymod_mul(q, t1, p), p)
    inv = pow(r0[-1], -1, p)
    g = [x * inv % p for x in r0]
    u = [x * inv % p for x in s0]
    v = [x * inv % p for x in t0]
    return g, u, v


def hensel_factor_split(f, p, prec):
    """Split monic f over Z/p^prec as g*h with g == T^a (mod p) and h having
    unit constant term (unit-root part).  Returns (g, h, u, v) with
    u*g + v*h = 1.  Raises PrecisionLoss if the mod-p shape degenerates.
    """
    mod = p ** prec
    n = len(f) - 1
    fb = [c % p for c in f]
    a = 0
    while a <= n and fb[a] == 0:
        a += 1
    if a > n:
        raise PrecisionLoss("charpoly vanishes mod p; entries not as expected")
    # g0 = T^a, h0 = f/T^a mod p
    g = [0] * a + [1]
    h0 = fb[a:]
    inv = pow(h0[-1], -1, p)  # monic already for charpoly, keep general
    h = [c * inv % p for c in h0]
    if a == 0:
        return [1], list(f), [1], [0]
    if len(h) == 1:
        return list(f), [1], [0], [1]
    # Bezout mod p
    _g, u, v = _poly_xgcd_fp(g, h, p)
    if _g != [1]:
        raise PrecisionLoss("unit-root and positive-slope parts not coprime mod p")
    m = p
    while m < mod:
        m2 = min(m * m, mod)
        # quadratic Hensel step, all mod m2.  From u*g + v*h = 1 one gets the
        # exact split e = g*r + h*(v*e + q*g) with (q, r) = divmod(u*e, h),
        # so g += v*e + q*g keeps g monic and h += r.
        e = _pm_sub([x % m2 for x in f], _polymod_mul(g, h, m2), m2)
        q, r = _polymod_divmod(_polymod_mul(u, e, m2), h, m2)
        g = _pm_add(g, _pm_add(_polymod_mul(v, e, m2), _polymod_mul(q, g, m2), m2), m2)
        h = _pm_add(h, r, m2)
        # restore the Bezout identity to the new modulus the same way
        b = _pm_sub(_pm_add(_polymod_mul(u, g, m2), _polymod_mul(v, h, m2), m2), [1], m2)
        q2, r2 = _polymod_divmod(_polymod_mul(u, b, m2), h, m2)
        u = _pm_sub(u, r2, m2)
        v = _pm_sub(v, _pm_add(_polymod_mul(v, b, m2), _polymod_mul(q2, g, m2), m2), m2)
        m = m2
    # sanity: the lifted data must satisfy both identities at full precision
    assert _pm_sub([x % mod for x in f], _polymod_mul(g, h, mod), mod) == []
    assert _pm_sub(_pm_add(_polymod_mul(u, g, mod), _polymod_mul(v, h, mod), mod), [1], mod) == []
    return g, h, u, v


def newton_polygon_unit_count(coeffs, p):
    """Number of unit roots of a monic p-integral polynomial = deg - j0,
    where j0 is the smallest index with unit coefficient."""
    n = len(coeffs) - 1
    for j, c in enumerate(coeffs):
        if c % p != 0:
            return n - j
    return 0


def unit_root_idempotent(U: PadicMatrix):
    """Idempotent onto the unit-root generalized eigenspace of U.

    Charpoly is split by Hensel lifting into the positive-slope part g
    (== T^a mod p) and the unit-root part h; with u*g + v*h = 1 the
    idempotent is e = v(U) h(U)... onto ker h is wrong way: e fixes the
    unit-root part, i.e. e = u(U) g(U) acts as identity there.
    """
    p, prec, n = U.p, U.prec, U.n
    mod = p ** prec
    f = U.charpoly()
    g, h, u, v = hensel_factor_split(f, p, prec)
    if len(g) == 1:  # no positive-slope part
        e = PadicMatrix.identity(n, p, prec)
    elif len(h) == 1:  # no unit-root part
        e = PadicMatrix(p, prec, [[0] * n for _ in range(n)])
    else:
        # e = u(U)*g(U): kills ker g(U)^infty? On the unit-root space
        # (ker h(U)) we have v(U)h(U) = 0 so u(U)g(U) = 1.  On the
        # positive-slope space (ker g(U)) u(U)g(U) = 0.  So e = u(U)g(U).
        ug = _polymod_mul(u, g, mod)
        e = _apply_poly(ug, U)
    # verification at full precision
    if not (e * e).equal_mod(e, prec):
        raise PrecisionLoss("idempotent verification e^2 = e failed")
    if not (e * U).equal_mod(U * e, prec):
        raise PrecisionLoss("idempotent verification eU = Ue failed")
    return e


def _apply_poly(coeffs, A: PadicMatrix):
    n = A.n
    out = PadicMatrix(A.p, A.prec, [[0] * n for _ in range(n)])
    for c in reversed(coeffs):
        out = out * A + PadicMatrix.identity(n, A.p, A.prec) * c
    return out


def ordinary_projector_limit(U: PadicMatrix, digits, max_n=400):
    """Brute-force oracle e = lim U^{n!}: iterate B <- B^n until stable
    modulo p^digits.  Returns the stabilized matrix."""
    B = U
    prev = None
    stable = 0
    for n in range(2, max_n + 1):
        B = B.power(n)
        if prev is not None and B.equal_mod(prev, digits):
            stable += 1
            if stable >= 3:
                return B
        else:
            stable = 0
        prev = B
    raise PrecisionLoss(f"U^(n!) did not stabilize mod p^{digits} by n={max_n}")
