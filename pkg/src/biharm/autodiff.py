"""Third-order multivariate Taylor arithmetic (jets) and a finite-difference oracle.

A :class:`Jet3` carries the value and every partial derivative of total order
at most 3 in ``d`` directions.  Coefficients are stored Taylor-normalized
(coefficient of the monomial, i.e. partial / alpha!), one slot per symmetric
multi-index, so products are plain truncated convolutions.

Coefficients may themselves be jets: arithmetic is generic over the scalar
type, which is what lets geometric quantities that already used jets
internally be differentiated again (nesting depth 2 is enough for every
operation in this package).  Mixed-level operands are disambiguated by the
``level`` attribute, not by ``d`` alone.
"""

from __future__ import annotations

import itertools
import math
import numbers
from dataclasses import dataclass
from typing import Callable, Sequence

MAX_ORDER = 3


class ScalarDomainError(ValueError):
    """Evaluation left the real domain (ln of nonpositive, division by zero, ...)."""


# ---------------------------------------------------------------------------
# index tables, cached per direction count
# ---------------------------------------------------------------------------

_TABLES: dict[int, "_Tables"] = {}


@dataclass(frozen=True)
class _Tables:
    d: int
    idx: tuple[tuple[int, ...], ...]          # position -> multi-index
    pos: dict[tuple[int, ...], int]           # multi-index -> position
    fact: tuple[float, ...]                   # alpha! per position
    mul: tuple[tuple[int, int, int], ...]     # (j, k, out) with idx[j]+idx[k] = idx[out]
    deriv: tuple[tuple[tuple[int, int, float], ...], ...]  # per direction: (dst, src, alpha_j+1)


def _tables(d: int) -> _Tables:
    tab = _TABLES.get(d)
    if tab is not None:
        return tab
    idx: list[tuple[int, ...]] = []
    for order in range(MAX_ORDER + 1):
        for combo in itertools.combinations_with_replacement(range(d), order):
            alpha = [0] * d
            for i in combo:
                alpha[i] += 1
            idx.append(tuple(alpha))
    pos = {a: i for i, a in enumerate(idx)}
    fact = tuple(float(math.prod(math.factorial(k) for k in a)) for a in idx)
    mul = []
    for j, a in enumerate(idx):
        for k, b in enumerate(idx):
            if sum(a) + sum(b) <= MAX_ORDER:
                out = tuple(x + y for x, y in zip(a, b))
                mul.append((j, k, pos[out]))
    deriv = []
    for direction in range(d):
        rules = []
        for a in idx:
            if sum(a) <= MAX_ORDER - 1:
                src = list(a)
                src[direction] += 1
                rules.append((pos[tuple(a)], pos[tuple(src)], float(a[direction] + 1)))
        deriv.append(tuple(rules))
    tab = _Tables(d, tuple(idx), pos, fact, tuple(mul), tuple(deriv))
    _TABLES[d] = tab
    return tab


def _coeff_level(coeffs) -> int:
    lvl = 0
    for c in coeffs:
        if isinstance(c, Jet3):
            lvl = max(lvl, c.level)
    return lvl + 1


def _flat_max_abs(x) -> float:
    if isinstance(x, Jet3):
        return max(_flat_max_abs(c) for c in x.c)
    return abs(x)


def real_value(x) -> float:
    """Principal float value of a possibly nested scalar."""
    while isinstance(x, Jet3):
        x = x.c[0]
    return float(x)


def is_constant(x) -> bool:
    """True when x carries no derivative information at any level."""
    if isinstance(x, Jet3):
        return all(_flat_max_abs(c) == 0.0 for c in x.c[1:])
    return isinstance(x, numbers.Real)


# ---------------------------------------------------------------------------
# the jet scalar
# ---------------------------------------------------------------------------

class Jet3:
    """Truncated Taylor scalar: value plus all partials of total order <= 3.

    ``c[pos]`` is the Taylor coefficient for the multi-index at ``pos`` in the
    canonical enumeration (order 0, then 1, 2, 3; each order in
    combinations-with-replacement order).  ``deriv`` drops the top retained
    order, so values read after applying k derivative steps are exact only
    while k <= 3; every formula in this package respects that budget.
    """

    __slots__ = ("d", "c", "level")

    def __init__(self, d: int, coeffs: list):
        self.d = d
        self.c = coeffs
        self.level = _coeff_level(coeffs)

    # -- constructors -------------------------------------------------------

    @staticmethod
    def constant(value, d: int) -> "Jet3":
        tab = _tables(d)
        c = [0.0] * len(tab.idx)
        c[0] = value
        return Jet3(d, c)

    @staticmethod
    def variable(value, d: int, direction: int) -> "Jet3":
        tab = _tables(d)
        c = [0.0] * len(tab.idx)
        c[0] = value
        c[1 + direction] = 1.0
        return Jet3(d, c)

    # -- coefficient access --------------------------------------------------

    @property
    def value(self):
        return self.c[0]

    def partial(self, alpha: Sequence[int]):
        """Partial derivative for a multi-index, e.g. (0, 2) for d2/dy2."""
        alpha = tuple(alpha)
        tab = _tables(self.d)
        if sum(alpha) > MAX_ORDER:
            raise ValueError(f"multi-index {alpha} exceeds order {MAX_ORDER}")
        p = tab.pos[alpha]
        return self.c[p] * tab.fact[p]

    def partial1(self, i: int):
        return self.c[1 + i]

    def grad(self) -> list:
        return [self.c[1 + i] for i in range(self.d)]

    def deriv(self, direction: int) -> "Jet3":
        """Jet of the partial derivative field; top-order slots become zero."""
        tab = _tables(self.d)
        c = [0.0] * len(tab.idx)
        for dst, src, factor in tab.deriv[direction]:
            c[dst] = self.c[src] * factor
        return Jet3(self.d, c)

    # -- operand classification ----------------------------------------------

    def _classify(self, other):
        if isinstance(other, Jet3):
            if other.d == self.d and other.level == self.level:
                return "same"
            if other.level < self.level:
                return "const"
            if other.level > self.level:
                return "higher"
            raise TypeError(
                f"cannot combine jets of equal level but different direction "
                f"counts ({self.d} vs {other.d})"
            )
        if isinstance(other, numbers.Real):
            return "const"
        return None

    # -- arithmetic ----------------------------------------------------------

    def _add_const(self, k) -> "Jet3":
        c = list(self.c)
        c[0] = c[0] + k
        return Jet3(self.d, c)

    def _mul_const(self, k) -> "Jet3":
        return Jet3(self.d, [ci * k for ci in self.c])

    def __add__(self, other):
        kind = self._classify(other)
        if kind == "same":
            return Jet3(self.d, [a + b for a, b in zip(self.c, other.c)])
        if kind == "const":
            return self._add_const(other)
        if kind == "higher":
            return other._add_const(self)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        kind = self._classify(other)
        if kind == "same":
            return Jet3(self.d, [a - b for a, b in zip(self.c, other.c)])
        if kind == "const":
            return self._add_const(-other)
        if kind == "higher":
            return (-other)._add_const(self)
        return NotImplemented

    def __rsub__(self, other):
        return (-self)._add_const(other)

    def __neg__(self):
        return Jet3(self.d, [-ci for ci in self.c])

    def __mul__(self, other):
        kind = self._classify(other)
        if kind == "same":
            a, b = self.c, other.c
            out = [0.0] * len(a)
            for j, k, dst in _tables(self.d).mul:
                out[dst] = out[dst] + a[j] * b[k]
            return Jet3(self.d, out)
        if kind == "const":
            return self._mul_const(other)
        if kind == "higher":
            return other._mul_const(self)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        kind = self._classify(other)
        if kind == "same":
            return self * other._reciprocal()
        if kind == "const":
            return self._mul_const(inv(other))
        if kind == "higher":
            return other._reciprocal()._mul_const(self)
        return NotImplemented

    def __rtruediv__(self, other):
        return self._reciprocal()._mul_const(other)

    def __pow__(self, other):
        return powr(self, other)

    def __rpow__(self, other):
        return powr(other, self)

    # -- composition with a univariate function ------------------------------

    def _compose(self, u0, u1, u2, u3) -> "Jet3":
        """Truncated u(self) given value and first three derivatives of u at self.value."""
        a = self.c[0]
        p = list(self.c)
        p[0] = a - a  # zero of the coefficient type, keeps nesting level intact
        p = Jet3(self.d, p)
        p2 = p * p
        p3 = p2 * p
        out = p._mul_const(u1) + p2._mul_const(u2 * 0.5) + p3._mul_const(u3 / 6.0)
        return out._add_const(u0)

    def _reciprocal(self) -> "Jet3":
        a = self.c[0]
        if real_value(a) == 0.0:
            raise ScalarDomainError("division by zero")
        i1 = inv(a)
        i2 = i1 * i1
        i3 = i2 * i1
        i4 = i2 * i2
        return self._compose(i1, -i2, 2.0 * i3, -6.0 * i4)

    def __repr__(self):
        return f"Jet3(d={self.d}, value={real_value(self):g})"


def seed(point: Sequence) -> list[Jet3]:
    """Independent-variable jets at a point: value point[i], unit first-order slot i."""
    d = len(point)
    if d == 0:
        raise ValueError("seed needs at least one coordinate")
    return [Jet3.variable(point[i], d, i) for i in range(d)]


# ---------------------------------------------------------------------------
# generic transcendental functions (float or Jet3, any nesting level)
# ---------------------------------------------------------------------------

def inv(x):
    if isinstance(x, Jet3):
        return x._reciprocal()
    if x == 0.0:
        raise ScalarDomainError("division by zero")
    return 1.0 / x


def exp(x):
    if isinstance(x, Jet3):
        e = exp(x.c[0])
        return x._compose(e, e, e, e)
    return math.exp(x)


def ln(x):
    if real_value(x) <= 0.0:
        raise ScalarDomainError("ln of a nonpositive value")
    if isinstance(x, Jet3):
        a = x.c[0]
        i1 = inv(a)
        i2 = i1 * i1
        return x._compose(ln(a), i1, -i2, 2.0 * (i2 * i1))
    return math.log(x)


def sqrt(x):
    if isinstance(x, Jet3):
        if real_value(x) <= 0.0:
            raise ScalarDomainError("sqrt of a nonpositive value in a derivative context")
        a = x.c[0]
        s = sqrt(a)
        i1 = inv(s)
        i2 = i1 * i1
        i3 = i2 * i1
        return x._compose(s, 0.5 * i1, -0.25 * i3, 0.375 * (i3 * i2))
    if x < 0.0:
        raise ScalarDomainError("sqrt of a negative value")
    return math.sqrt(x)


def sin(x):
    if isinstance(x, Jet3):
        s, c = sin(x.c[0]), cos(x.c[0])
        return x._compose(s, c, -s, -c)
    return math.sin(x)


def cos(x):
    if isinstance(x, Jet3):
        s, c = sin(x.c[0]), cos(x.c[0])
        return x._compose(c, -s, -c, s)
    return math.cos(x)


def tan(x):
    if isinstance(x, Jet3):
        t = tan(x.c[0])
        u1 = t * t + 1.0
        return x._compose(t, u1, 2.0 * (t * u1), 2.0 * (u1 * (3.0 * (t * t) + 1.0)))
    return math.tan(x)


def sinh(x):
    if isinstance(x, Jet3):
        s, c = sinh(x.c[0]), cosh(x.c[0])
        return x._compose(s, c, s, c)
    return math.sinh(x)


def cosh(x):
    if isinstance(x, Jet3):
        s, c = sinh(x.c[0]), cosh(x.c[0])
        return x._compose(c, s, c, s)
    return math.cosh(x)


def tanh(x):
    if isinstance(x, Jet3):
        t = tanh(x.c[0])
        u1 = 1.0 - t * t
        return x._compose(t, u1, -2.0 * (t * u1), -2.0 * (u1 * (1.0 - 3.0 * (t * t))))
    return math.tanh(x)


def absval(x):
    if isinstance(x, Jet3):
        s = 1.0 if real_value(x) > 0.0 else (-1.0 if real_value(x) < 0.0 else 0.0)
        return x._compose(absval(x.c[0]), s, 0.0, 0.0)
    return abs(x)


def _int_pow(x, n: int):
    if n == 0:
        return 1.0
    if n < 0:
        return inv(_int_pow(x, -n))
    out = x
    for _ in range(n - 1):
        out = out * x
    return out


def powr(x, y):
    """x ** y; integer constant exponents work for any base, otherwise base > 0."""
    if is_constant(y):
        e = real_value(y)
        if float(e).is_integer():
            return _int_pow(x, int(e))
        if real_value(x) <= 0.0:
            raise ScalarDomainError(
                "pow with a non-integer exponent needs a positive base"
            )
        return exp(ln(x) * e)
    if real_value(x) <= 0.0:
        raise ScalarDomainError("pow with a non-constant exponent needs a positive base")
    return exp(ln(x) * y)


FUNCTIONS: dict[str, Callable] = {
    "sin": sin,
    "cos": cos,
    "tan": tan,
    "sinh": sinh,
    "cosh": cosh,
    "tanh": tanh,
    "exp": exp,
    "ln": ln,
    "sqrt": sqrt,
    "abs": absval,
}


# ---------------------------------------------------------------------------
# finite-difference oracle (deliberately independent of the jets above)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FDScheme:
    """Central-difference steps per derivative order, scaled by coordinate size."""

    h1: float = 1e-6
    h2: float = 1e-4
    h3: float = 1e-3

    def __post_init__(self):
        if not (self.h1 > 0 and self.h2 > 0 and self.h3 > 0):
            raise ValueError("FD steps must be positive")

    def step(self, order: int) -> float:
        return (self.h1, self.h2, self.h3)[order - 1]


DEFAULT_FD = FDScheme()


def fd_partial(
    f: Callable[[Sequence[float]], float],
    point: Sequence[float],
    multi_index: Sequence[int],
    scheme: FDScheme = DEFAULT_FD,
) -> float:
    """Central-difference estimate of a partial derivative of total order <= 3.

    Pure derivatives use the standard 3- and 4-point stencils; mixed ones nest
    the pure stencils coordinate by coordinate.  The step is chosen from the
    total order of the requested partial and scaled per coordinate.
    """
    alpha = tuple(int(a) for a in multi_index)
    total = sum(alpha)
    if total > MAX_ORDER:
        raise ValueError(f"multi-index {alpha} exceeds order {MAX_ORDER}")
    if any(a < 0 for a in alpha):
        raise ValueError("multi-index entries must be nonnegative")
    point = [float(x) for x in point]
    if total == 0:
        return f(point)
    h_base = scheme.step(total)

    def shifted(p, i, delta):
        q = list(p)
        q[i] += delta
        return q

    def estimate(p, a):
        for i, k in enumerate(a):
            if k > 0:
                rest = list(a)
                rest[i] = 0
                rest = tuple(rest)
                h = h_base * max(1.0, abs(p[i]))
                g = (lambda q: f(q)) if sum(rest) == 0 else (lambda q: estimate(q, rest))
                if k == 1:
                    return (g(shifted(p, i, h)) - g(shifted(p, i, -h))) / (2.0 * h)
                if k == 2:
                    return (g(shifted(p, i, h)) - 2.0 * g(p) + g(shifted(p, i, -h))) / (h * h)
                if k == 3:
                    return (
                        g(shifted(p, i, 2 * h))
                        - 2.0 * g(shifted(p, i, h))
                        + 2.0 * g(shifted(p, i, -h))
                        - g(shifted(p, i, -2 * h))
                    ) / (2.0 * h ** 3)
                raise ValueError(f"unsupported per-coordinate order {k}")
        raise AssertionError("unreachable")

    return estimate(point, alpha)
