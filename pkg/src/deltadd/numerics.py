"""Configurable-precision binary floating-point arithmetic.

Every numeric operation in this package goes through a :class:`Precision`,
which emulates a binary floating-point format with an explicit significand
width ``b`` (2..256 bits) and round-to-nearest-ties-to-even.  The backend is
MPFR (via gmpy2), so each primitive is correctly rounded: the result equals
the exact result times ``(1 + theta)`` with ``|theta| <= 2**-b``.  Precision
is never emulated by truncating native doubles, which would double-round.

Complex values are plain pairs of reals.  Complex addition is two real
additions; complex multiplication is four real multiplications and two real
additions, each rounded individually, so its relative error can reach about
twice the real unit roundoff.

The exponent range is MPFR's default (30-bit exponents), wide enough that no
workload in this package can underflow or overflow; range violations raise
:class:`RangeError` instead of producing infinities or NaNs.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import NamedTuple, Union

import gmpy2
from gmpy2 import mpfr

MIN_BITS = 2
MAX_BITS = 256

#: Precision of the ground-truth mode and of parsed circuit angles.
REFERENCE_BITS = 128

RealLike = Union[int, float, str, Fraction, mpfr]

_TRAPS = dict(
    trap_overflow=True,
    trap_underflow=True,
    trap_invalid=True,
    trap_divzero=True,
)

_GMPY_RANGE_ERRORS = (
    gmpy2.OverflowResultError,
    gmpy2.UnderflowResultError,
    gmpy2.InvalidOperationError,
    gmpy2.DivisionByZeroError,
    gmpy2.RangeError,
)


class PrecisionError(ValueError):
    """Invalid significand width, or operands from a different precision."""


class RangeError(ArithmeticError):
    """Exponent range exceeded, or a non-finite value was produced."""


class Complex(NamedTuple):
    """A complex number as a pair of same-precision real values."""

    re: mpfr
    im: mpfr

    def __str__(self) -> str:
        return f"{self.re}{'+' if self.im >= 0 else ''}{self.im}i"


class Precision:
    """A b-bit binary floating-point format, round-to-nearest-ties-to-even.

    Instances are immutable and safe to share between threads; all values
    they produce are immutable ``mpfr`` objects carrying their precision in
    the ``precision`` attribute.
    """

    __slots__ = ("bits", "_ctx")

    def __init__(self, bits: int):
        if not isinstance(bits, int) or isinstance(bits, bool):
            raise PrecisionError(f"significand width must be an int, got {bits!r}")
        if not MIN_BITS <= bits <= MAX_BITS:
            raise PrecisionError(
                f"significand width must be in [{MIN_BITS}, {MAX_BITS}], got {bits}"
            )
        self.bits = bits
        self._ctx = gmpy2.context(
            precision=bits, round=gmpy2.RoundToNearest, **_TRAPS
        )

    @property
    def eps(self) -> float:
        """Unit roundoff 2**-b: max relative error of one rounded primitive."""
        return 2.0 ** -self.bits

    def __repr__(self) -> str:
        return f"Precision({self.bits})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Precision) and other.bits == self.bits

    def __hash__(self) -> int:
        return hash((Precision, self.bits))

    # -- construction -----------------------------------------------------

    def value(self, x: RealLike) -> mpfr:
        """Round an exact or higher-precision real to the nearest b-bit value.

        Accepts ints, floats (exact binary values), decimal literals as
        strings, Fractions, and mpfr values of any precision.  Ties round to
        the even significand.
        """
        if isinstance(x, Fraction):
            x = gmpy2.mpq(x.numerator, x.denominator)
        try:
            r = gmpy2.mpfr(x, precision=self.bits, context=self._ctx)
        except _GMPY_RANGE_ERRORS as exc:
            raise RangeError(str(exc)) from exc
        except ValueError as exc:
            raise ValueError(f"cannot parse real value {x!r}") from exc
        if not gmpy2.is_finite(r):
            raise RangeError(f"non-finite value {x!r}")
        return r

    def complex(self, re: RealLike = 0, im: RealLike = 0) -> Complex:
        return Complex(self.value(re), self.value(im))

    def zero(self) -> Complex:
        return Complex(self.value(0), self.value(0))

    def one(self) -> Complex:
        return Complex(self.value(1), self.value(0))

    # -- real primitives ---------------------------------------------------

    def _check(self, x: mpfr) -> None:
        if x.precision != self.bits:
            raise PrecisionError(
                f"operand has {x.precision} significand bits, expected {self.bits}"
            )

    def add(self, x: mpfr, y: mpfr) -> mpfr:
        self._check(x)
        self._check(y)
        try:
            return self._ctx.add(x, y)
        except _GMPY_RANGE_ERRORS as exc:
            raise RangeError(str(exc)) from exc

    def sub(self, x: mpfr, y: mpfr) -> mpfr:
        self._check(x)
        self._check(y)
        try:
            return self._ctx.sub(x, y)
        except _GMPY_RANGE_ERRORS as exc:
            raise RangeError(str(exc)) from exc

    def mul(self, x: mpfr, y: mpfr) -> mpfr:
        self._check(x)
        self._check(y)
        try:
            return self._ctx.mul(x, y)
        except _GMPY_RANGE_ERRORS as exc:
            raise RangeError(str(exc)) from exc

    def div(self, x: mpfr, y: mpfr) -> mpfr:
        self._check(x)
        self._check(y)
        try:
            return self._ctx.div(x, y)
        except _GMPY_RANGE_ERRORS as exc:
            raise RangeError(str(exc)) from exc

    def neg(self, x: mpfr) -> mpfr:
        self._check(x)
        return self._ctx.minus(x)

    # -- complex primitives -------------------------------------------------

    def cadd(self, a: Complex, b: Complex) -> Complex:
        ctx = self._ctx
        bits = self.bits
        if a.re.precision != bits or b.re.precision != bits:
            self._check(a.re)
            self._check(b.re)
        try:
            return Complex(ctx.add(a.re, b.re), ctx.add(a.im, b.im))
        except _GMPY_RANGE_ERRORS as exc:
            raise RangeError(str(exc)) from exc

    def csub(self, a: Complex, b: Complex) -> Complex:
        ctx = self._ctx
        bits = self.bits
        if a.re.precision != bits or b.re.precision != bits:
            self._check(a.re)
            self._check(b.re)
        try:
            return Complex(ctx.sub(a.re, b.re), ctx.sub(a.im, b.im))
        except _GMPY_RANGE_ERRORS as exc:
            raise RangeError(str(exc)) from exc

    def cmul(self, a: Complex, b: Complex) -> Complex:
        ctx = self._ctx
        bits = self.bits
        if a.re.precision != bits or b.re.precision != bits:
            self._check(a.re)
            self._check(b.re)
        try:
            if not a.im and not b.im:
                # Both operands real: the four-multiply formula degenerates
                # to one rounded multiply with a value-identical result.
                return Complex(ctx.mul(a.re, b.re), ctx.mul(a.im, b.im))
            return Complex(
                ctx.sub(ctx.mul(a.re, b.re), ctx.mul(a.im, b.im)),
                ctx.add(ctx.mul(a.re, b.im), ctx.mul(a.im, b.re)),
            )
        except _GMPY_RANGE_ERRORS as exc:
            raise RangeError(str(exc)) from exc

    def cneg(self, a: Complex) -> Complex:
        ctx = self._ctx
        return Complex(ctx.minus(a.re), ctx.minus(a.im))

    # -- constants -----------------------------------------------------------

    def constant(self, name: str, theta: mpfr | None = None) -> Complex:
        """Evaluate a named constant at this precision.

        ``sqrt_half`` is correctly rounded.  For ``cos``, ``sin`` and
        ``exp_i`` the angle (normally a 128-bit value) is first rounded to
        this precision and the function is then evaluated correctly rounded
        on the rounded angle, mirroring how a fixed-precision backend would
        compute a gate entry.  Achieved absolute guarantee vs the constant at
        the unrounded angle: 0.5 ulp from the final rounding plus at most
        ``|theta| * 2**-b`` from the argument rounding (< 2 ulp for the
        angles used in this package).  Because of the argument rounding,
        ``cos(pi/4)`` and ``sqrt_half`` may legitimately differ in the last
        place.
        """
        ctx = self._ctx
        zero = self.value(0)
        try:
            if name == "sqrt_half":
                return Complex(ctx.sqrt(self.value("0.5")), zero)
            if theta is None:
                raise ValueError(f"constant {name!r} needs an angle")
            theta_b = gmpy2.mpfr(theta, precision=self.bits, context=ctx)
            if name == "cos":
                return Complex(ctx.cos(theta_b), zero)
            if name == "sin":
                return Complex(ctx.sin(theta_b), zero)
            if name == "exp_i":
                return Complex(ctx.cos(theta_b), ctx.sin(theta_b))
        except _GMPY_RANGE_ERRORS as exc:
            raise RangeError(str(exc)) from exc
        raise ValueError(f"unknown constant {name!r}")


def round_to(bits: int, x: RealLike) -> mpfr:
    """Nearest value with a ``bits``-bit significand, ties to even."""
    return Precision(bits).value(x)


# -- angles ------------------------------------------------------------------

_ANGLE_CTX = gmpy2.context(precision=REFERENCE_BITS, round=gmpy2.RoundToNearest, **_TRAPS)

_PI_FRACTION_RE = re.compile(r"^(-?)pi/(?:2\^(\d+)|(\d+))$")
_DECIMAL_RE = re.compile(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?$")


def parse_angle(token: str) -> mpfr:
    """Evaluate an angle token at 128 bits.

    Tokens are decimal literals or rational multiples of pi of the forms
    ``[-]pi/<int>`` and ``[-]pi/2^<int>``.
    """
    token = token.strip()
    m = _PI_FRACTION_RE.match(token)
    if m:
        sign, pow2, denom = m.groups()
        pi = _ANGLE_CTX.const_pi()
        if pow2 is not None:
            d = 1 << int(pow2)
        else:
            d = int(denom)
            if d == 0:
                raise ValueError(f"zero denominator in angle {token!r}")
        value = _ANGLE_CTX.div(pi, gmpy2.mpfr(d, precision=REFERENCE_BITS))
        # Negate inside the 128-bit context: a bare unary minus would round
        # to the caller's current (default 53-bit) context.
        return _ANGLE_CTX.minus(value) if sign else value
    if _DECIMAL_RE.match(token):
        return gmpy2.mpfr(token, precision=REFERENCE_BITS, context=_ANGLE_CTX)
    raise ValueError(f"invalid angle {token!r}")


def format_angle(x: mpfr, digits: int = 40) -> str:
    """Decimal literal with enough digits to round-trip a 128-bit value."""
    return format(x, f".{digits}g")


def modulus(a: Complex, bits: int = 2 * REFERENCE_BITS) -> mpfr:
    """|a| evaluated at high precision (for measurements, not for the model)."""
    ctx = gmpy2.context(precision=bits, round=gmpy2.RoundToNearest, **_TRAPS)
    return ctx.sqrt(ctx.add(ctx.mul(a.re, a.re), ctx.mul(a.im, a.im)))


def distance(a: Complex, b: Complex, bits: int = 2 * REFERENCE_BITS) -> mpfr:
    """|a - b| evaluated at high precision."""
    ctx = gmpy2.context(precision=bits, round=gmpy2.RoundToNearest, **_TRAPS)
    dr = ctx.sub(a.re, b.re)
    di = ctx.sub(a.im, b.im)
    return ctx.sqrt(ctx.add(ctx.mul(dr, dr), ctx.mul(di, di)))


def exact_fraction(x: mpfr) -> Fraction:
    """The exact rational value of a finite float (dyadic rational)."""
    num, den = x.as_integer_ratio()
    return Fraction(int(num), int(den))
