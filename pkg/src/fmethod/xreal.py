"""Extended-precision reals on top of mpmath.

Every precision gets its own private mpmath context, so nothing here touches
the global ``mpmath.mp`` state and callers at different precisions can run
side by side.  Certified rounding goes through interval contexts: an
expression is written once as ``fn(ctx)`` and evaluated either pointwise
(``context``) or as an enclosure (``interval_context``).
"""

from __future__ import annotations

import os
from functools import lru_cache
from typing import Callable

import mpmath
from mpmath.ctx_iv import MPIntervalContext
from mpmath.libmp import from_int, mpf_cmp, to_int

DEFAULT_BITS = 128
MIN_BITS = 100
MAX_CERTIFY_BITS = 8192
PRECISION_ENV = "FMETHOD_PRECISION_BITS"

ROUNDING = "nearest"  # mpmath pointwise rounding mode; intervals round outward


def default_bits() -> int:
    raw = os.environ.get(PRECISION_ENV)
    if raw is None:
        return DEFAULT_BITS
    return check_bits(int(raw))


def check_bits(bits: int) -> int:
    if bits < MIN_BITS:
        raise ValueError(f"precision_bits must be >= {MIN_BITS}, got {bits}")
    return bits


@lru_cache(maxsize=None)
def context(bits: int = DEFAULT_BITS) -> mpmath.ctx_mp.MPContext:
    ctx = mpmath.MPContext()
    ctx.prec = bits
    return ctx


@lru_cache(maxsize=None)
def interval_context(bits: int = DEFAULT_BITS) -> MPIntervalContext:
    ctx = MPIntervalContext()
    ctx.prec = bits
    return ctx


def fmt(x, digits: int = 15) -> str:
    """Render with ``digits`` significant digits (CSV convention)."""
    return mpmath.nstr(x, digits, strip_zeros=False, min_fixed=-6, max_fixed=digits)


class Enclosure:
    """A closed interval [lo, hi] holding raw mpf tuples."""

    __slots__ = ("lo", "hi", "bits")

    def __init__(self, lo, hi, bits: int):
        self.lo, self.hi, self.bits = lo, hi, bits

    def floor(self) -> tuple[int, int]:
        return int(to_int(self.lo, "f")), int(to_int(self.hi, "f"))

    def ceil(self) -> tuple[int, int]:
        return int(to_int(self.lo, "c")), int(to_int(self.hi, "c"))

    def compare_int(self, k: int) -> int | None:
        """Sign of (value - k) when certain, else None."""
        kk = from_int(k)
        if mpf_cmp(self.lo, kk) > 0:
            return 1
        if mpf_cmp(self.hi, kk) < 0:
            return -1
        if mpf_cmp(self.lo, kk) == 0 and mpf_cmp(self.hi, kk) == 0:
            return 0
        return None

    def mid(self, bits: int | None = None):
        ctx = context(bits or self.bits)
        return (ctx.make_mpf(self.lo) + ctx.make_mpf(self.hi)) / 2


def enclose(fn: Callable, bits: int = DEFAULT_BITS) -> Enclosure:
    iv = interval_context(bits)
    lo, hi = iv.convert(fn(iv))._mpi_
    return Enclosure(lo, hi, bits)


def certified_floor(fn: Callable, bits: int = DEFAULT_BITS, max_bits: int = MAX_CERTIFY_BITS) -> int:
    """floor(fn) decided by interval refinement.

    If the enclosure still straddles an integer at ``max_bits`` the value is
    taken to equal that integer (this happens for exact integers such as
    exp(21 log 2)), and the upper floor is returned.
    """
    while True:
        a, b = enclose(fn, bits).floor()
        if a == b or bits >= max_bits:
            return b
        bits *= 2


def certified_ceil(fn: Callable, bits: int = DEFAULT_BITS, max_bits: int = MAX_CERTIFY_BITS) -> int:
    while True:
        a, b = enclose(fn, bits).ceil()
        if a == b or bits >= max_bits:
            return a
        bits *= 2


def outward_floor(fn: Callable, bits: int = DEFAULT_BITS) -> int:
    """An integer certainly <= fn (no refinement)."""
    return enclose(fn, bits).floor()[0]


def outward_ceil(fn: Callable, bits: int = DEFAULT_BITS) -> int:
    """An integer certainly >= fn (no refinement)."""
    return enclose(fn, bits).ceil()[1]


def compare_int(k: int, fn: Callable, bits: int = DEFAULT_BITS, max_bits: int = MAX_CERTIFY_BITS) -> int:
    """Sign of (k - fn).  Returns 0 when undecidable at ``max_bits``."""
    while True:
        sign = enclose(fn, bits).compare_int(k)
        if sign is not None:
            return -sign
        if bits >= max_bits:
            return 0
        bits *= 2


def lt(fn_a: Callable, fn_b: Callable, bits: int = DEFAULT_BITS, max_bits: int = MAX_CERTIFY_BITS) -> bool | None:
    """Certified ``a < b``; None if still undecided at ``max_bits``."""
    while True:
        e = enclose(lambda c: fn_a(c) - fn_b(c), bits)
        if mpf_cmp(e.hi, from_int(0)) < 0:
            return True
        if mpf_cmp(e.lo, from_int(0)) >= 0:
            return False
        if bits >= max_bits:
            return None
        bits *= 2
