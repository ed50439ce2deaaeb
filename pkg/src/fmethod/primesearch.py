"""Primes in arithmetic progressions inside intervals, and psi differences.

Searches step through the residue class from the lower end of the interval
and test each candidate with :func:`fmethod.arith.is_prime`; no sieve is
built, since the intervals of interest sit far beyond sieving range.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import arith, xreal

DEFAULT_CAP = 10**6
PSI_BUDGET = 10**9
_SEGMENT = 1 << 20


class Policy(str, enum.Enum):
    STRICT = "strict"
    EXTEND = "extend"


class InvalidQueryError(ValueError):
    pass


class SearchCapError(RuntimeError):
    pass


class BudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class APIntervalQuery:
    """Half-open search band [lo, hi) for primes congruent to a mod n."""

    a: int
    n: int
    lo: int
    hi: int
    policy: Policy = Policy.STRICT

    def __post_init__(self):
        if self.n < 1 or not 0 <= self.a < self.n:
            raise InvalidQueryError(f"need 0 <= a < n, got a={self.a}, n={self.n}")
        if math.gcd(self.a, self.n) != 1:
            raise InvalidQueryError(f"gcd({self.a}, {self.n}) = {math.gcd(self.a, self.n)} != 1")
        if not self.lo < self.hi:
            raise InvalidQueryError(f"empty band [{self.lo}, {self.hi})")
        object.__setattr__(self, "policy", Policy(self.policy))


@dataclass(frozen=True)
class APIntervalResult:
    found: int | None
    in_band: bool
    scanned: int


def _first_candidate(a: int, n: int, lo: int) -> int:
    return lo + (a - lo) % n


def find_prime_in_ap_interval(q: APIntervalQuery, cap: int = DEFAULT_CAP) -> APIntervalResult:
    """Smallest prime p >= lo with p = a (mod n).

    Strict stops at hi; ExtendUp keeps going for at most ``cap`` candidates
    and records whether the band was met.
    """
    c = _first_candidate(q.a, q.n, q.lo)
    scanned = 0
    while True:
        if c >= q.hi and q.policy is Policy.STRICT:
            return APIntervalResult(None, False, scanned)
        if scanned >= cap and q.policy is Policy.EXTEND:
            raise SearchCapError(f"no prime = {q.a} mod {q.n} among {cap} candidates from {q.lo}")
        scanned += 1
        if arith.is_prime(c):
            return APIntervalResult(c, c < q.hi, scanned)
        c += q.n


def least_prime_in_ap(a: int, n: int, start: int = 2, cap: int = DEFAULT_CAP) -> int:
    if n < 1 or math.gcd(a, n) != 1:
        raise InvalidQueryError(f"gcd({a}, {n}) != 1")
    a %= n
    q = APIntervalQuery(a, n, start, start + 1, Policy.EXTEND)
    return find_prime_in_ap_interval(q, cap).found


# ---------------------------------------------------------------------------
# psi(x + h; a, n) - psi(x; a, n)


def _sieve_segment(lo: int, hi: int) -> np.ndarray:
    """Boolean primality flags for lo..hi-1 (lo >= 0)."""
    flags = np.ones(hi - lo, dtype=bool)
    for v in range(lo, min(hi, 2)):
        flags[v - lo] = False
    for p in arith.primes_up_to(math.isqrt(hi - 1) if hi > 1 else 0):
        start = max(p * p, -(-lo // p) * p)
        flags[start - lo :: p] = False
    return flags


def _to_fraction(v) -> Fraction:
    if isinstance(v, (int, float, Fraction)):
        return Fraction(v)
    ctx = xreal.context(xreal.DEFAULT_BITS)
    man, exp = ctx.mpf(v).man_exp
    return Fraction(man) * Fraction(2) ** exp


def psi_diff_exact(x, h, a: int, n: int, budget: int = PSI_BUDGET) -> Counter:
    """psi(x+h; a, n) - psi(x; a, n) as an exact multiset of primes.

    The result maps each prime p to the number of prime powers p^k in
    (x, x+h] with p^k = a (mod n); the real value is sum(k * log p).
    ``x`` and ``h`` may be ints, Fractions or mpf values.
    """
    x, h = _to_fraction(x), _to_fraction(h)
    if x < 0 or h < 0:
        raise ValueError("psi_diff needs x >= 0 and h >= 0")
    if n < 1 or math.gcd(a, n) != 1:
        raise InvalidQueryError(f"gcd({a}, {n}) != 1")
    lo = math.floor(x) + 1
    hi = math.floor(x + h)  # inclusive
    if hi > budget:
        raise BudgetError(f"x+h = {float(x + h):.3g} exceeds the summation budget {budget}")
    out: Counter = Counter()
    if hi < lo:
        return out
    a %= n
    # primes
    for seg_lo in range(lo, hi + 1, _SEGMENT):
        seg_hi = min(seg_lo + _SEGMENT, hi + 1)
        flags = _sieve_segment(seg_lo, seg_hi)
        first = _first_candidate(a, n, seg_lo) - seg_lo
        for off in np.flatnonzero(flags[first::n]):
            out[seg_lo + first + int(off) * n] += 1
    # higher prime powers
    for p in arith.primes_up_to(math.isqrt(hi)):
        pk = p * p
        while pk <= hi:
            if pk >= lo and pk % n == a:
                out[p] += 1
            pk *= p
    return out


def psi_value(primes: Counter, bits: int = xreal.DEFAULT_BITS):
    ctx = xreal.context(bits)
    return ctx.fsum(k * ctx.log(p) for p, k in sorted(primes.items()))


def psi_diff(x, h, a: int, n: int, bits: int = xreal.DEFAULT_BITS, budget: int = PSI_BUDGET):
    """Sum of the von Mangoldt function over m = a (mod n) in (x, x+h]."""
    return psi_value(psi_diff_exact(x, h, a, n, budget), bits)


# ---------------------------------------------------------------------------
# Linnik-style scan


@dataclass(frozen=True)
class WidthMode:
    """``bertrand``: band [x, (1+eps)x); ``short``: band [x, x + x/n^(1+eps))."""

    kind: str
    eps: str

    def __post_init__(self):
        if self.kind not in ("bertrand", "short"):
            raise ValueError(f"width mode must be bertrand or short, got {self.kind!r}")
        if xreal.context(64).mpf(self.eps) < 0:
            raise ValueError("eps must be >= 0")

    @classmethod
    def bertrand(cls, eps) -> WidthMode:
        return cls("bertrand", str(eps))

    @classmethod
    def short(cls, eps) -> WidthMode:
        return cls("short", str(eps))

    def band_hi(self, x: int, n: int, bits: int) -> int:
        if self.kind == "bertrand":
            fn = lambda c: (1 + c.mpf(self.eps)) * x  # noqa: E731
        else:
            fn = lambda c: x + x / c.power(n, 1 + c.mpf(self.eps))  # noqa: E731
        # p < y  <=>  p < ceil(y) for integers p
        return xreal.certified_ceil(fn, bits)


SCAN_HEADER = ["n", "a", "x", "band_lo", "band_hi", "found", "in_band", "overshoot", "least_prime", "empirical_exponent"]


@dataclass(frozen=True)
class ScanRow:
    n: int
    a: int
    x: int
    band_lo: int
    band_hi: int
    found: int | None
    in_band: bool
    overshoot: str
    least_prime: int | None
    empirical_exponent: str
    error: str = ""

    def as_csv(self) -> list[str]:
        return [
            str(self.n), str(self.a), str(self.x), str(self.band_lo), str(self.band_hi),
            "" if self.found is None else str(self.found), "true" if self.in_band else "false",
            self.overshoot, "" if self.least_prime is None else str(self.least_prime), self.empirical_exponent,
        ]


def _scan_row(args) -> ScanRow:
    n, a, x, kappa, mode, cap, bits = args
    ctx = xreal.context(bits)
    hi = mode.band_hi(x, n, bits)
    error = ""
    try:
        res = find_prime_in_ap_interval(APIntervalQuery(a, n, x, hi, Policy.EXTEND), cap)
        found, in_band = res.found, res.in_band
        overshoot = xreal.fmt(ctx.mpf(found - x) / (hi - x))
    except SearchCapError as exc:
        found, in_band, overshoot, error = None, False, "", str(exc)
    try:
        least = least_prime_in_ap(a, n, 2, cap)
        exponent = xreal.fmt(ctx.log(least) / ctx.log(n))
    except SearchCapError as exc:
        least, exponent, error = None, "", error or str(exc)
    return ScanRow(n, a, x, x, hi, found, in_band, overshoot, least, exponent, error)


def linnik_scan(
    n_max: int,
    kappa,
    width_mode: WidthMode,
    residues: str = "all",
    cap: int = DEFAULT_CAP,
    bits: int = xreal.DEFAULT_BITS,
    workers: int = 1,
) -> list[ScanRow]:
    """Least primes = a (mod n) above x = ceil(n^kappa) + 1, for 2 <= n <= n_max.

    ``residues`` is ``"all"`` (every a coprime to n) or ``"sample"`` (the
    smallest and largest such a only).  Rows come back sorted by (n, a)
    whatever ``workers`` is.
    """
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    kap = str(kappa)
    if xreal.context(64).mpf(kap) <= 0:
        raise ValueError("kappa must be > 0")
    jobs = []
    for n in range(2, n_max + 1):
        x = xreal.certified_ceil(lambda c, n=n: c.power(n, c.mpf(kap)), bits) + 1
        coprime = [a for a in range(1, n) if math.gcd(a, n) == 1]
        if residues == "sample":
            coprime = sorted({coprime[0], coprime[-1]})
        jobs.extend((n, a, x, kap, width_mode, cap, bits) for a in coprime)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_scan_row, jobs, chunksize=16))
    else:
        rows = [_scan_row(j) for j in jobs]
    return sorted(rows, key=lambda r: (r.n, r.a))


def scan_to_csv(rows: list[ScanRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCAN_HEADER)
    for row in rows:
        w.writerow(row.as_csv())
    return buf.getvalue()


def scan_from_csv(text: str) -> list[ScanRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != SCAN_HEADER:
        raise ValueError(f"unexpected scan header {header}")
    rows = []
    for rec in reader:
        n, a, x, blo, bhi, found, in_band, over, least, expo = rec
        rows.append(ScanRow(
            int(n), int(a), int(x), int(blo), int(bhi), int(found) if found else None,
            in_band == "true", over, int(least) if least else None, expo,
        ))
    return rows
