"""Exact elementary number theory: factorization, primality, orders, roots.

All inputs are Python ints (arbitrary precision).  Nothing here keeps mutable
state apart from memo caches on pure functions.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from functools import lru_cache

from . import xreal

DETERMINISTIC_LIMIT = 1 << 64
# Complete witness set for n < 3.3e24 (Sorenson & Webster), so certainly for n < 2^64.
_MR_BASES_64 = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)

DEFAULT_TRIAL_BOUND = 1 << 16
DEFAULT_RHO_ITERATIONS = 20_000
DEFAULT_MR_ROUNDS = 24


class FactorizationBudgetError(ArithmeticError):
    """Raised when a number cannot be split within the configured budget."""


def _small_primes(limit: int) -> list[int]:
    sieve = bytearray([1]) * (limit + 1)
    sieve[0:2] = b"\x00\x00"
    for i in range(2, math.isqrt(limit) + 1):
        if sieve[i]:
            sieve[i * i :: i] = bytearray(len(range(i * i, limit + 1, i)))
    return [i for i, flag in enumerate(sieve) if flag]


_SMALL_PRIMES = _small_primes(DEFAULT_TRIAL_BOUND)
_QUICK_PRIMES = _SMALL_PRIMES[:60]


# ---------------------------------------------------------------------------
# primality


def _mr_round(n: int, d: int, r: int, a: int) -> bool:
    x = pow(a, d, n)
    if x == 1 or x == n - 1:
        return True
    for _ in range(r - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def _miller_rabin(n: int, bases) -> bool:
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    return all(_mr_round(n, d, r, a % n) for a in bases if a % n)


def _jacobi(a: int, n: int) -> int:
    a %= n
    result = 1
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


def _strong_lucas(n: int) -> bool:
    """Strong Lucas probable-prime test with Selfridge parameters."""
    if math.isqrt(n) ** 2 == n:
        return False
    D = 5
    while True:
        j = _jacobi(D, n)
        if j == -1:
            break
        if j == 0 and abs(D) != n:
            return False
        D = -D - 2 if D > 0 else -D + 2
    P, Q = 1, (1 - D) // 4

    d, s = n + 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1

    inv2 = (n + 1) // 2
    U, V, Qk = 1, P, Q % n
    for bit in bin(d)[3:]:
        U, V = U * V % n, (V * V - 2 * Qk) % n
        Qk = Qk * Qk % n
        if bit == "1":
            U, V = (P * U + V) * inv2 % n, (D * U + P * V) * inv2 % n
            Qk = Qk * Q % n
    if U == 0 or V == 0:
        return True
    for _ in range(s - 1):
        V = (V * V - 2 * Qk) % n
        Qk = Qk * Qk % n
        if V == 0:
            return True
    return False


def is_prime(n: int, rounds: int = DEFAULT_MR_ROUNDS) -> bool:
    """Primality test.

    Deterministic below 2^64.  Above that: Miller-Rabin on ``rounds`` fixed
    pseudo-random bases plus a strong Lucas test (a BPSW superset); see
    :func:`primality_label` for the honest label of such results.
    """
    if n < 2:
        return False
    for p in _QUICK_PRIMES:
        if n % p == 0:
            return n == p
    if n < _QUICK_PRIMES[-1] ** 2:
        return True
    if n < DETERMINISTIC_LIMIT:
        return _miller_rabin(n, _MR_BASES_64)
    rng = random.Random(n)
    bases = [2] + [rng.randrange(3, n - 1) for _ in range(max(rounds - 1, 0))]
    return _miller_rabin(n, bases) and _strong_lucas(n)


def primality_label(n: int) -> str:
    if not is_prime(n):
        return "composite"
    return "prime" if n < DETERMINISTIC_LIMIT else "probable prime"


# ---------------------------------------------------------------------------
# factorization


@dataclass(frozen=True)
class Factorization:
    value: int
    factors: tuple[tuple[int, int], ...]

    def __post_init__(self):
        prod = 1
        last = 1
        for p, e in self.factors:
            if p <= last or e < 1:
                raise ValueError(f"malformed factorization of {self.value}: {self.factors}")
            last = p
            prod *= p**e
        if prod != self.value:
            raise ValueError(f"factors {self.factors} do not multiply to {self.value}")

    @property
    def omega(self) -> int:
        return len(self.factors)

    @property
    def divisor_count(self) -> int:
        return math.prod(e + 1 for _, e in self.factors)

    @property
    def primes(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.factors)

    @property
    def probable(self) -> bool:
        """True if some prime factor is only a probable prime."""
        return any(p >= DETERMINISTIC_LIMIT for p, _ in self.factors)

    def prime_powers(self) -> list[tuple[int, int]]:
        """The q^a || n pairs, i.e. ``factors`` as a list."""
        return list(self.factors)


def _brent_rho(n: int, max_iterations: int, seed: int) -> int | None:
    rng = random.Random(seed)
    for _attempt in range(4):
        y, c, m = rng.randrange(1, n), rng.randrange(1, n), 128
        g = r = q = 1
        x = ys = y
        spent = 0
        while g == 1:
            x = y
            for _ in range(r):
                y = (y * y + c) % n
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(m, r - k)):
                    y = (y * y + c) % n
                    q = q * abs(x - y) % n
                g = math.gcd(q, n)
                k += m
            spent += r
            r *= 2
            if spent > max_iterations:
                break
        if g == n:
            while True:
                ys = (ys * ys + c) % n
                g = math.gcd(abs(x - ys), n)
                if g > 1:
                    break
        if 1 < g < n:
            return g
    return None


def _ecm_split(n: int, seed: int) -> int | None:
    from sympy.ntheory import ecm

    try:
        found = ecm(n, seed=seed)
    except ValueError:
        return None
    for f in sorted(int(f) for f in found):
        if 1 < f < n:
            return f
    return None


def _split(n: int, rho_iterations: int, use_ecm: bool) -> int:
    r = math.isqrt(n)
    if r * r == n:
        return r
    f = _brent_rho(n, rho_iterations, seed=n & 0xFFFFFFFF)
    if f is None and use_ecm:
        f = _ecm_split(n, seed=1234)
    if f is None:
        raise FactorizationBudgetError(f"could not split {n} within budget")
    return f


@lru_cache(maxsize=4096)
def _factor_cached(n: int, trial_bound: int, rho_iterations: int, use_ecm: bool) -> tuple[tuple[int, int], ...]:
    out: dict[int, int] = {}
    m = n
    for p in _SMALL_PRIMES:
        if p > trial_bound or p * p > m:
            break
        while m % p == 0:
            out[p] = out.get(p, 0) + 1
            m //= p
    stack = [m] if m > 1 else []
    while stack:
        c = stack.pop()
        if c == 1:
            continue
        if is_prime(c):
            out[c] = out.get(c, 0) + 1
            continue
        f = _split(c, rho_iterations, use_ecm)
        stack.extend((f, c // f))
    return tuple(sorted(out.items()))


def factorize(
    n: int,
    trial_bound: int = DEFAULT_TRIAL_BOUND,
    rho_iterations: int = DEFAULT_RHO_ITERATIONS,
    use_ecm: bool = True,
) -> Factorization:
    """Trial division, then Brent's rho, then ECM for stubborn cofactors.

    Raises FactorizationBudgetError if a composite cofactor survives all
    three stages.
    """
    if n < 1:
        raise ValueError(f"factorize needs n >= 1, got {n}")
    return Factorization(n, _factor_cached(n, min(trial_bound, DEFAULT_TRIAL_BOUND), rho_iterations, use_ecm))


# ---------------------------------------------------------------------------
# arithmetic functions


def mobius(n: int) -> int:
    if n < 1:
        raise ValueError(f"mobius needs n >= 1, got {n}")
    fac = factorize(n)
    if any(e > 1 for _, e in fac.factors):
        return 0
    return -1 if fac.omega % 2 else 1


def divisors_of(fac: Factorization) -> list[int]:
    divs = [1]
    for p, e in fac.factors:
        divs = [d * p**k for d in divs for k in range(e + 1)]
    return sorted(divs)


def divisors(n: int) -> list[int]:
    return divisors_of(factorize(n))


def divisor_count(n: int) -> int:
    return factorize(n).divisor_count


def prime_power_base(m: int) -> int | None:
    """p if m = p^k with k >= 1, else None."""
    if m < 2:
        return None
    fac = factorize(m)
    return fac.factors[0][0] if fac.omega == 1 else None


def von_mangoldt(m: int, bits: int = xreal.DEFAULT_BITS):
    if m < 1:
        raise ValueError(f"von_mangoldt needs m >= 1, got {m}")
    ctx = xreal.context(bits)
    p = prime_power_base(m)
    return ctx.log(p) if p else ctx.zero


# ---------------------------------------------------------------------------
# orders and primitive roots


def _check_prime_modulus(p: int) -> None:
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")


def multiplicative_order(g: int, p: int) -> int:
    """Least e >= 1 with g^e = 1 (mod p), by stripping prime factors of p-1."""
    _check_prime_modulus(p)
    if not 1 <= g < p:
        raise ValueError(f"need 1 <= g < p, got g={g}, p={p}")
    e = p - 1
    for q, k in factorize(p - 1).factors:
        for _ in range(k):
            if pow(g, e // q, p) != 1:
                break
            e //= q
    return e


def _is_generator(g: int, p: int, cofactors: list[int]) -> bool:
    return all(pow(g, c, p) != 1 for c in cofactors)


def primitive_root(p: int) -> int:
    """Smallest primitive root mod p (1 for p = 2)."""
    _check_prime_modulus(p)
    if p == 2:
        return 1
    cofactors = [(p - 1) // q for q in factorize(p - 1).primes]
    return next(g for g in range(2, p) if _is_generator(g, p, cofactors))


def is_primitive_root(g: int, p: int) -> bool:
    if p == 2:
        return g == 1
    if not 1 <= g < p:
        return False
    return _is_generator(g, p, [(p - 1) // q for q in factorize(p - 1).primes])


def primes_up_to(limit: int) -> list[int]:
    if limit <= DEFAULT_TRIAL_BOUND:
        return [p for p in _SMALL_PRIMES if p <= limit]
    return _small_primes(limit)
