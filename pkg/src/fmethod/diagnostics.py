"""Finite certificates for the obstructions to F-method growth rates.

Each certificate carries its witness data and is re-verified from that data
alone (:func:`reverify`), with integer arithmetic where the inequality
allows it and outward-rounded interval arithmetic otherwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from . import arith, xreal

KINDS = ("DivisorBlowup", "PolynomialGap", "Thm13Chain")
EXHAUSTIVE_LIMIT = 10**6


class PreconditionError(ValueError):
    pass


class NotFoundError(LookupError):
    pass


@dataclass
class ObstructionCertificate:
    kind: str
    witness: dict
    verified: bool
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {"kind": self.kind, "verified": self.verified, "witness": self.witness, "notes": self.notes},
            indent=1, sort_keys=True,
        ) + "\n"

    @classmethod
    def from_json(cls, text: str) -> ObstructionCertificate:
        doc = json.loads(text)
        if doc.get("kind") not in KINDS:
            raise ValueError(f"unknown certificate kind {doc.get('kind')!r}")
        return cls(doc["kind"], doc["witness"], bool(doc["verified"]), list(doc.get("notes", [])))


def _enclosure_strings(fn, bits: int) -> tuple[str, str]:
    e = xreal.enclose(fn, bits)
    ctx = xreal.context(bits)
    return xreal.fmt(ctx.make_mpf(e.lo), 40), xreal.fmt(ctx.make_mpf(e.hi), 40)


# ---------------------------------------------------------------------------
# divisor-count blowup


def _blowup_threshold(n: int):
    return lambda c: c.exp(c.log(n) / (2 * c.log(c.log(n))))


def _highly_composite_candidates(bound: int) -> list[int]:
    """Products of the smallest primes with non-increasing exponents."""
    primes = arith.primes_up_to(100)
    out = []

    def walk(value, idx, max_exp):
        out.append(value)
        if idx == len(primes):
            return
        p = primes[idx]
        v = value
        for e in range(1, max_exp + 1):
            v *= p
            if v > bound:
                break
            walk(v, idx + 1, e)

    walk(1, 0, bound.bit_length())
    return sorted(out)


def _check_blowup(n: int, bits: int) -> tuple[bool, dict]:
    fac = arith.factorize(n)
    d = fac.divisor_count
    # threshold must sit certainly below d(n)
    exceeds = xreal.compare_int(d, _blowup_threshold(n), bits) > 0
    # prod_{d | n} d = n^(d(n)/2), checked squared to stay in integers
    prod = math.prod(arith.divisors_of(fac))
    identity = prod * prod == n**d
    return exceeds and identity, {"d": d, "threshold_exceeded": exceeds, "divisor_product_identity": identity}


def divisor_blowup_witness(search_bound: int, bits: int = xreal.DEFAULT_BITS) -> ObstructionCertificate:
    """An n <= search_bound with d(n) > exp(log n / (2 log log n)).

    Among highly composite style candidates the one with the most divisors
    wins (smallest n on ties); an exhaustive scan below 10^6 is the fallback.
    """
    if search_bound < 16:
        raise PreconditionError("search_bound must be >= 16 (log log n > 0 needs n > e)")
    cands = [n for n in _highly_composite_candidates(search_bound) if n >= 16]
    best = None
    for n in sorted(cands, key=lambda n: (-arith.divisor_count(n), n)):
        if _check_blowup(n, bits)[0]:
            best = n
            break
    if best is None:
        for n in range(16, min(search_bound, EXHAUSTIVE_LIMIT) + 1):
            if _check_blowup(n, bits)[0]:
                best = n
                break
    if best is None:
        raise NotFoundError(f"no divisor blowup witness up to {search_bound}")
    ok, parts = _check_blowup(best, bits)
    ctx = xreal.context(bits)
    log_sum = ctx.fsum(ctx.log(d) for d in arith.divisors(best))
    half = parts["d"] * ctx.log(best) / 2
    lo, hi = _enclosure_strings(_blowup_threshold(best), bits)
    witness = {
        "n": best,
        "factors": [[p, e] for p, e in arith.factorize(best).factors],
        "divisor_count": parts["d"],
        "threshold_lo": lo,
        "threshold_hi": hi,
        "log_divisor_sum": xreal.fmt(log_sum, 30),
        "half_d_log_n": xreal.fmt(half, 30),
        "identity_residual": xreal.fmt(abs(log_sum - half), 5),
        "precision_bits": bits,
    }
    return ObstructionCertificate("DivisorBlowup", witness, ok)


# ---------------------------------------------------------------------------
# polynomial growth gap


def _gap_margin(q: int, k: int) -> tuple[int, bool]:
    candidate = q ** (2 * k) + 1  # least integer > 1 that is 1 mod q^(2k)
    lhs, rhs = candidate * candidate, q ** (3 * k)  # compare candidate with q^(3k/2), squared
    return candidate, lhs > rhs


def polynomial_gap_check(k: int, q_max: int) -> ObstructionCertificate:
    """No p = 1 (mod q^(2k)) with p > 1 lies in (q^(k/2), q^(3k/2)), for q <= q_max."""
    if k < 1:
        raise PreconditionError("k must be >= 1")
    if q_max < 2:
        raise PreconditionError("q_max must be >= 2")
    margins = []
    ok = True
    for q in arith.primes_up_to(q_max):
        candidate, holds = _gap_margin(q, k)
        ok &= holds
        margins.append({
            "q": q,
            "least_candidate": str(candidate),
            "squared_margin_bits": (candidate * candidate).bit_length() - (q ** (3 * k)).bit_length(),
            "holds": holds,
        })
    return ObstructionCertificate("PolynomialGap", {"k": k, "q_max": q_max, "margins": margins}, ok)


# ---------------------------------------------------------------------------
# divisor-product inequality chain


def _t_table(t_values) -> dict[int, str]:
    return {int(k): str(v) for k, v in dict(t_values).items()}


def thm13_chain_demo(t_values, q1: int, q2: int, bits: int = xreal.DEFAULT_BITS) -> ObstructionCertificate:
    """Endpoints of the inequality chain at n = q1 q2 for a concrete t.

    With r(m) = t(m^2)^3 for prime m and t(m)^2 otherwise, a sequence with
    r(m)/2 < log F_m < 2 r(m) at m = q1, q2, n needs
        (t(q1^2)^3 + t(q2^2)^3) / 2 < log F_n < 2 t(n)^2,
    since log F_n >= log F_q1 + log F_q2.  ``verified`` is True when the
    left end certainly reaches the right end, i.e. the requirement is
    contradictory at this point.
    """
    table = _t_table(t_values)
    if q1 == q2:
        raise PreconditionError("q1 and q2 must differ")
    for q in (q1, q2):
        if not arith.is_prime(q):
            raise PreconditionError(f"{q} is not prime")
    n = q1 * q2
    needed = sorted({q1, q2, n, q1 * q1, q2 * q2, n * n})
    missing = [m for m in needed if m not in table]
    if missing:
        raise PreconditionError(f"t table does not cover {missing}")
    ctx = xreal.context(bits)
    keys = sorted(table)
    vals = [ctx.mpf(table[k]) for k in keys]
    if any(b < a for a, b in zip(vals, vals[1:])):
        raise PreconditionError("t must be non-decreasing on the supplied points")
    witness = {"q1": q1, "q2": q2, "n": n, "t": {str(m): table[m] for m in needed}, "precision_bits": bits}
    return _thm13_evaluate(witness)


def _thm13_evaluate(witness: dict) -> ObstructionCertificate:
    q1, q2, n, bits = witness["q1"], witness["q2"], witness["n"], witness["precision_bits"]
    t = witness["t"]

    def tv(c, m):
        return c.mpf(t[str(m)])

    def upper(c):  # 2 r(n) = 2 t(n)^2
        return 2 * tv(c, n) ** 2

    def lower(c):  # (r(q1) + r(q2)) / 2
        return (tv(c, q1 * q1) ** 3 + tv(c, q2 * q2) ** 3) / 2

    def cube(c):
        return tv(c, n) ** 3

    contradiction = xreal.lt(upper, lower, bits)
    t_gt_2 = xreal.lt(lambda c: c.mpf(2), lambda c: tv(c, n), bits)
    lower_gt_cube = xreal.lt(cube, lower, bits)
    ctx = xreal.context(bits)
    out = dict(witness)
    out.update({
        "two_t_n_squared": xreal.fmt(upper(ctx), 30),
        "half_sum_t_cubes": xreal.fmt(lower(ctx), 30),
        "t_n_cubed": xreal.fmt(cube(ctx), 30),
        "t_n_exceeds_2": bool(t_gt_2),
        "half_sum_exceeds_t_n_cubed": bool(lower_gt_cube),
        "contradiction": bool(contradiction),
    })
    notes = []
    if not contradiction:
        notes.append("chain not contradictory here: the argument needs t(n) large (t -> infinity)")
    return ObstructionCertificate("Thm13Chain", out, bool(contradiction), notes)


def t_table_from_function(fn_name: str, points, bits: int = xreal.DEFAULT_BITS) -> dict[int, str]:
    """Tabulate t at ``points``: ``log``, ``sqrt_log`` or ``const:<value>``."""
    ctx = xreal.context(bits)
    if fn_name == "log":
        f = ctx.log
    elif fn_name == "sqrt_log":
        def f(m):
            return ctx.sqrt(ctx.log(m))
    elif fn_name.startswith("const:"):
        value = ctx.mpf(fn_name.split(":", 1)[1])

        def f(m):
            return value
    else:
        raise ValueError(f"unknown t function {fn_name!r}")
    return {m: xreal.fmt(f(m), 50) for m in points}


def thm13_points(q1: int, q2: int) -> list[int]:
    n = q1 * q2
    return sorted({q1, q2, n, q1 * q1, q2 * q2, n * n})


# ---------------------------------------------------------------------------
# re-verification


def reverify(cert: ObstructionCertificate) -> bool:
    """Recompute ``verified`` from the witness alone."""
    w = cert.witness
    if cert.kind == "DivisorBlowup":
        n = w["n"]
        if math.prod(p**e for p, e in w["factors"]) != n or n < 16:
            return False
        ok, parts = _check_blowup(n, w.get("precision_bits", xreal.DEFAULT_BITS))
        return ok and parts["d"] == w["divisor_count"]
    if cert.kind == "PolynomialGap":
        k = w["k"]
        listed = [m["q"] for m in w["margins"]]
        if listed != arith.primes_up_to(w["q_max"]):
            return False
        return all(_gap_margin(q, k)[1] for q in listed)
    if cert.kind == "Thm13Chain":
        return _thm13_evaluate({key: w[key] for key in ("q1", "q2", "n", "t", "precision_bits")}).verified
    raise ValueError(f"unknown certificate kind {cert.kind!r}")
