"""Sequence synthesis for the F-method, periodic-point counts, growth checks.

An :class:`FSequence` is the list of pairs (p_n, g_n), n = 1..n_max, where
p_n is 1 or a prime = 1 (mod n) and g_n is 0 or a primitive root mod p_n.
The automorphism it defines has exactly prod_{d | n} p_d points of period n,
so the sequence is all we need to store.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from . import arith, primesearch, xreal
from .primesearch import APIntervalQuery, Policy
from .rates import RateSpec, eval_r, eval_s, iota

RULES = ("Unit", "Thm21i", "Thm21ii", "Tower")
RATIO_HYPOTHESIS = "20.1"
LOG_HYPOTHESIS = "13.4"
TOWER_KAPPA_MIN = "13.4"


class Mode(str, enum.Enum):
    RATIO = "ratio"
    LOG = "log"
    TOWER = "tower"


class SynthesisError(RuntimeError):
    def __init__(self, n: int, message: str):
        super().__init__(f"n={n}: {message}")
        self.n = n


@dataclass(frozen=True)
class Provenance:
    """How an entry was chosen.

    ``interval_lo``/``interval_hi`` are the integer search band [lo, hi),
    the ceilings of the real endpoints; None for unit entries.
    """

    rule: str
    in_band: bool = True
    interval_lo: int | None = None
    interval_hi: int | None = None


@dataclass(frozen=True)
class Entry:
    n: int
    p: int
    g: int
    provenance: Provenance

    @classmethod
    def unit(cls, n: int) -> Entry:
        return cls(n, 1, 0, Provenance("Unit"))


@dataclass(frozen=True)
class TowerStep:
    """One prime power q^a of the tower construction."""

    q: int
    a: int
    r_value: str
    prior_sum: str
    delta: str
    bound: str
    p: int
    in_band: bool


@dataclass
class FSequence:
    entries: list[Entry]
    hypothesis_flags: list[int] = field(default_factory=list)
    certificate: list[TowerStep] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, n: int) -> Entry:
        if not 1 <= n <= len(self.entries):
            raise IndexError(f"n={n} outside sequence of length {len(self.entries)}")
        return self.entries[n - 1]

    def p(self, n: int) -> int:
        return self[n].p

    @classmethod
    def from_pairs(cls, pairs) -> FSequence:
        """Build from (p_n, g_n) pairs; every non-unit entry gets rule Thm21ii."""
        entries = []
        for n, (p, g) in enumerate(pairs, start=1):
            entries.append(Entry.unit(n) if p == 1 else Entry(n, p, g, Provenance("Thm21ii", True, p, p + 1)))
        return cls(entries)

    def summary(self) -> dict:
        probable = [e.n for e in self.entries if e.p >= arith.DETERMINISTIC_LIMIT]
        return {
            "n_max": len(self),
            "unit": sum(e.p == 1 for e in self.entries),
            "in_band": sum(e.p != 1 and e.provenance.in_band for e in self.entries),
            "extended": sum(e.p != 1 and not e.provenance.in_band for e in self.entries),
            "hypothesis_flags": list(self.hypothesis_flags),
            "probable_prime_entries": probable,
        }


# ---------------------------------------------------------------------------
# validation


def validate(seq: FSequence, check_roots: bool = True) -> list[str]:
    """Check the three sequence conditions and provenance; return problems."""
    problems = []
    for i, e in enumerate(seq.entries, start=1):
        if e.n != i:
            problems.append(f"entry {i} carries index {e.n}")
            continue
        if i == 1 and e.p != 1:
            problems.append("p_1 must be 1")
        if e.p == 1:
            if e.g != 0:
                problems.append(f"n={i}: p=1 but g={e.g}")
            continue
        if not arith.is_prime(e.p):
            problems.append(f"n={i}: p={e.p} is not prime")
            continue
        if e.p % i != 1 % i:
            problems.append(f"n={i}: p={e.p} is not 1 mod {i}")
        if check_roots and not arith.is_primitive_root(e.g, e.p):
            problems.append(f"n={i}: g={e.g} is not a primitive root mod {e.p}")
        pv = e.provenance
        if pv.rule not in RULES or pv.rule == "Unit":
            problems.append(f"n={i}: bad rule {pv.rule!r} for p={e.p}")
        if pv.in_band and not (pv.interval_lo is not None and pv.interval_lo <= e.p < pv.interval_hi):
            problems.append(f"n={i}: p={e.p} marked in band but outside [{pv.interval_lo}, {pv.interval_hi})")
    return problems


# ---------------------------------------------------------------------------
# interval synthesis


def _is_zero(ctx, value, n: int, spec: RateSpec) -> bool:
    divs = arith.divisors(n)
    scale = max(abs(eval_r(spec, d, ctx)) for d in divs)
    return abs(value) <= ctx.ldexp(1, -(spec.precision_bits - 20)) * len(divs) * scale


def _root_tractable(p: int) -> bool:
    try:
        arith.factorize(p - 1, use_ecm=False)
    except arith.FactorizationBudgetError:
        return False
    return True


def _place_prime(n: int, modulus: int, lo_fn, hi_fn, policy: Policy, bits: int, cap: int):
    """Smallest usable prime = 1 (mod modulus) in the real band [lo_fn, hi_fn).

    A prime is usable when p - 1 splits by trial division and rho alone, so
    that a primitive root can be certified cheaply; primes failing that are
    skipped.  Returns (p, in_band, lo_int, hi_int) or None when Strict finds
    nothing.
    """
    # for integers p: p >= x iff p >= ceil(x), and p < y iff p < ceil(y)
    lo_int = xreal.certified_ceil(lo_fn, bits)
    hi_int = xreal.certified_ceil(hi_fn, bits)
    start = max(lo_int, 2)
    while True:
        q = APIntervalQuery(1 % modulus, modulus, start, max(hi_int, start + 1), policy)
        res = primesearch.find_prime_in_ap_interval(q, cap)
        if res.found is None:
            return None
        p = int(res.found)
        if not _root_tractable(p):
            start = p + 1
            continue
        in_band = p < hi_int
        if not in_band and policy is Policy.STRICT:
            return None
        return p, in_band, lo_int, hi_int


def _synth_entry(job) -> Entry | SynthesisError:
    spec, n, mode, eps, policy, n0, cap = job
    bits = spec.precision_bits
    ctx = spec.ctx()
    if n == 1 or n < n0:
        return Entry.unit(n)
    s = eval_s(spec, n, ctx)
    if _is_zero(ctx, s, n, spec):
        return Entry.unit(n)
    if xreal.lt(lambda c: eval_s(spec, n, c), lambda c: c.log(n + 1), bits) is not False:
        return Entry.unit(n)  # exp(s) < n + 1: no prime = 1 mod n fits

    def lo_fn(c):
        return c.exp(eval_s(spec, n, c))

    if mode is Mode.LOG:
        rule = "Thm21ii"

        def hi_fn(c):
            return 2 * c.exp(eval_s(spec, n, c))
    else:
        rule = "Thm21i"

        def hi_fn(c):
            return c.exp(eval_s(spec, n, c)) * (1 + c.power(n, -1 - c.mpf(eps)))

    try:
        placed = _place_prime(n, n, lo_fn, hi_fn, policy, bits, cap)
    except primesearch.SearchCapError as exc:
        return SynthesisError(n, str(exc))
    if placed is None:
        return SynthesisError(n, f"no prime = 1 mod {n} in [exp(s), ...) with s = {xreal.fmt(s)}")
    p, in_band, lo_int, hi_int = placed
    return Entry(n, p, arith.primitive_root(p), Provenance(rule, in_band, lo_int, hi_int))


def _hypothesis_ok(spec: RateSpec, n: int, mode: Mode) -> bool:
    ctx = spec.ctx()
    const = ctx.mpf(RATIO_HYPOTHESIS if mode is Mode.RATIO else LOG_HYPOTHESIS)
    return eval_s(spec, n, ctx) > const * ctx.log(n)


def synthesize(
    spec: RateSpec,
    n_max: int,
    mode: Mode | str,
    eps=None,
    policy: Policy | str = Policy.STRICT,
    n0: int = 1,
    cap: int = primesearch.DEFAULT_CAP,
    workers: int = 1,
) -> FSequence:
    """Choose p_n = 1 (mod n) just above exp(s(n)) for every n <= n_max.

    Log mode searches [exp s, 2 exp s); ratio mode searches
    [exp s, exp s (1 + n^(-1-eps))).  Entries with n < n0, s(n) = 0, or
    exp(s(n)) < n + 1 are units.  Entries are independent, so ``workers > 1``
    spreads them over processes; the output does not depend on it.
    """
    mode, policy = Mode(mode), Policy(policy)
    if mode is Mode.TOWER:
        raise ValueError("use synthesize_tower for tower mode")
    if n_max < 1 or n0 < 1:
        raise ValueError("n_max and n0 must be >= 1")
    if mode is Mode.RATIO:
        if eps is None:
            raise ValueError("ratio mode needs eps")
        if xreal.context(64).mpf(str(eps)) <= 0:
            raise ValueError("eps must be > 0")
    if spec.n_max is not None and spec.n_max < n_max:
        raise ValueError(f"rate table stops at {spec.n_max} < n_max = {n_max}")
    eps = None if eps is None else str(eps)
    jobs = [(spec, n, mode, eps, policy, n0, cap) for n in range(1, n_max + 1)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_synth_entry, jobs, chunksize=4))
    else:
        results = [_synth_entry(j) for j in jobs]
    for res in results:
        if isinstance(res, SynthesisError):
            raise res
    seq = FSequence(results)
    seq.hypothesis_flags = [e.n for e in results if e.p != 1 and not _hypothesis_ok(spec, e.n, mode)]
    return seq


# ---------------------------------------------------------------------------
# tower construction


def _tower_chain(job) -> list[tuple[Entry, TowerStep]]:
    q, n_max, kappa, c_const, bits, cap = job
    out = []
    logs: list = []  # log p_{q^i} as interval-evaluable closures

    def prior(ctx):
        return ctx.fsum(ctx.log(p) for p in logs) if logs else ctx.zero

    a, n = 1, q
    while n <= n_max:
        k = iota(n)

        def target(ctx, n=n, k=k):
            return k * ctx.log(n)

        def bound(ctx, a=a):
            return ctx.log(ctx.mpf(c_const)) + a * ctx.mpf(kappa) * ctx.log(q)

        def delta(ctx, target=target):
            return target(ctx) - prior(ctx)

        fits = xreal.lt(lambda ctx: abs(delta(ctx)), bound, bits)
        short = xreal.lt(bound, delta, bits)
        ctx = xreal.context(bits)
        if fits is not False:
            entry, in_band = Entry.unit(n), True
        elif not short:
            # running sum overshoots r(q^a); cannot happen for non-decreasing r
            entry, in_band = Entry.unit(n), False
        else:
            try:
                placed = _place_prime(
                    n, n, lambda c: c.exp(delta(c)), lambda c: 2 * c.exp(delta(c)), Policy.EXTEND, bits, cap
                )
                p, in_band, lo_int, hi_int = placed
                entry = Entry(n, p, arith.primitive_root(p), Provenance("Tower", in_band, lo_int, hi_int))
            except primesearch.SearchCapError:
                entry, in_band = Entry.unit(n), False
        step = TowerStep(
            q, a, xreal.fmt(target(ctx), 30), xreal.fmt(prior(ctx), 30), xreal.fmt(delta(ctx), 30),
            xreal.fmt(bound(ctx), 30), entry.p, in_band,
        )
        out.append((entry, step))
        logs.append(entry.p)
        a, n = a + 1, n * q
    return out


def synthesize_tower(
    n_max: int,
    kappa="13.5",
    c="2",
    bits: int = xreal.DEFAULT_BITS,
    cap: int = primesearch.DEFAULT_CAP,
    workers: int = 1,
    enforce_hypothesis: bool = True,
) -> FSequence:
    """Greedy per-prime construction aimed at log F_n ~ iota(n) log n.

    Non-prime-powers get p_n = 1.  Along each chain q, q^2, ... the running
    sum of log p_{q^i} is kept within log(c q^(a kappa)) of r(q^a); a prime
    = 1 (mod q^a) from [exp(delta), 2 exp(delta)) is added only when the
    running sum falls short by more than that.
    """
    ctx = xreal.context(64)
    if enforce_hypothesis and not ctx.mpf(str(kappa)) > ctx.mpf(TOWER_KAPPA_MIN):
        raise ValueError(f"kappa must exceed {TOWER_KAPPA_MIN}, got {kappa}")
    if not ctx.mpf(str(c)) > 1:
        raise ValueError(f"c must exceed 1, got {c}")
    entries = [Entry.unit(n) for n in range(1, n_max + 1)]
    jobs = [(q, n_max, str(kappa), str(c), bits, cap) for q in arith.primes_up_to(n_max)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chains = list(pool.map(_tower_chain, jobs))
    else:
        chains = [_tower_chain(j) for j in jobs]
    certificate = []
    for chain in chains:
        for entry, step in chain:
            entries[entry.n - 1] = entry
            certificate.append(step)
    return FSequence(entries, certificate=certificate)


def replay_tower_certificate(seq: FSequence, kappa, c, bits: int = xreal.DEFAULT_BITS) -> list[str]:
    """Recheck the per-prime-power inequality from the sequence alone.

    At every prime power q^a <= len(seq):
        |sum_{i<=a} log p_{q^i} - iota(q^a) log q^a| <= log(c q^(a kappa)),
    decided with interval arithmetic, and p_n = 1 off prime powers.
    """
    failures = []
    for n in range(2, len(seq) + 1):
        fac = arith.factorize(n)
        if fac.omega != 1 and seq.p(n) != 1:
            failures.append(f"n={n}: not a prime power but p={seq.p(n)}")
    for q in arith.primes_up_to(len(seq)):
        a, n, ps = 1, q, []
        while n <= len(seq):
            ps.append(seq.p(n))

            def gap(ctx, n=n, a=a, ps=tuple(ps)):
                s = ctx.fsum(ctx.log(p) for p in ps)
                return ctx.log(ctx.mpf(str(c))) + a * ctx.mpf(str(kappa)) * ctx.log(q) - abs(s - iota(n) * ctx.log(n))

            ok = xreal.lt(lambda ctx: ctx.zero, lambda ctx, gap=gap: gap(ctx) + ctx.mpf(2) ** -bits, bits)
            if not ok:
                failures.append(f"q={q}, a={a}: inequality fails")
            a, n = a + 1, n * q
    by_n = {step.q**step.a: step for step in seq.certificate}
    for n, step in by_n.items():
        if n <= len(seq) and step.p != seq.p(n):
            failures.append(f"certificate lists p={step.p} at n={n}, sequence has {seq.p(n)}")
    return failures


# ---------------------------------------------------------------------------
# periodic points


def count_periodic(seq: FSequence, n: int) -> int:
    """F_n = prod_{d | n} p_d."""
    if not 1 <= n <= len(seq):
        raise IndexError(f"n={n} outside sequence of length {len(seq)}")
    out = 1
    for d in arith.divisors(n):
        out *= seq.p(d)
    return out


def log_count(seq: FSequence, n: int, bits: int = xreal.DEFAULT_BITS):
    if not 1 <= n <= len(seq):
        raise IndexError(f"n={n} outside sequence of length {len(seq)}")
    ctx = xreal.context(bits)
    return ctx.fsum(ctx.log(seq.p(d)) for d in arith.divisors(n))


# ---------------------------------------------------------------------------
# growth verification

GROWTH_HEADER = [
    "n", "r", "s", "logF", "ratio_exp", "ratio_log", "target", "deviation",
    "error_budget", "unit_correction", "extension_correction", "in_band", "within_budget",
]


@dataclass(frozen=True)
class GrowthRow:
    n: int
    r: object
    s: object
    logF: object
    ratio_exp: object
    ratio_log: object
    target: object
    deviation: object
    error_budget: object
    unit_correction: object
    extension_correction: object
    in_band: bool
    within_budget: bool

    def as_strings(self) -> list[str]:
        out = [str(self.n)]
        for name in GROWTH_HEADER[1:-2]:
            v = getattr(self, name)
            out.append("" if v is None else xreal.fmt(v))
        out += ["true" if self.in_band else "false", "true" if self.within_budget else "false"]
        return out


@dataclass
class GrowthReport:
    mode: str
    rows: list[GrowthRow]

    @property
    def violations(self) -> list[GrowthRow]:
        return [row for row in self.rows if not row.within_budget]

    @property
    def ok(self) -> bool:
        return not self.violations

    def constants(self) -> tuple:
        """(min, max) of F_n / exp(target) over in-band rows."""
        ctx = xreal.context(xreal.DEFAULT_BITS)
        devs = [row.deviation for row in self.rows if row.in_band]
        if not devs:
            return None, None
        return ctx.exp(min(devs)), ctx.exp(max(devs))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(GROWTH_HEADER)
        for row in self.rows:
            w.writerow(row.as_strings())
        return buf.getvalue()

    def to_json(self) -> str:
        rows = [dict(zip(GROWTH_HEADER, row.as_strings())) for row in self.rows]
        return json.dumps({"mode": self.mode, "rows": rows}, indent=1) + "\n"

    @classmethod
    def from_csv(cls, text: str, mode: str = "") -> GrowthReport:
        ctx = xreal.context(xreal.DEFAULT_BITS)
        reader = csv.reader(io.StringIO(text))
        if next(reader) != GROWTH_HEADER:
            raise ValueError("unexpected growth report header")
        rows = []
        for rec in reader:
            nums = [None if v == "" else ctx.mpf(v) for v in rec[1:-2]]
            rows.append(GrowthRow(int(rec[0]), *nums, rec[-2] == "true", rec[-1] == "true"))
        return cls(mode, rows)


def verify_growth(
    seq: FSequence,
    spec: RateSpec,
    mode: Mode | str,
    n_range=None,
    eps=None,
    kappa=None,
    c=None,
) -> GrowthReport:
    """Recompute log F_n from the sequence and compare with the target rate.

    Ratio/log modes compare with r(n).  The budget sums the per-entry band
    allowance (log(1 + d^(-1-eps)) or log 2) over in-band divisors, |s(d)|
    over divisors forced to be units, and the full |log p_d - s(d)| over
    divisors whose prime was found past the band.

    Tower mode compares with sum r(q^a) over q^a || n, against the budget
    sum log(c q^(a kappa)).
    """
    mode = Mode(mode)
    bits = spec.precision_bits
    ctx = xreal.context(bits)
    n_range = range(1, len(seq) + 1) if n_range is None else n_range
    if mode is Mode.RATIO and eps is None:
        raise ValueError("ratio mode needs eps")
    if mode is Mode.TOWER and (kappa is None or c is None):
        raise ValueError("tower mode needs kappa and c")
    slack_unit = ctx.ldexp(1, -(bits - 20))

    s_cache: dict[int, object] = {}

    def s_of(d):
        if d not in s_cache:
            s_cache[d] = eval_s(spec, d, ctx)
        return s_cache[d]

    rows = []
    for n in n_range:
        divs = arith.divisors(n)
        logF = ctx.fsum(ctx.log(seq.p(d)) for d in divs)
        r = eval_r(spec, n, ctx)
        s = s_of(n)
        unit_corr = ctx.zero
        ext_corr = ctx.zero
        allowance = ctx.zero
        in_band = True
        if mode is Mode.TOWER:
            fac = arith.factorize(n)
            target = ctx.fsum(iota(q**a) * ctx.log(q**a) for q, a in fac.factors)
            allowance = ctx.fsum(
                ctx.log(ctx.mpf(str(c))) + a * ctx.mpf(str(kappa)) * ctx.log(q) for q, a in fac.factors
            )
            in_band = all(seq[d].provenance.in_band for d in divs)
        else:
            target = r
            for d in divs:
                e = seq[d]
                if e.p == 1:
                    sd = s_of(d)
                    if not _is_zero(ctx, sd, d, spec):
                        unit_corr += abs(sd)
                elif e.provenance.in_band:
                    if mode is Mode.LOG:
                        allowance += ctx.log(2)
                    else:
                        allowance += ctx.log1p(ctx.power(d, -1 - ctx.mpf(str(eps))))
                else:
                    in_band = False
                    ext_corr += abs(ctx.log(e.p) - s_of(d))
        budget = allowance + unit_corr + ext_corr
        deviation = logF - target
        slack = slack_unit * len(divs) * max(ctx.one, abs(logF), abs(target))
        rows.append(GrowthRow(
            n, r, s, logF, logF - r, logF / r if r else None, target, deviation,
            budget, unit_corr, ext_corr, in_band, abs(deviation) <= budget + slack,
        ))
    return GrowthReport(mode.value, rows)


# ---------------------------------------------------------------------------
# serialization

SEQUENCE_MAGIC = "# fmethod-sequence v1: n p g rule in_band lo hi"


def dump_sequence(seq: FSequence) -> str:
    lines = [SEQUENCE_MAGIC]
    for e in seq.entries:
        pv = e.provenance
        lo = "-" if pv.interval_lo is None else str(pv.interval_lo)
        hi = "-" if pv.interval_hi is None else str(pv.interval_hi)
        lines.append(f"{e.n} {e.p} {e.g} {pv.rule} {'true' if pv.in_band else 'false'} {lo} {hi}")
    return "\n".join(lines) + "\n"


def parse_sequence(text: str) -> FSequence:
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 7:
            raise ValueError(f"line {lineno}: expected 7 fields, got {len(parts)}")
        n, p, g, rule, in_band, lo, hi = parts
        if rule not in RULES or in_band not in ("true", "false"):
            raise ValueError(f"line {lineno}: bad rule or in_band field")
        try:
            entries.append(Entry(
                int(n), int(p), int(g),
                Provenance(rule, in_band == "true", None if lo == "-" else int(lo), None if hi == "-" else int(hi)),
            ))
        except ValueError:
            raise ValueError(f"line {lineno}: non-integer field") from None
        if entries[-1].n != len(entries):
            raise ValueError(f"line {lineno}: expected n={len(entries)}, got {n}")
    return FSequence(entries)


def dump_certificate(seq: FSequence) -> str:
    return json.dumps([asdict(step) for step in seq.certificate], indent=1) + "\n"
