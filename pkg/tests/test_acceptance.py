"""Acceptance criteria, one test each, with a printed pass/fail line.

Criteria 3 and 5 are split in two: the hard gates, and the trend checks
(the block-mean ratio trend, the tower median), which fail at this scale.
"""

from __future__ import annotations

import math
import random
import statistics
import time
from collections import Counter
from fractions import Fraction

import pytest
import sympy

from conftest import ACCEPTANCE_LINES
from fmethod import arith, cli, diagnostics, oracle, primesearch, rates, synthesis, xreal
from fmethod.rates import RateSpec
from fmethod.synthesis import FSequence

LOG21 = RateSpec.multiplicative("21*a*log(p)")


def record(capsys, label: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    with capsys.disabled():
        print("\n" + line)


@pytest.fixture(scope="module")
def log_pipeline():
    t0 = time.perf_counter()
    seq = synthesis.synthesize(LOG21, 200, "log", n0=1, policy="extend")
    report = synthesis.verify_growth(seq, LOG21, "log")
    return seq, report, time.perf_counter() - t0


@pytest.fixture(scope="module")
def tower_run():
    t0 = time.perf_counter()
    seq = synthesis.synthesize_tower(10**4, kappa="13.5", c="2")
    return seq, time.perf_counter() - t0


# 1 ---------------------------------------------------------------------------


def _random_small_sequence(rng: random.Random, M: int) -> FSequence:
    pairs = [(1, 0)]
    for m in range(2, M + 1):
        p = rng.choice([1] + [p for p in arith.primes_up_to(31) if p % m == 1])
        g = 0 if p == 1 else rng.choice([g for g in range(1, p) if arith.is_primitive_root(g, p)])
        pairs.append((p, g))
    return FSequence.from_pairs(pairs)


def test_c1_oracle_equivalence(capsys):
    rng = random.Random(20240601)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(100):
        M = rng.randint(1, 12)
        seq = _random_small_sequence(rng, M)
        system = oracle.build_truncated(seq, M)
        for n in range(1, 25):
            formula = math.prod(seq.p(d) for d in range(1, M + 1) if n % d == 0)
            mismatches += oracle.brute_fixed_points(system, n) != formula
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 5
    record(capsys, "C1 oracle equivalence", ok, f"100 sequences x 24 n, {mismatches} mismatches, {elapsed:.2f}s (<5s)")
    assert ok


# 2 ---------------------------------------------------------------------------


def test_c2_least_period(capsys, log_pipeline):
    t0 = time.perf_counter()
    seqs = [
        log_pipeline[0],
        synthesis.synthesize(RateSpec.multiplicative("3*a*log(p)"), 200, "log", policy="extend"),
        synthesis.synthesize(RateSpec.multiplicative("2*a*log(p)"), 200, "ratio", eps="0.1", policy="extend"),
        synthesis.synthesize_tower(400, kappa="0.5", c="2", enforce_hypothesis=False),
    ]
    checked = bad = 0
    for seq in seqs:
        for e in seq.entries:
            if e.p == 1 or e.p > 10**4:
                continue
            lam = pow(e.g, (e.p - 1) // e.n, e.p)
            comp = oracle.Component(e.n, e.p, lam, 0)
            system = oracle.TruncatedSystem((comp,))
            for x in range(1, e.p):
                checked += 1
                bad += oracle.least_period(system, 1, x) != e.n
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and checked > 0 and elapsed < 10
    record(capsys, "C2 least period", ok, f"{checked} points checked, {bad} wrong, {elapsed:.2f}s (<10s)")
    assert ok


# 3 ---------------------------------------------------------------------------


def _c3_ratios(seq):
    ctx = xreal.context(LOG21.precision_bits)
    return {n: synthesis.log_count(seq, n) / rates.eval_r(LOG21, n, ctx) for n in range(2, 201)}


def test_c3_log_mode(capsys, log_pipeline):
    seq, report, elapsed = log_pipeline
    ctx = xreal.context(LOG21.precision_bits)
    slack = ctx.mpf(2) ** -100
    row_fail = []
    for row in report.rows:
        divs = arith.divisors(row.n)
        unit = ctx.fsum(abs(rates.eval_s(LOG21, d, ctx)) for d in divs if seq.p(d) == 1)
        logF = ctx.fsum(ctx.log(seq.p(d)) for d in divs)
        r = rates.eval_r(LOG21, row.n, ctx)
        if abs(logF - r) > ctx.log(2) * len(divs) + unit + slack:
            row_fail.append(row.n)
    worst = max(abs(v - 1) for v in _c3_ratios(seq).values())
    extended = seq.summary()["extended"]
    ok = not row_fail and worst <= 0.25 and elapsed < 120 and report.ok and extended == 0
    record(capsys, "C3a LogMode n<=200 budget and max ratio", ok,
           f"rows over budget {row_fail}, max|logF/r-1|={float(worst):.3e} (<=0.25), "
           f"extended={extended}, {elapsed:.1f}s (<120s)")
    assert ok


def test_c3_log_mode_ratio_trend(capsys, log_pipeline):
    ratios = _c3_ratios(log_pipeline[0])
    early = statistics.fmean(float(ratios[n] - 1) for n in range(2, 21))
    late = statistics.fmean(float(ratios[n] - 1) for n in range(181, 201))
    ok = late < early
    record(capsys, "C3b LogMode ratio trend (block 181..200 below block 2..20)", ok,
           f"mean logF/r - 1: {early:.3e} -> {late:.3e}")
    assert ok


# 4 ---------------------------------------------------------------------------


def test_c4_ratio_mode(capsys):
    t0 = time.perf_counter()
    seq = synthesis.synthesize(LOG21, 200, "ratio", eps="0.5", policy="extend")
    report = synthesis.verify_growth(seq, LOG21, "ratio", eps="0.5")
    ctx = xreal.context(LOG21.precision_bits)
    slack = ctx.mpf(2) ** -100
    row_fail = []
    in_band = 0
    for row in report.rows:
        if not row.in_band:
            continue
        in_band += 1
        divs = arith.divisors(row.n)
        unit = ctx.fsum(abs(rates.eval_s(LOG21, d, ctx)) for d in divs if seq.p(d) == 1)
        allowance = ctx.fsum(ctx.log1p(ctx.power(d, ctx.mpf("-1.5"))) for d in divs)
        logF = ctx.fsum(ctx.log(seq.p(d)) for d in divs)
        if abs(logF - rates.eval_r(LOG21, row.n, ctx)) > allowance + unit + slack:
            row_fail.append(row.n)
    lo, hi = report.constants()
    finite = lo is not None and ctx.isfinite(lo) and ctx.isfinite(hi) and lo > 0
    elapsed = time.perf_counter() - t0
    ok = not row_fail and finite and in_band > 0
    record(capsys, "C4 RatioMode eps=0.5 n<=200", ok,
           f"{in_band} in-band rows, over budget {row_fail}, constants [{xreal.fmt(lo, 8)}, {xreal.fmt(hi, 8)}], "
           f"{elapsed:.1f}s")
    assert ok


# 5 ---------------------------------------------------------------------------


def test_c5_tower_certificate(capsys, tower_run):
    seq, elapsed = tower_run
    t0 = time.perf_counter()
    failures = synthesis.replay_tower_certificate(seq, "13.5", "2")
    powers = sum(1 for q in arith.primes_up_to(10**4) for a in range(1, 15) if q**a <= 10**4)
    total = elapsed + time.perf_counter() - t0
    ok = len(seq) == 10**4 and not failures and len(seq.certificate) == powers and total < 300
    record(capsys, "C5a tower n<=10^4 certificate replay", ok,
           f"{powers} prime powers, {len(failures)} failures, {total:.1f}s (<300s)")
    assert ok


def test_c5_tower_median_trend(capsys, tower_run):
    seq, _ = tower_run
    ctx = xreal.context(128)
    devs = []
    for n in range(10**3, 10**4 + 1):
        logF = synthesis.log_count(seq, n)
        devs.append(abs(logF / (rates.iota(n) * ctx.log(n)) - 1))
    median = statistics.median(devs)
    ok = median <= 0.5
    record(capsys, "C5b tower median |logF/(iota log n)-1| on [10^3,10^4]", ok,
           f"median={xreal.fmt(median, 6)} (<=0.5); every entry is a unit at kappa=13.5 for n<=10^4")
    assert ok


# 6 ---------------------------------------------------------------------------


def test_c6_linnik_scan(capsys):
    t0 = time.perf_counter()
    rows = primesearch.linnik_scan(50, 3, primesearch.WidthMode.bertrand(1))
    expected = sum(1 for n in range(2, 51) for a in range(1, n) if math.gcd(a, n) == 1)
    failures = []
    for r in rows:
        if r.x != n_cubed_plus_one(r.n):
            failures.append((r.n, r.a, "x"))
        for p in (r.found, r.least_prime):
            if p is None or not sympy.isprime(p) or p % r.n != r.a:
                failures.append((r.n, r.a, p))
        if r.found is not None and r.found < r.x:
            failures.append((r.n, r.a, "below x"))
    elapsed = time.perf_counter() - t0
    ok = len(rows) == expected and not failures and elapsed < 60
    record(capsys, "C6 Linnik scan n<=50 kappa=3 Bertrand(1)", ok,
           f"{len(rows)} rows ({sum(r.in_band for r in rows)} in band), {len(failures)} validation failures, "
           f"{elapsed:.1f}s (<60s)")
    assert ok


def n_cubed_plus_one(n: int) -> int:
    return n**3 + 1


# 7 ---------------------------------------------------------------------------


def test_c7_psi_telescoping(capsys):
    rng = random.Random(77)
    t0 = time.perf_counter()
    bad = 0
    for i in range(1000):
        n = rng.randint(1, 1000)
        a = rng.choice([a for a in range(n) if math.gcd(a, n) == 1] or [0])
        x = rng.randint(0, 10**6)
        h1 = rng.randint(0, 10**6 - x)
        h2 = rng.randint(0, 10**6 - x - h1)
        if i % 4 == 0 and h1 > 0:  # dyadic, exactly representable split points
            x, h1 = x + Fraction(1, 2), h1 - Fraction(1, 2)
        whole = primesearch.psi_diff_exact(x, h1 + h2, a, n)
        parts = primesearch.psi_diff_exact(x, h1, a, n) + primesearch.psi_diff_exact(x + h1, h2, a, n)
        bad += whole != Counter(parts)
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 30
    record(capsys, "C7 psi telescoping", ok, f"1000 cases, {bad} non-additive, {elapsed:.1f}s (<30s)")
    assert ok


# 8 ---------------------------------------------------------------------------


def test_c8_diagnostics(capsys):
    t0 = time.perf_counter()
    blowup = diagnostics.divisor_blowup_witness(10**6)
    gaps = [diagnostics.polynomial_gap_check(k, 1000) for k in range(1, 11)]
    points = diagnostics.thm13_points(101, 103)
    chain = diagnostics.thm13_chain_demo(diagnostics.t_table_from_function("log", points), 101, 103)
    exact_gap = all(
        (q ** (2 * k) + 1) ** 2 > q ** (3 * k) for k in range(1, 11) for q in sympy.primerange(2, 1001)
    )
    elapsed = time.perf_counter() - t0
    ok = (blowup.verified and diagnostics.reverify(blowup) and all(g.verified for g in gaps) and exact_gap
          and chain.verified and diagnostics.reverify(chain) and elapsed < 30)
    record(capsys, "C8 diagnostics", ok,
           f"blowup n={blowup.witness['n']} d={blowup.witness['divisor_count']} vs "
           f"{blowup.witness['threshold_hi'][:7]}, gaps k<=10 q<=1000 {'hold' if exact_gap else 'FAIL'}, "
           f"chain(101,103) verified={chain.verified}, {elapsed:.1f}s (<30s)")
    assert ok


# 9 ---------------------------------------------------------------------------


def test_c9_determinism(capsys, tmp_path):
    rate = tmp_path / "log21.toml"
    rate.write_text(rates.dump_rate_spec(LOG21))
    outputs = {}
    for workers in (1, 4):
        seq_path = tmp_path / f"w{workers}.seq"
        rep_path = tmp_path / f"w{workers}.csv"
        assert cli.main(["synthesize", "--rate", str(rate), "--mode", "log", "--n-max", "200",
                         "--policy", "extend", "--workers", str(workers), "--out", str(seq_path)]) == 0
        assert cli.main(["verify", "--rate", str(rate), "--mode", "log", "--sequence", str(seq_path),
                         "--out", str(rep_path)]) == 0
        outputs[workers] = (seq_path.read_bytes(), rep_path.read_bytes())
    ok = outputs[1] == outputs[4]
    record(capsys, "C9 determinism workers 1 vs 4", ok,
           f"sequence {'identical' if outputs[1][0] == outputs[4][0] else 'DIFFERS'}, "
           f"report {'identical' if outputs[1][1] == outputs[4][1] else 'DIFFERS'}")
    assert ok
