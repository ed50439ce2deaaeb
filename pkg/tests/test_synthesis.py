from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fmethod import arith, rates, synthesis, xreal
from fmethod.rates import RateSpec
from fmethod.synthesis import Entry, FSequence, Provenance

CTX = xreal.context(128)
LOG21 = RateSpec.multiplicative("21*a*log(p)")
SMALL = RateSpec.multiplicative("3*a*log(p)")


@pytest.fixture(scope="module")
def log21_seq():
    return synthesis.synthesize(LOG21, 30, "log")


@pytest.fixture(scope="module")
def small_seq():
    return synthesis.synthesize(SMALL, 120, "log", policy="extend")


def demo_seq():
    pairs = [(1, 0)] * 6
    pairs[1], pairs[2], pairs[5] = (3, 2), (7, 3), (13, 2)
    return FSequence.from_pairs(pairs)


def test_trivial_sequence():
    seq = synthesis.synthesize(LOG21, 1, "log")
    assert [(e.p, e.g) for e in seq.entries] == [(1, 0)]


def test_log_mode_example(log21_seq):
    e = log21_seq[2]
    assert (e.p, e.provenance.interval_lo, e.provenance.interval_hi) == (2097169, 2**21, 2**22)
    assert e.provenance.in_band and e.provenance.rule == "Thm21ii"
    assert arith.is_primitive_root(e.g, e.p)
    assert (log21_seq[6].p, log21_seq[6].g) == (1, 0)


def test_p2_is_least_prime_in_band():
    assert all(not arith.is_prime(m) for m in range(2**21, 2097169))


def test_synthesized_sequences_are_valid(log21_seq, small_seq):
    assert synthesis.validate(log21_seq) == []
    assert synthesis.validate(small_seq) == []


def test_entries_sit_at_exp_s(log21_seq):
    for e in log21_seq.entries:
        if e.p == 1:
            continue
        s = rates.eval_s(LOG21, e.n, xreal.context(256))
        assert CTX.exp(s) <= e.p < 2 * CTX.exp(s)
        assert e.p % e.n == 1


def test_ratio_mode_band():
    seq = synthesis.synthesize(LOG21, 40, "ratio", eps="0.5", policy="extend")
    assert synthesis.validate(seq) == []
    for e in seq.entries:
        if e.p != 1 and e.provenance.in_band:
            s = rates.eval_s(LOG21, e.n)
            assert CTX.exp(s) <= e.p < CTX.exp(s) * (1 + CTX.power(e.n, -1.5))


def test_strict_failure_raises():
    # s(2) = 3 log 2, so the band is [8, 8 (1 + 2^-6)) = [8, 8.125): no odd prime
    with pytest.raises(synthesis.SynthesisError) as info:
        synthesis.synthesize(SMALL, 8, "ratio", eps="5", policy="strict")
    assert info.value.n == 2


def test_extend_marks_out_of_band(small_seq):
    out = [e for e in small_seq.entries if e.p != 1 and not e.provenance.in_band]
    for e in out:
        assert e.p >= e.provenance.interval_hi


def test_n0_forces_units():
    seq = synthesis.synthesize(LOG21, 12, "log", n0=5)
    assert all(seq.p(n) == 1 for n in range(1, 5))
    assert seq.p(5) != 1


def test_bad_arguments():
    with pytest.raises(ValueError):
        synthesis.synthesize(LOG21, 5, "ratio")
    with pytest.raises(ValueError):
        synthesis.synthesize(LOG21, 5, "tower")
    with pytest.raises(ValueError):
        synthesis.synthesize(RateSpec.explicit(["0"] * 3), 5, "log")


def test_hypothesis_flags():
    seq = synthesis.synthesize(LOG21, 20, "log")
    # s(n) = 21 log q for n = q^a; flagged when 21 log q <= 13.4 log n
    expected = [n for n in range(2, 21) if seq.p(n) != 1
                and 21 * math.log(arith.prime_power_base(n)) <= 13.4 * math.log(n)]
    assert seq.hypothesis_flags == expected


def test_count_periodic_examples():
    seq = demo_seq()
    assert synthesis.count_periodic(seq, 1) == 1
    assert synthesis.count_periodic(seq, 6) == 273
    assert synthesis.count_periodic(seq, 4) == 3
    assert abs(synthesis.log_count(seq, 6) - CTX.log(273)) < CTX.mpf(2) ** -110
    assert synthesis.log_count(FSequence.from_pairs([(1, 0)] * 9), 9) == 0


def test_count_divisibility_and_log_count(small_seq):
    n_max = len(small_seq)
    for n in range(1, n_max + 1):
        f = synthesis.count_periodic(small_seq, n)
        assert abs(synthesis.log_count(small_seq, n) - CTX.log(f)) <= CTX.mpf(2) ** -100 * max(1, CTX.log(f))
        for m in range(n, n_max + 1, n):
            assert synthesis.count_periodic(small_seq, m) % f == 0


def test_validate_catches_problems():
    bad = FSequence([
        Entry(1, 2, 1, Provenance("Thm21ii", True, 2, 3)),
        Entry(2, 9, 2, Provenance("Thm21ii", True, 9, 10)),
        Entry(3, 5, 2, Provenance("Thm21ii", True, 5, 6)),
        Entry(4, 5, 4, Provenance("Thm21ii", True, 5, 6)),
        Entry(5, 11, 2, Provenance("Thm21ii", True, 12, 20)),
        Entry(6, 1, 3, Provenance("Unit")),
    ])
    problems = "\n".join(synthesis.validate(bad))
    for needle in ("p_1 must be 1", "9 is not prime", "not 1 mod 3", "g=4", "outside [12, 20)", "p=1 but g=3"):
        assert needle in problems


def test_sequence_roundtrip(log21_seq, small_seq):
    for seq in (log21_seq, small_seq, demo_seq()):
        text = synthesis.dump_sequence(seq)
        again = synthesis.parse_sequence(text)
        assert again.entries == seq.entries
        assert synthesis.dump_sequence(again) == text


@pytest.mark.parametrize("text", ["1 1 0 Unit true -\n", "1 1 0 Nope true - -\n", "2 1 0 Unit true - -\n", "1 x 0 Unit true - -\n"])
def test_parse_sequence_errors(text):
    with pytest.raises(ValueError):
        synthesis.parse_sequence(text)


@given(st.lists(st.sampled_from([1, 3, 5, 7, 11, 13]), min_size=1, max_size=12))
def test_from_pairs_roundtrip(ps):
    pairs = [(1, 0)] + [(p, arith.primitive_root(p) if p != 1 else 0) for p in ps]
    seq = FSequence.from_pairs(pairs)
    assert synthesis.parse_sequence(synthesis.dump_sequence(seq)).entries == seq.entries


def test_verify_growth_log(log21_seq):
    report = synthesis.verify_growth(log21_seq, LOG21, "log")
    assert report.ok
    for row in report.rows:
        assert row.logF == synthesis.log_count(log21_seq, row.n, LOG21.precision_bits)
        assert row.error_budget <= CTX.log(2) * arith.divisor_count(row.n) + row.unit_correction


def test_verify_growth_trivial_rate():
    zero = RateSpec.explicit(["0"] * 8)
    seq = synthesis.synthesize(zero, 8, "log")
    assert all(e.p == 1 for e in seq.entries)
    report = synthesis.verify_growth(seq, zero, "log")
    assert report.ok and all(row.ratio_exp == 0 for row in report.rows)


def test_verify_growth_detects_corruption(log21_seq):
    entries = list(log21_seq.entries)
    e = entries[1]
    entries[1] = Entry(2, 3, 2, e.provenance)
    report = synthesis.verify_growth(FSequence(entries), LOG21, "log")
    assert not report.ok and 2 in [row.n for row in report.violations]


def test_ratio_two_sided_bound():
    seq = synthesis.synthesize(LOG21, 60, "ratio", eps="0.5", policy="extend")
    report = synthesis.verify_growth(seq, LOG21, "ratio", eps="0.5")
    assert report.ok
    lo, hi = report.constants()
    assert 0 < lo <= 1 <= hi < 2
    for row in report.rows:
        if row.in_band:
            assert row.r - row.unit_correction <= row.logF + CTX.mpf(2) ** -90
            assert row.logF <= row.r + row.error_budget + CTX.mpf(2) ** -90


def test_growth_report_roundtrip(log21_seq):
    report = synthesis.verify_growth(log21_seq, LOG21, "log")
    text = report.to_csv()
    again = synthesis.GrowthReport.from_csv(text, "log")
    assert again.to_csv() == text
    assert '"mode": "log"' in report.to_json()


def test_tower_trivial():
    seq = synthesis.synthesize_tower(1)
    assert [(e.p, e.g) for e in seq.entries] == [(1, 0)]


def test_tower_hypothesis_guard():
    with pytest.raises(ValueError):
        synthesis.synthesize_tower(10, kappa="5")
    with pytest.raises(ValueError):
        synthesis.synthesize_tower(10, c="1")


def test_tower_places_primes_when_kappa_small():
    seq = synthesis.synthesize_tower(200, kappa="0.5", c="2", enforce_hypothesis=False)
    assert synthesis.validate(seq) == []
    assert seq.p(3) == 13  # delta = 2 log 3 > log 2 + 0.5 log 3; first prime = 1 mod 3 in [9, 18)
    placed = [e for e in seq.entries if e.p != 1]
    assert placed and all(arith.prime_power_base(e.n) for e in placed)
    assert synthesis.replay_tower_certificate(seq, "0.5", "2") == []
    report = synthesis.verify_growth(seq, RateSpec.tower(), "tower", kappa="0.5", c="2")
    assert report.ok


def test_tower_replay_detects_tampering():
    seq = synthesis.synthesize_tower(200, kappa="0.5", c="2", enforce_hypothesis=False)
    entries = list(seq.entries)
    entries[2] = Entry(3, 1, 0, Provenance("Unit"))
    entries[5] = Entry(6, 7, 3, Provenance("Tower", True, 7, 8))
    failures = synthesis.replay_tower_certificate(FSequence(entries, certificate=seq.certificate), "0.5", "2")
    text = "\n".join(failures)
    assert "q=3, a=1" in text and "n=6" in text


def test_tower_default_parameters_give_units():
    seq = synthesis.synthesize_tower(2000)
    assert all(e.p == 1 for e in seq.entries)
    assert synthesis.replay_tower_certificate(seq, "13.5", "2") == []


def test_workers_do_not_change_output():
    a = synthesis.synthesize(LOG21, 40, "log", workers=1)
    b = synthesis.synthesize(LOG21, 40, "log", workers=3)
    assert synthesis.dump_sequence(a) == synthesis.dump_sequence(b)
    ta = synthesis.synthesize_tower(300, kappa="0.5", enforce_hypothesis=False)
    tb = synthesis.synthesize_tower(300, kappa="0.5", enforce_hypothesis=False, workers=3)
    assert synthesis.dump_sequence(ta) == synthesis.dump_sequence(tb)
    assert synthesis.dump_certificate(ta) == synthesis.dump_certificate(tb)


def test_summary_counts(small_seq):
    summ = small_seq.summary()
    assert summ["unit"] + summ["in_band"] + summ["extended"] == len(small_seq)
