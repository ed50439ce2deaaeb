"""Brute-force dynamics: simulate T on a truncated product and count.

Nothing in here uses the divisor-product formula for F_n.  Component m is
the additive group of F_{p_m} with T_m(x) = lambda_m * x, where
lambda_m = g_m^((p_m - 1)/m); fixed points of T^n are found by applying T
n times to every element.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass

from . import arith
from .synthesis import FSequence

DEFAULT_COMPONENT_CAP = 10**6
FULL_PRODUCT_CAP = 10**6


class OracleSizeError(ValueError):
    pass


@dataclass(frozen=True)
class Component:
    m: int
    p: int
    lam: int
    order: int  # multiplicative order of lam mod p (1 for the one-point group)

    @property
    def certified(self) -> bool:
        return self.p == 1 or self.order == self.m

    def step(self, x: int) -> int:
        return 0 if self.p == 1 else self.lam * x % self.p


@dataclass(frozen=True)
class TruncatedSystem:
    components: tuple[Component, ...]

    def __len__(self) -> int:
        return len(self.components)

    def component(self, m: int) -> Component:
        return self.components[m - 1]

    @property
    def size(self) -> int:
        return math.prod(c.p for c in self.components)


def build_truncated(seq: FSequence, M: int, cap: int = DEFAULT_COMPONENT_CAP) -> TruncatedSystem:
    """Components 1..M of the automorphism built from ``seq``.

    Multipliers whose order is not exactly m are kept (``certified`` is
    False) so that callers can watch the counts go wrong.
    """
    if not 1 <= M <= len(seq):
        raise IndexError(f"M={M} outside sequence of length {len(seq)}")
    comps = []
    for m in range(1, M + 1):
        e = seq[m]
        if e.p == 1:
            comps.append(Component(m, 1, 0, 1))
            continue
        if e.p > cap:
            raise OracleSizeError(f"p_{m} = {e.p} exceeds the oracle cap {cap}")
        if (e.p - 1) % m:
            raise ValueError(f"p_{m} = {e.p} is not 1 mod {m}")
        lam = pow(e.g, (e.p - 1) // m, e.p)
        order = arith.multiplicative_order(lam, e.p) if lam else 0
        comps.append(Component(m, e.p, lam, order))
    return TruncatedSystem(tuple(comps))


def _power_multiplier(c: Component, n: int) -> int:
    mult = 1
    for _ in range(n):
        mult = mult * c.lam % c.p
    return mult


def component_fixed_points(c: Component, n: int) -> int:
    if c.p == 1:
        return 1
    mult = _power_multiplier(c, n)
    return sum(1 for x in range(c.p) if mult * x % c.p == x)


def brute_fixed_points(sys: TruncatedSystem, n: int) -> int:
    """#{x : T^n x = x}, counted per component and multiplied."""
    out = 1
    for c in sys.components:
        out *= component_fixed_points(c, n)
    return out


def brute_fixed_points_full(sys: TruncatedSystem, n: int, cap: int = FULL_PRODUCT_CAP) -> int:
    """Same count, enumerating the whole product group (small systems only)."""
    if sys.size > cap:
        raise OracleSizeError(f"product group has {sys.size} elements, cap is {cap}")
    live = [c for c in sys.components if c.p != 1]
    count = 0
    for point in itertools.product(*(range(c.p) for c in live)):
        y = point
        for _ in range(n):
            y = tuple(c.step(v) for c, v in zip(live, y))
        count += y == point
    return count


def least_period(sys: TruncatedSystem, m: int, x: int) -> int:
    c = sys.component(m)
    if not 0 <= x < max(c.p, 1):
        raise ValueError(f"x={x} outside F_{c.p}")
    y, k = c.step(x), 1
    while y != x:
        y, k = c.step(y), k + 1
    return k


REPORT_HEADER = ["n", "formula_count", "brute_count", "match"]


@dataclass(frozen=True)
class OracleRow:
    n: int
    formula_count: int
    brute_count: int

    @property
    def match(self) -> bool:
        return self.formula_count == self.brute_count


@dataclass
class OracleReport:
    M: int
    rows: list[OracleRow]
    uncertified: list[int]

    @property
    def mismatches(self) -> list[OracleRow]:
        return [row for row in self.rows if not row.match]

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for row in self.rows:
            w.writerow([row.n, row.formula_count, row.brute_count, "true" if row.match else "false"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, M: int = 0) -> OracleReport:
        reader = csv.reader(io.StringIO(text))
        if next(reader) != REPORT_HEADER:
            raise ValueError("unexpected oracle report header")
        return cls(M, [OracleRow(int(n), int(f), int(b)) for n, f, b, _ in reader], [])


def oracle_compare(seq: FSequence, M: int, n_max: int, cap: int = DEFAULT_COMPONENT_CAP) -> OracleReport:
    """Brute-force counts against prod_{d | n, d <= M} p_d for n <= n_max."""
    sys = build_truncated(seq, M, cap)
    rows = []
    for n in range(1, n_max + 1):
        formula = math.prod(seq.p(d) for d in range(1, M + 1) if n % d == 0)
        rows.append(OracleRow(n, formula, brute_fixed_points(sys, n)))
    return OracleReport(M, rows, [c.m for c in sys.components if not c.certified])
