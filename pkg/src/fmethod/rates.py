"""Target rate functions r(n), their Moebius transforms s(n), and iota(n).

A :class:`RateSpec` is one of three kinds:

``multiplicative``
    r is determined by its values on prime powers.  With the default
    ``composition = "log"`` the spec describes log of a multiplicative
    function, so r(n) is the *sum* of r(q^a) over q^a || n and r(1) = 0.
    ``composition = "product"`` takes r itself to be multiplicative:
    r(n) is the product of r(q^a), and r(1) = 1.
``tower``
    r(n) = iota(n) * log n.
``explicit``
    a finite table r(1), ..., r(n_max).

Every evaluator takes an optional mpmath context, so the same code path
produces point values (``xreal.context``) and certified enclosures
(``xreal.interval_context``).
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

from mpmath.libmp import fzero, mpf_cmp

from . import arith, xreal

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

KINDS = ("multiplicative", "tower", "explicit")
COMPOSITIONS = ("log", "product")


class RateRangeError(ValueError):
    pass


class RateSpecError(ValueError):
    """Malformed rate configuration; message names the line and field."""


# ---------------------------------------------------------------------------
# prime-power rule expressions

_FUNCS = ("log", "exp", "sqrt")
_ALLOWED = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd,
)


def compile_rule(text: str, constants: Mapping[str, str]) -> ast.Expression:
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise RateSpecError(f"rule: cannot parse {text!r}: {exc.msg}") from None
    names = {"p", "a", *constants}
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise RateSpecError(f"rule: unsupported syntax {type(node).__name__} in {text!r}")
        if isinstance(node, ast.Call):
            if not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1):
                raise RateSpecError(f"rule: only {', '.join(_FUNCS)} of one argument are allowed")
        elif isinstance(node, ast.Name) and node.id not in names and node.id not in _FUNCS:
            raise RateSpecError(f"rule: unknown name {node.id!r} (known: p, a, {', '.join(constants) or '-'})")
        elif isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise RateSpecError(f"rule: non-numeric constant {node.value!r}")
    return tree


def _eval_node(node, ctx, env):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, ctx, env)
    if isinstance(node, ast.Constant):
        # floats go through repr so 0.1 means the decimal 0.1
        return ctx.mpf(repr(node.value)) if isinstance(node.value, float) else ctx.mpf(node.value)
    if isinstance(node, ast.Name):
        return env[node.id]
    if isinstance(node, ast.UnaryOp):
        v = _eval_node(node.operand, ctx, env)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Call):
        return getattr(ctx, node.func.id)(_eval_node(node.args[0], ctx, env))
    left, right = _eval_node(node.left, ctx, env), _eval_node(node.right, ctx, env)
    op = node.op
    if isinstance(op, ast.Add):
        return left + right
    if isinstance(op, ast.Sub):
        return left - right
    if isinstance(op, ast.Mult):
        return left * right
    if isinstance(op, ast.Div):
        return left / right
    return left**right


# ---------------------------------------------------------------------------
# RateSpec


@dataclass(frozen=True)
class RateSpec:
    kind: str
    rule: str | None = None
    constants: tuple[tuple[str, str], ...] = ()
    overrides: tuple[tuple[int, int, str], ...] = ()
    values: tuple[str, ...] = ()
    composition: str = "log"
    precision_bits: int = xreal.DEFAULT_BITS
    _tree: ast.Expression | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RateSpecError(f"kind: expected one of {KINDS}, got {self.kind!r}")
        if self.composition not in COMPOSITIONS:
            raise RateSpecError(f"composition: expected one of {COMPOSITIONS}, got {self.composition!r}")
        xreal.check_bits(self.precision_bits)
        if self.kind == "multiplicative":
            if self.rule is None and not self.overrides:
                raise RateSpecError("rule: multiplicative spec needs a rule or a table")
            if self.rule is not None:
                object.__setattr__(self, "_tree", compile_rule(self.rule, dict(self.constants)))
            for p, a, _ in self.overrides:
                if a < 1 or not arith.is_prime(p):
                    raise RateSpecError(f"table: ({p}, {a}) is not a prime power")
        if self.kind == "explicit" and not self.values:
            raise RateSpecError("values: explicit spec needs a non-empty table")
        for text in [v for _, v in self.constants] + [v for *_, v in self.overrides] + list(self.values):
            if not xreal.context(53).isfinite(xreal.context(53).mpf(text)):
                raise RateSpecError(f"value {text!r} is not finite")

    # constructors -------------------------------------------------------

    @classmethod
    def multiplicative(cls, rule: str | None = None, *, overrides=(), composition="log",
                       precision_bits=xreal.DEFAULT_BITS, **constants) -> RateSpec:
        return cls(
            kind="multiplicative",
            rule=rule,
            constants=tuple(sorted((k, str(v)) for k, v in constants.items())),
            overrides=tuple(sorted((int(p), int(a), str(v)) for p, a, v in overrides)),
            composition=composition,
            precision_bits=precision_bits,
        )

    @classmethod
    def tower(cls, precision_bits=xreal.DEFAULT_BITS) -> RateSpec:
        return cls(kind="tower", precision_bits=precision_bits)

    @classmethod
    def explicit(cls, values, precision_bits=xreal.DEFAULT_BITS) -> RateSpec:
        return cls(kind="explicit", values=tuple(str(v) for v in values), precision_bits=precision_bits)

    @property
    def n_max(self) -> int | None:
        return len(self.values) if self.kind == "explicit" else None

    def ctx(self):
        return xreal.context(self.precision_bits)

    def prime_power_value(self, p: int, a: int, ctx=None):
        ctx = ctx or self.ctx()
        for op, oa, v in self.overrides:
            if (op, oa) == (p, a):
                return ctx.mpf(v)
        if self._tree is None:
            raise RateRangeError(f"no rule or table entry for {p}^{a}")
        env = {"p": ctx.mpf(p), "a": ctx.mpf(a)}
        env.update((k, ctx.mpf(v)) for k, v in self.constants)
        return _eval_node(self._tree, ctx, env)


# ---------------------------------------------------------------------------
# iota


def _below_tower(n: int, k: int, bits: int) -> bool | None:
    """Certified test n < ^k e, by taking k-1 logarithms of n."""
    iv = xreal.interval_context(bits)
    y = iv.mpf(n)
    for _ in range(k - 1):
        lo, hi = y._mpi_
        if mpf_cmp(hi, fzero) <= 0:
            return True
        if mpf_cmp(lo, fzero) <= 0:
            return None
        y = iv.log(y)
    (lo, hi), (e_lo, e_hi) = y._mpi_, iv.e._mpi_
    if mpf_cmp(hi, e_lo) < 0:
        return True
    if mpf_cmp(lo, e_hi) >= 0:
        return False
    return None


@lru_cache(maxsize=1 << 16)
def iota(n: int) -> int:
    """Least k with n < ^k e (iterated exponential of e)."""
    if n < 1:
        raise ValueError(f"iota needs n >= 1, got {n}")
    k = 1
    while True:
        bits = 64
        while (verdict := _below_tower(n, k, bits)) is None:
            bits *= 2
            if bits > xreal.MAX_CERTIFY_BITS:
                raise ArithmeticError(f"cannot separate {n} from ^{k}e")
        if verdict:
            return k
        k += 1


# ---------------------------------------------------------------------------
# evaluation


def eval_r(spec: RateSpec, n: int, ctx=None):
    ctx = ctx or spec.ctx()
    if n < 1:
        raise RateRangeError(f"r is defined for n >= 1, got {n}")
    if spec.kind == "tower":
        return iota(n) * ctx.log(n)
    if spec.kind == "explicit":
        if n > len(spec.values):
            raise RateRangeError(f"n={n} beyond explicit table (n_max={len(spec.values)})")
        return ctx.mpf(spec.values[n - 1])
    parts = [spec.prime_power_value(p, a, ctx) for p, a in arith.factorize(n).factors]
    if spec.composition == "product":
        return ctx.fprod(parts) if parts else ctx.one
    return ctx.fsum(parts) if parts else ctx.zero


def eval_s(spec: RateSpec, n: int, ctx=None):
    """s(n) = sum over d | n of mu(d) r(n/d)."""
    ctx = ctx or spec.ctx()
    terms = []
    for d in arith.divisors(n):
        mu = arith.mobius(d)
        if mu:
            terms.append(mu * eval_r(spec, n // d, ctx))
    return ctx.fsum(terms)


@dataclass(frozen=True)
class RatePoint:
    n: int
    r_value: object
    s_value: object


def rate_points(spec: RateSpec, n_max: int, ctx=None) -> list[RatePoint]:
    """r and s for n = 1..n_max, sharing the r evaluations."""
    ctx = ctx or spec.ctx()
    r = [None] + [eval_r(spec, n, ctx) for n in range(1, n_max + 1)]
    out = []
    for n in range(1, n_max + 1):
        terms = [mu * r[n // d] for d in arith.divisors(n) if (mu := arith.mobius(d))]
        out.append(RatePoint(n, r[n], ctx.fsum(terms)))
    return out


@dataclass
class RoundtripReport:
    n_max: int
    max_residual: object
    violations: list[tuple[int, object, object]]

    @property
    def ok(self) -> bool:
        return not self.violations


def mobius_roundtrip_check(spec: RateSpec, n_max: int) -> RoundtripReport:
    """Check that summing s over divisors recovers r, for every n <= n_max."""
    ctx = spec.ctx()
    points = rate_points(spec, n_max, ctx)
    eps = ctx.ldexp(1, -(spec.precision_bits - 20))
    worst = ctx.zero
    violations = []
    for pt in points:
        divs = arith.divisors(pt.n)
        resum = ctx.fsum(points[d - 1].s_value for d in divs)
        residual = abs(resum - pt.r_value)
        scale = max(abs(points[d - 1].r_value) for d in divs)
        tol = eps * len(divs) * scale
        worst = max(worst, residual)
        if residual > tol:
            violations.append((pt.n, residual, tol))
    return RoundtripReport(n_max, worst, violations)


# ---------------------------------------------------------------------------
# TOML configuration


def _line_of(text: str, key: str) -> int | None:
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=", re.M)
    m = pat.search(text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _where(text: str, key: str) -> str:
    line = _line_of(text, key)
    return f"line {line}, field {key!r}" if line else f"field {key!r}"


def _num_text(v, text: str, key: str) -> str:
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise RateSpecError(f"{_where(text, key)}: expected a number or numeric string, got {v!r}")
    s = str(v)
    try:
        xreal.context(53).mpf(s)
    except (ValueError, TypeError):
        raise RateSpecError(f"{_where(text, key)}: {s!r} is not a number") from None
    return s


def parse_rate_spec(text: str, default_bits: int | None = None) -> RateSpec:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise RateSpecError(f"syntax error: {exc}") from None
    known = {"kind", "rule", "constants", "table", "values", "composition", "precision_bits"}
    for key in doc:
        if key not in known:
            raise RateSpecError(f"{_where(text, key)}: unknown field")
    if "kind" not in doc:
        raise RateSpecError("field 'kind': missing")
    bits = doc.get("precision_bits", default_bits or xreal.default_bits())
    if not isinstance(bits, int) or bits < xreal.MIN_BITS:
        raise RateSpecError(f"{_where(text, 'precision_bits')}: need an integer >= {xreal.MIN_BITS}")
    kind = doc["kind"]
    try:
        if kind == "tower":
            return RateSpec.tower(precision_bits=bits)
        if kind == "explicit":
            vals = doc.get("values")
            if not isinstance(vals, list) or not vals:
                raise RateSpecError(f"{_where(text, 'values')}: explicit spec needs a non-empty list")
            return RateSpec.explicit([_num_text(v, text, "values") for v in vals], precision_bits=bits)
        if kind == "multiplicative":
            constants = doc.get("constants", {})
            if not isinstance(constants, dict):
                raise RateSpecError(f"{_where(text, 'constants')}: expected a table")
            overrides = []
            for i, row in enumerate(doc.get("table", [])):
                if not isinstance(row, dict) or set(row) != {"p", "a", "value"}:
                    raise RateSpecError(f"field 'table' entry {i + 1}: need keys p, a, value")
                overrides.append((row["p"], row["a"], _num_text(row["value"], text, "value")))
            return RateSpec.multiplicative(
                doc.get("rule"),
                overrides=overrides,
                composition=doc.get("composition", "log"),
                precision_bits=bits,
                **{k: _num_text(v, text, k) for k, v in constants.items()},
            )
    except RateSpecError as exc:
        msg = str(exc)
        field_name = msg.split(":", 1)[0]
        if not msg.startswith("line") and _line_of(text, field_name):
            raise RateSpecError(f"line {_line_of(text, field_name)}, {msg}") from None
        raise
    raise RateSpecError(f"{_where(text, 'kind')}: expected one of {KINDS}, got {kind!r}")


def _toml_str(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def dump_rate_spec(spec: RateSpec) -> str:
    lines = [f"kind = {_toml_str(spec.kind)}", f"precision_bits = {spec.precision_bits}"]
    if spec.kind == "multiplicative":
        if spec.rule is not None:
            lines.append(f"rule = {_toml_str(spec.rule)}")
        lines.append(f"composition = {_toml_str(spec.composition)}")
    if spec.kind == "explicit":
        lines.append("values = [" + ", ".join(_toml_str(v) for v in spec.values) + "]")
    if spec.constants:
        lines.append("")
        lines.append("[constants]")
        lines.extend(f"{k} = {_toml_str(v)}" for k, v in spec.constants)
    for p, a, v in spec.overrides:
        lines += ["", "[[table]]", f"p = {p}", f"a = {a}", f"value = {_toml_str(v)}"]
    return "\n".join(lines) + "\n"


def load_rate_spec(path, default_bits: int | None = None) -> RateSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_rate_spec(fh.read(), default_bits)
