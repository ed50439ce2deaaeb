"""Command-line front end.

Exit codes: 0 success, 1 config or I/O error, 2 strict synthesis found no
admissible prime, 3 verification or oracle failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

from . import diagnostics, oracle, primesearch, rates, synthesis, xreal

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_FAILED = 0, 1, 2, 3


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rate", metavar="FILE", help="rate spec (TOML)")
    p.add_argument("--n-max", type=int)
    p.add_argument("--mode", choices=[m.value for m in synthesis.Mode])
    p.add_argument("--eps")
    p.add_argument("--kappa")
    p.add_argument("--c")
    p.add_argument("--policy", choices=[x.value for x in primesearch.Policy], default="strict")
    p.add_argument("--n0", type=int, default=1)
    p.add_argument("--precision-bits", type=int)
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--cap", type=int, default=primesearch.DEFAULT_CAP, help="candidate cap per prime search")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fmethod", description="F-method sequences, periodic points and diagnostics")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synthesize", help="build a sequence (p_n, g_n)")
    _common(p)

    p = sub.add_parser("verify", help="growth report for a sequence")
    _common(p)
    p.add_argument("--sequence", metavar="FILE", required=True)

    p = sub.add_parser("oracle", help="brute-force periodic point counts")
    _common(p)
    p.add_argument("--sequence", metavar="FILE", required=True)
    p.add_argument("--M", type=int, help="number of components simulated (default: min(12, length))")

    p = sub.add_parser("linnik", help="least primes in progressions above n^kappa")
    _common(p)
    p.add_argument("--width", choices=["bertrand", "short"], default="bertrand")
    p.add_argument("--residues", choices=["all", "sample"], default="all")

    p = sub.add_parser("diagnose", help="obstruction certificates")
    _common(p)
    p.add_argument("--which", choices=["all", "blowup", "gap", "thm13"], default="all")
    p.add_argument("--search-bound", type=int, default=10**6)
    p.add_argument("--k", type=int, help="single k for the gap check (default: 1..10)")
    p.add_argument("--q-max", type=int, default=1000)
    p.add_argument("--t", default="log", help="log, sqrt_log or const:<value>")
    p.add_argument("--q1", type=int, default=101)
    p.add_argument("--q2", type=int, default=103)
    return parser


# ---------------------------------------------------------------------------
# helpers


def _env_bits() -> int:
    try:
        return xreal.default_bits()
    except ValueError as exc:
        raise ConfigError(f"{xreal.PRECISION_ENV}: {exc}") from None


def _bits(args) -> int:
    if args.precision_bits is None:
        return _env_bits()
    try:
        return xreal.check_bits(args.precision_bits)
    except ValueError as exc:
        raise ConfigError(f"--precision-bits: {exc}") from None


def _need(args, *names) -> None:
    for name in names:
        if getattr(args, name.replace("-", "_")) is None:
            raise ConfigError(f"--{name} is required for {args.command} in mode {args.mode}")


def _positive(args, name: str, strict: bool = True) -> None:
    raw = getattr(args, name.replace("-", "_"))
    try:
        value = xreal.context(64).mpf(raw)
    except (ValueError, TypeError):
        raise ConfigError(f"--{name}: {raw!r} is not a number") from None
    if value < 0 or (strict and value == 0):
        raise ConfigError(f"--{name} must be {'> 0' if strict else '>= 0'}, got {raw}")


def _load_spec(args) -> rates.RateSpec:
    if args.mode == "tower" and args.rate is None:
        return rates.RateSpec.tower(precision_bits=_bits(args))
    _need(args, "rate")
    try:
        spec = rates.load_rate_spec(args.rate, default_bits=_env_bits())
    except OSError as exc:
        raise ConfigError(f"--rate: {exc}") from None
    except rates.RateSpecError as exc:
        raise ConfigError(f"{args.rate}: {exc}") from None
    if args.precision_bits is not None:
        spec = dataclasses.replace(spec, precision_bits=_bits(args))
    return spec


def _load_sequence(path: str) -> synthesis.FSequence:
    try:
        return synthesis.parse_sequence(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"--sequence: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _write(args, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
        return
    try:
        Path(args.out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"--out: {exc}") from None


def _write_side(args, suffix: str, text: str) -> None:
    if args.out is not None:
        Path(args.out + suffix).write_text(text, encoding="utf-8")


def _csv_to_json(text: str) -> str:
    rows = list(csv.DictReader(text.splitlines()))
    return json.dumps(rows, indent=1) + "\n"


def _check_mode(args, allowed) -> None:
    if args.mode is None:
        raise ConfigError(f"--mode is required for {args.command}")
    if args.mode not in allowed:
        raise ConfigError(f"--mode {args.mode} not valid for {args.command}")


# ---------------------------------------------------------------------------
# commands


def cmd_synthesize(args) -> int:
    _check_mode(args, ("ratio", "log", "tower"))
    _need(args, "n-max")
    if args.n_max < 1:
        raise ConfigError("--n-max must be >= 1")
    if args.n0 < 1:
        raise ConfigError("--n0 must be >= 1")
    if args.mode == "tower":
        kappa, c = args.kappa or "13.5", args.c or "2"
        args.kappa, args.c = kappa, c
        _positive(args, "kappa")
        _positive(args, "c")
        try:
            seq = synthesis.synthesize_tower(
                args.n_max, kappa, c, bits=_bits(args), cap=args.cap, workers=args.workers
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        _write_side(args, ".certificate.json", synthesis.dump_certificate(seq))
    else:
        if args.mode == "ratio":
            _need(args, "eps")
            _positive(args, "eps")
        spec = _load_spec(args)
        try:
            seq = synthesis.synthesize(
                spec, args.n_max, args.mode, eps=args.eps, policy=args.policy,
                n0=args.n0, cap=args.cap, workers=args.workers,
            )
        except synthesis.SynthesisError as exc:
            print(f"synthesis failed: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    _write(args, synthesis.dump_sequence(seq))
    summary = json.dumps(seq.summary(), indent=1, sort_keys=True) + "\n"
    _write_side(args, ".summary.json", summary)
    print(summary, end="", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    _check_mode(args, ("ratio", "log", "tower"))
    if args.mode == "ratio":
        _need(args, "eps")
        _positive(args, "eps")
    if args.mode == "tower":
        _need(args, "kappa", "c")
    spec = _load_spec(args)
    seq = _load_sequence(args.sequence)
    n_max = args.n_max or len(seq)
    if not 1 <= n_max <= len(seq):
        raise ConfigError(f"--n-max must lie in 1..{len(seq)}")
    problems = synthesis.validate(seq)
    if args.mode == "tower":
        problems += synthesis.replay_tower_certificate(seq, args.kappa, args.c, spec.precision_bits)
    report = synthesis.verify_growth(
        seq, spec, args.mode, range(1, n_max + 1), eps=args.eps, kappa=args.kappa, c=args.c
    )
    _write(args, report.to_json() if args.format == "json" else report.to_csv())
    for msg in problems:
        print(f"invalid: {msg}", file=sys.stderr)
    for row in report.violations:
        print(f"budget violation at n={row.n}", file=sys.stderr)
    return EXIT_OK if report.ok and not problems else EXIT_FAILED


def cmd_oracle(args) -> int:
    seq = _load_sequence(args.sequence)
    M = args.M or min(12, len(seq))
    n_max = args.n_max or 2 * M
    try:
        report = oracle.oracle_compare(seq, M, n_max)
    except (oracle.OracleSizeError, IndexError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    text = report.to_csv()
    _write(args, _csv_to_json(text) if args.format == "json" else text)
    for m in report.uncertified:
        print(f"component {m}: multiplier order differs from {m}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_FAILED


def cmd_linnik(args) -> int:
    _need(args, "n-max", "kappa", "eps")
    if args.n_max < 2:
        raise ConfigError("--n-max must be >= 2")
    _positive(args, "kappa")
    _positive(args, "eps", strict=False)
    mode = primesearch.WidthMode(args.width, args.eps)
    rows = primesearch.linnik_scan(
        args.n_max, args.kappa, mode, residues=args.residues, cap=args.cap, bits=_bits(args), workers=args.workers
    )
    text = primesearch.scan_to_csv(rows)
    _write(args, _csv_to_json(text) if args.format == "json" else text)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    bits = _bits(args)
    certs = []
    try:
        if args.which in ("all", "blowup"):
            certs.append(diagnostics.divisor_blowup_witness(args.search_bound, bits))
        if args.which in ("all", "gap"):
            ks = [args.k] if args.k else range(1, 11)
            certs.extend(diagnostics.polynomial_gap_check(k, args.q_max) for k in ks)
        if args.which in ("all", "thm13"):
            points = diagnostics.thm13_points(args.q1, args.q2)
            table = diagnostics.t_table_from_function(args.t, points, bits)
            certs.append(diagnostics.thm13_chain_demo(table, args.q1, args.q2, bits))
    except (diagnostics.PreconditionError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    except diagnostics.NotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FAILED
    docs = [json.loads(c.to_json()) for c in certs]
    _write(args, json.dumps(docs, indent=1, sort_keys=True) + "\n")
    status = EXIT_OK
    for c in certs:
        if c.verified:
            continue
        if c.kind == "Thm13Chain":
            print("warning: chain not contradictory for this t (expected when t stays small)", file=sys.stderr)
        else:
            status = EXIT_FAILED
    return status


COMMANDS = {
    "synthesize": cmd_synthesize,
    "verify": cmd_verify,
    "oracle": cmd_oracle,
    "linnik": cmd_linnik,
    "diagnose": cmd_diagnose,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
