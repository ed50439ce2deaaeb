"""F-method sequences: automorphisms of compact groups with prescribed
periodic-point growth, built from primes in arithmetic progressions."""

from __future__ import annotations

from .arith import Factorization, factorize, is_prime, mobius, primitive_root
from .oracle import oracle_compare
from .primesearch import APIntervalQuery, Policy, find_prime_in_ap_interval, linnik_scan, psi_diff
from .rates import RateSpec, eval_r, eval_s, load_rate_spec
from .synthesis import FSequence, Mode, synthesize, synthesize_tower, verify_growth

__version__ = "0.1.0"

__all__ = [
    "APIntervalQuery",
    "FSequence",
    "Factorization",
    "Mode",
    "Policy",
    "RateSpec",
    "eval_r",
    "eval_s",
    "factorize",
    "find_prime_in_ap_interval",
    "is_prime",
    "linnik_scan",
    "load_rate_spec",
    "mobius",
    "oracle_compare",
    "primitive_root",
    "psi_diff",
    "synthesize",
    "synthesize_tower",
    "verify_growth",
]
