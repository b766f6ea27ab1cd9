"""Acceptance checks run by `cantor-rgg verify`

Each check returns a CheckOutcome. Monte Carlo checks run at reduced replicate counts unless `full` is set,
tolerances stay the same.
"""

import logging
import math
from fractions import Fraction
from typing import Callable, Dict, List

import numpy as np
from scipy import special, stats

from cantor_rgg.experiments import (estimate_escape_probability, run_convergence, run_experiment, run_l1_rate,
                                    verify_identity)
from cantor_rgg.model import RATE_GRID, CantorParams, CheckOutcome, ExperimentConfig, Target
from cantor_rgg.output import results_csv
from cantor_rgg.params import cantor_cdf, make_params
from cantor_rgg.sampler import make_rng, sample_batch, sample_points, split_stats
from cantor_rgg.sequence import (compute_sequence, compute_sequence_numeric, min_expectation_oracle,
                                 recursion_residual, sequence_asymptotic_ratio)
from cantor_rgg.specfun import gamma, rate_constant, zeta
from cantor_rgg.threshold import connectivity_threshold, threshold_by_search

logger = logging.getLogger(__name__)

Check = Callable[..., CheckOutcome]

# Largest n at which the exact sequence is compared with the float64 one
EXACT_CHECK_N = 128
EXACT_CHECK_N_FULL = 512


def check_exact_recursion(phi: str = "1/3", **_) -> CheckOutcome:
    seq = compute_sequence(phi, 16)
    golden = [Fraction(1, 2), Fraction(3, 10), Fraction(1, 5)] if seq.phi == Fraction(1, 3) else []
    heads = list(seq.values[: len(golden)])
    residuals = [recursion_residual(seq, n) for n in range(1, 17)]
    passed = heads == golden and all(residual == 0 for residual in residuals)
    return CheckOutcome(name="exact_recursion", passed=passed, detail=f"a_1..a_3={[str(v) for v in heads]}")


def check_oracle_bracketing(**_) -> CheckOutcome:
    misses = []
    for phi in ("1/4", "1/3", "2/5"):
        seq = compute_sequence(phi, 10)
        for n in range(1, 11):
            if not min_expectation_oracle(phi, n, depth=20).contains(seq.a(n)):
                misses.append(f"phi={phi} n={n}")
    return CheckOutcome(name="oracle_bracketing", passed=not misses, detail=", ".join(misses) or "30 of 30")


def check_asymptotic_constant(phi: str = "1/3", full: bool = False, **_) -> CheckOutcome:
    """rho_2048 from the float64 recursion, after checking it against the exact one at a reachable n"""
    seq = compute_sequence_numeric(phi, 2048)
    exact_n = EXACT_CHECK_N_FULL if full else EXACT_CHECK_N
    exact = float(compute_sequence(phi, exact_n).a(exact_n))
    agreement = abs(seq.a(exact_n) / exact - 1)
    rho = sequence_asymptotic_ratio(seq, rate_constant(make_params(phi)))
    drift = abs(rho[2047] / rho[1023] - 1)
    passed = agreement <= 1e-9 and drift < 0.02 and 0.8 <= rho[2047] <= 1.2
    return CheckOutcome(
        name="asymptotic_constant",
        passed=passed,
        detail=f"rho_2048={rho[2047]:.6f} drift={drift:.2e} exact vs float64 at n={exact_n}: {agreement:.1e}",
    )


def check_special_functions(phi: str = "1/3", **_) -> CheckOutcome:
    zeta_error = abs(zeta(2.0) / (math.pi ** 2 / 6) - 1)
    gamma_error = abs(gamma(0.5) / math.sqrt(math.pi) - 1)
    constant = rate_constant(make_params(phi))
    s = constant.exponent
    independent = constant.prefactor * special.gamma(s) * special.zeta(s)
    constant_error = abs(constant.c_value / independent - 1)
    passed = zeta_error <= 1e-12 and gamma_error <= 1e-12 and constant_error <= 1e-10
    return CheckOutcome(
        name="special_functions",
        passed=passed,
        detail=f"zeta(2) {zeta_error:.1e}, gamma(1/2) {gamma_error:.1e}, C={constant.c_value!r} {constant_error:.1e}",
    )


def check_threshold_convergence(phi: str = "1/3", seed: int = 0, workers: int = 1, full: bool = False,
                                **_) -> CheckOutcome:
    n = 100_000 if full else 10_000
    config = ExperimentConfig(params=make_params(phi), n_grid=(n,), replicates=200, master_seed=seed,
                              targets=(Target.CONVERGENCE,), deltas=(0.05,))
    result = run_convergence(config, workers)
    gap = float(config.params.gap)
    median = result.row("median", n).estimate
    exceed = result.row("exceed_0.05", n).estimate
    passed = abs(median - gap) <= 0.01 and exceed <= 0.01
    return CheckOutcome(name="threshold_convergence", passed=passed,
                        detail=f"n={n} median={median:.6f} exceed={exceed:.4f}")


def check_l1_rate(phi: str = "1/3", seed: int = 0, workers: int = 1, full: bool = False, **_) -> CheckOutcome:
    config = ExperimentConfig(params=make_params(phi), n_grid=RATE_GRID, replicates=10_000 if full else 2_000,
                              master_seed=seed, targets=(Target.L1_RATE,))
    result = run_l1_rate(config, workers)
    ratios = result.select("ratio_to_2a_n")
    worst = max(abs(row.z) for row in ratios)
    slope = result.row("loglog_slope", max(RATE_GRID))
    trend_violations = sum(int(row.estimate) for row in result.select("trend_violation"))
    passed = worst <= 3 and abs(slope.estimate - slope.reference) <= 0.05 and trend_violations == 0
    return CheckOutcome(
        name="l1_rate",
        passed=passed,
        detail=f"max|z|={worst:.2f} slope={slope.estimate:.4f} vs {slope.reference:.4f} trend={trend_violations}",
    )


def check_identity(phi: str = "1/3", seed: int = 0, workers: int = 1, full: bool = False, **_) -> CheckOutcome:
    config = ExperimentConfig(params=make_params(phi), n_grid=(8,), replicates=1_000_000 if full else 100_000,
                              master_seed=seed, targets=(Target.IDENTITY,))
    row = verify_identity(config, workers).row("lhs", 8)
    return CheckOutcome(name="identity", passed=abs(row.z) <= 4,
                        detail=f"lhs={row.estimate:.6g} rhs={row.reference:.6g} z={row.z:.2f}")


def check_escape_probability(phi: str = "1/3", seed: int = 0, workers: int = 1, full: bool = False,
                             **_) -> CheckOutcome:
    config = ExperimentConfig(params=make_params(phi), n_grid=(8, 16, 32, 64),
                              replicates=100_000 if full else 10_000, master_seed=seed,
                              targets=(Target.ESCAPE_PROBABILITY,))
    result = estimate_escape_probability(config, workers)
    frequency_z = [abs(row.z) for row in result.select("escape_frequency")]
    bound_z = [row.z for row in result.select("escape_vs_bound")]
    passed = max(frequency_z) <= 3 and max(bound_z) <= 3
    return CheckOutcome(name="escape_probability", passed=passed,
                        detail=f"max|z|={max(frequency_z):.2f} max bound z={max(bound_z):.2f}")


def check_structural(phi: str = "1/3", seed: int = 0, workers: int = 1, full: bool = False, **_) -> CheckOutcome:
    params = make_params(phi)
    rng = np.random.default_rng(seed)
    mismatches = 0
    for instance in range(1000 if full else 200):
        batch = sample_batch(params, int(rng.integers(2, 200)), seed, replicate_id=instance)
        if connectivity_threshold(batch.points).r != threshold_by_search(batch.points).r:
            mismatches += 1

    config = ExperimentConfig(params=params, n_grid=(64,), replicates=100_000 if full else 10_000,
                              master_seed=seed, targets=(Target.CONVERGENCE,))
    result = run_convergence(config, workers)
    violations = sum(row.estimate for row in result.rows if row.statistic.startswith("violations_"))

    p_values = _sampler_p_values(params, seed)
    passed = mismatches == 0 and violations == 0 and min(p_values.values()) > 0.001
    summary = " ".join(f"{name}_p={value:.3g}" for name, value in p_values.items())
    return CheckOutcome(name="structural", passed=passed,
                        detail=f"mismatches={mismatches} violations={violations:g} {summary}")


def _sampler_p_values(params: CantorParams, seed: int) -> Dict[str, float]:
    """KS and chi-square p-values of the sampler against its distribution, halves, reflection and cell laws"""
    cdf = np.vectorize(lambda x: cantor_cdf(float(min(max(x, 0.0), 1.0)), params).value)
    phi = float(params.phi)
    points = sample_batch(params, 4000, seed).points
    counts = split_stats(sample_batch(params, 4000, seed, replicate_id=1)).occupancy

    n, replicates = 10, 4000
    rows = sample_points(params, (replicates, n), make_rng(seed, 2 ** 32))
    lower_counts = np.bincount((rows <= phi).sum(axis=1), minlength=n + 1)
    expected = replicates * stats.binom.pmf(np.arange(n + 1), n, 0.5)
    # tails pooled so that every expected count is at least 5
    observed = [lower_counts[:2].sum(), *lower_counts[2:9], lower_counts[9:].sum()]
    expected = [expected[:2].sum(), *expected[2:9], expected[9:].sum()]

    return {
        "ks": stats.kstest(points, cdf).pvalue,
        "ks_lower_half": stats.kstest(points[points <= phi] / phi, cdf).pvalue,
        "ks_reflected": stats.kstest(1 - points, cdf).pvalue,
        "chi2_cells": stats.chisquare(counts).pvalue,
        "chi2_lower_count": stats.chisquare(observed, expected).pvalue,
    }


def check_determinism(phi: str = "1/3", seed: int = 0, **_) -> CheckOutcome:
    config = ExperimentConfig(params=make_params(phi), n_grid=(16, 64, 256), replicates=3_000, master_seed=seed)
    serial = results_csv(run_experiment(config, 1))
    parallel = results_csv(run_experiment(config, 8))
    return CheckOutcome(name="determinism", passed=serial == parallel,
                        detail=f"{len(serial)} bytes, workers 1 and 8")


CHECKS: List[Check] = [
    check_exact_recursion,
    check_oracle_bracketing,
    check_asymptotic_constant,
    check_special_functions,
    check_threshold_convergence,
    check_l1_rate,
    check_identity,
    check_escape_probability,
    check_structural,
    check_determinism,
]


def run_checks(phi: str = "1/3", seed: int = 0, workers: int = 1, full: bool = False) -> List[CheckOutcome]:
    """Runs every check in order, a check that raises counts as failed"""
    outcomes = []
    for check in CHECKS:
        logger.info("Running %s", check.__name__)
        try:
            outcome = check(phi=phi, seed=seed, workers=workers, full=full)
        except Exception as e:
            logger.exception("%s raised", check.__name__)
            outcome = CheckOutcome(name=check.__name__.removeprefix("check_"), passed=False, detail=repr(e))
        outcomes.append(outcome)
    return outcomes
