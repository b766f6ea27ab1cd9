"""Monte Carlo engine that checks the threshold limit, the L1 rate and the identities behind them

Replicates for a sample size n are simulated in blocks of a fixed number of rows. Block b is drawn from the
stream keyed by (master_seed, n, b) and replicate r is row r % B of block r // B. The block size depends on n
and the number of level-K cells only, so results are bitwise identical for every worker count.
"""

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from fractions import Fraction
from typing import Callable, Dict, Iterator, List, NamedTuple, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from cantor_rgg import __version__
from cantor_rgg.exceptions import ConsistencyError, DomainError
from cantor_rgg.model import (CantorParams, ExactSequence, ExperimentConfig, ExperimentManifest,
                              ExperimentResult, NumericSequence, ResultRow, SampleBatch, Target,
                              format_rational)
from cantor_rgg.sampler import cell_index, make_rng, sample_points
from cantor_rgg.sequence import compute_sequence, compute_sequence_numeric, identity_rhs
from cantor_rgg.specfun import asymptotic_mean_minimum, rate_constant

logger = logging.getLogger(__name__)

BLOCK_POINTS = 2 ** 20
BLOCK_CELLS = 2 ** 22
# Identity references are exact rationals up to this n, floats beyond
IDENTITY_EXACT_N_MAX = 64
# Float slack for the per replicate inequalities
INEQUALITY_TOLERANCE = 1e-12

Runner = Callable


class ReplicateArrays(NamedTuple):
    """Per replicate statistics of one or more blocks, in replicate order

    r, l_max, u_min, n_lower, minimum, maximum, occupied, chi2 and cell_total hold one entry per replicate, l_max
    and u_min are NaN where the half is empty. cell_sums holds the pooled count of every level-K cell.
    """

    r: np.ndarray
    l_max: np.ndarray
    u_min: np.ndarray
    n_lower: np.ndarray
    minimum: np.ndarray
    maximum: np.ndarray
    occupied: np.ndarray
    chi2: np.ndarray
    cell_total: np.ndarray
    cell_sums: np.ndarray


def block_size(n: int, cells: int) -> int:
    """Replicates per block for sample size n and 2^K cells"""
    return max(1, min(BLOCK_POINTS // n, BLOCK_CELLS // cells))


def simulate_block(params: CantorParams, n: int, master_seed: int, block_index: int, rows: int) -> ReplicateArrays:
    """Simulates `rows` replicates of n points drawn from the stream (master_seed, n, block_index)"""
    points = sample_points(params, (rows, n), make_rng(master_seed, n, block_index))
    cells = cell_index(points, params)
    lower = cells < params.cells // 2
    n_lower = lower.sum(axis=1)

    l_max = np.where(lower, points, -np.inf).max(axis=1)
    l_max[n_lower == 0] = np.nan
    u_min = np.where(lower, np.inf, points).min(axis=1)
    u_min[n_lower == n] = np.nan

    ordered = np.sort(points, axis=1)
    r = np.diff(ordered, axis=1).max(axis=1) if n > 1 else np.zeros(rows)

    offsets = params.cells * np.arange(rows)[:, None]
    counts = np.bincount((cells + offsets).ravel(), minlength=rows * params.cells).reshape(rows, params.cells)
    expected = n / params.cells
    return ReplicateArrays(
        r=r,
        l_max=l_max,
        u_min=u_min,
        n_lower=n_lower,
        minimum=ordered[:, 0],
        maximum=ordered[:, -1],
        occupied=(counts > 0).all(axis=1),
        chi2=((counts - expected) ** 2 / expected).sum(axis=1),
        cell_total=counts.sum(axis=1),
        cell_sums=counts.sum(axis=0),
    )


def _simulate_task(task: Tuple[CantorParams, int, int, int, int]) -> ReplicateArrays:
    return simulate_block(*task)


def _merge(blocks: Sequence[ReplicateArrays]) -> ReplicateArrays:
    merged = {
        field: np.concatenate([getattr(block, field) for block in blocks])
        for field in ReplicateArrays._fields
        if field != "cell_sums"
    }
    merged["cell_sums"] = np.sum([block.cell_sums for block in blocks], axis=0)
    return ReplicateArrays(**merged)


def resolve_workers(workers: int) -> int:
    """Maps 0 to the number of CPUs"""
    if workers < 0:
        raise DomainError(f"workers must be >= 0, got {workers}")
    return workers or os.cpu_count() or 1


@contextmanager
def _block_runner(workers: int) -> Iterator[Runner]:
    workers = resolve_workers(workers)
    if workers == 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield pool.map


class _Simulator:
    """Simulates and caches the replicate arrays of every n for one config"""

    def __init__(self, config: ExperimentConfig, runner: Runner):
        self.config = config
        self.runner = runner
        self._cache: Dict[int, ReplicateArrays] = {}

    def arrays(self, n: int) -> ReplicateArrays:
        if n not in self._cache:
            config = self.config
            size = block_size(n, config.params.cells)
            replicates = config.replicates
            tasks = [
                (config.params, n, config.master_seed, block, min(size, replicates - block * size))
                for block in range(math.ceil(replicates / size))
            ]
            logger.debug("Simulating n=%d in %d blocks of up to %d replicates", n, len(tasks), size)
            self._cache[n] = _merge(list(self.runner(_simulate_task, tasks)))
        return self._cache[n]


def replicate_batch(config: ExperimentConfig, n: int, replicate_id: int) -> SampleBatch:
    """Reconstructs the points of one replicate of an experiment

    Raises:
        DomainError: If replicate_id is not below config.replicates
    """
    if not 0 <= replicate_id < config.replicates:
        raise DomainError(f"replicate_id must lie in [0, {config.replicates}), got {replicate_id}")
    size = block_size(n, config.params.cells)
    block, row = divmod(replicate_id, size)
    rows = min(size, config.replicates - block * size)
    points = sample_points(config.params, (rows, n), make_rng(config.master_seed, n, block))[row]
    return SampleBatch(points=points, params=config.params, seed=config.master_seed, replicate_id=replicate_id)


def _z(estimate: float, reference: float, stderr: float) -> float:
    if stderr > 0 and math.isfinite(stderr):
        return (estimate - reference) / stderr
    if estimate == reference:
        return 0.0
    return math.copysign(math.inf, estimate - reference)


def _mean_and_stderr(values: np.ndarray) -> Tuple[float, float]:
    return float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(values.size))


def _row(config: ExperimentConfig, target: Target, statistic: str, n: int, estimate: float, **fields) -> ResultRow:
    return ResultRow(
        target=target,
        statistic=statistic,
        n=n,
        estimate=float(estimate),
        replicates=config.replicates,
        seed=config.master_seed,
        **fields,
    )


def _compared(config, target, statistic, n, estimate, stderr, reference, exact: Fraction = None) -> ResultRow:
    return _row(
        config, target, statistic, n, estimate,
        stderr=stderr, reference=float(reference), reference_exact=exact, z=_z(estimate, float(reference), stderr),
    )


def _result(config: ExperimentConfig, rows: List[ResultRow], flags: List[str], started: float) -> ExperimentResult:
    manifest = ExperimentManifest(config=config, version=__version__, wall_time=time.perf_counter() - started)
    return ExperimentResult(rows=tuple(rows), flags=tuple(flags), manifest=manifest)


def _require(config: ExperimentConfig, target: Target) -> None:
    if target not in config.targets:
        raise DomainError(f"config does not request the target {target.value!r}")


def _cross_term(arrays: ReplicateArrays, n: int, gap: float) -> np.ndarray:
    """(U_n - L_n - (1 - 2 phi)) 1{1 <= N_n <= n-1}, zero where a half is empty"""
    both = (arrays.n_lower >= 1) & (arrays.n_lower <= n - 1)
    return np.where(both, arrays.u_min - arrays.l_max - gap, 0.0)


def _convergence_rows(config: ExperimentConfig, simulator: _Simulator) -> Tuple[List[ResultRow], List[str]]:
    params = config.params
    gap, phi = float(params.gap), float(params.phi)
    k = params.occupancy_depth
    target = Target.CONVERGENCE
    rows = []
    for n in config.n_grid:
        logger.info("convergence: n=%d, %d replicates", n, config.replicates)
        arrays = simulator.arrays(n)
        r = arrays.r
        mean, stderr = _mean_and_stderr(r)
        rows.append(_compared(config, target, "mean", n, mean, stderr, gap, params.gap))
        rows.append(_row(config, target, "median", n, np.median(r), reference=gap, reference_exact=params.gap))
        rows.append(_row(config, target, "q05", n, np.quantile(r, 0.05), reference=gap))
        rows.append(_row(config, target, "q95", n, np.quantile(r, 0.95), reference=gap))
        for delta in config.deltas:
            fraction = float(np.mean(np.abs(r - gap) > delta))
            rows.append(
                _row(config, target, f"exceed_{delta:g}", n, fraction,
                     stderr=math.sqrt(fraction * (1 - fraction) / r.size))
            )

        on_event = arrays.occupied
        one_side = (arrays.n_lower == 0) | (arrays.n_lower == n)
        violations = {
            # R_n > 1 - 2 phi on E_n
            "violations_below_limit": on_event & (r < gap - INEQUALITY_TOLERANCE),
            # R_n = U_n - L_n on E_n
            "violations_cross_gap": on_event & (r != arrays.u_min - arrays.l_max),
            # R_n <= phi if every point lies in one half
            "violations_one_side": one_side & (r > phi + INEQUALITY_TOLERANCE),
            # E_n implies K <= N_n <= n - K
            "violations_split_band": on_event & ((arrays.n_lower < k) | (arrays.n_lower > n - k)),
        }
        for statistic, mask in violations.items():
            count = int(mask.sum())
            if count:
                logger.warning("convergence: n=%d has %d %s", n, count, statistic)
            rows.append(_row(config, target, statistic, n, count, reference=0.0))
        rows.append(_row(config, target, "event_frequency", n, np.mean(on_event)))
    return rows, []


def _l1_rows(
    config: ExperimentConfig, simulator: _Simulator, sequence: Union[ExactSequence, NumericSequence] = None
) -> Tuple[List[ResultRow], List[str]]:
    params = config.params
    if sequence is None:
        sequence = compute_sequence_numeric(params.phi, max(config.n_grid))
    if sequence.phi != params.phi:
        raise ConsistencyError(
            f"sequence is for phi={format_rational(sequence.phi)}, config for phi={format_rational(params.phi)}"
        )
    constant = rate_constant(params)
    gap = float(params.gap)
    target = Target.L1_RATE
    rows, flags, means, stderrs = [], [], [], []
    for n in config.n_grid:
        logger.info("l1_rate: n=%d, %d replicates", n, config.replicates)
        arrays = simulator.arrays(n)
        deviation = np.abs(arrays.r - gap)
        mean, stderr = _mean_and_stderr(deviation)
        if means:
            # E|R_n - (1 - 2 phi)| is nonincreasing in n up to 2 combined standard errors
            increase = mean - means[-1]
            violated = int(increase > 2 * math.hypot(stderr, stderrs[-1]))
            if violated:
                logger.warning("l1_rate: mean deviation grows by %.3g from the previous grid point to n=%d",
                               increase, n)
                flags.append(f"n={n}: mean deviation above the previous grid point by more than 2 standard errors")
            rows.append(_row(config, target, "trend_violation", n, violated, reference=0.0))
        means.append(mean)
        stderrs.append(stderr)

        asymptotic = float(asymptotic_mean_minimum(constant, n))
        if n <= sequence.n_max:
            a_n = float(sequence.a(n))
            exact = 2 * sequence.a(n) if isinstance(sequence, ExactSequence) else None
            rows.append(_compared(config, target, "mean_abs_deviation", n, mean, stderr, 2 * a_n, exact))
            rows.append(_compared(config, target, "ratio_to_2a_n", n, mean / (2 * a_n), stderr / (2 * a_n), 1.0))
            rows.append(_compared(config, target, "ratio_to_a_n", n, mean / a_n, stderr / a_n, 2.0))
        else:
            flags.append(f"n={n}: beyond the sequence, compared with the asymptotic form only")
            rows.append(_compared(config, target, "mean_abs_deviation", n, mean, stderr, 2 * asymptotic))
        rows.append(
            _compared(config, target, "ratio_to_asymptotic", n, mean / (2 * asymptotic), stderr / (2 * asymptotic), 1.0)
        )

        cross = _cross_term(arrays, n, gap)
        escaped = ~arrays.occupied
        main, main_stderr = _mean_and_stderr(cross)
        if n <= sequence.n_max:
            rhs = identity_rhs(sequence, n)
            rows.append(_compared(config, target, "main_term", n, main, main_stderr, rhs,
                                  rhs if isinstance(rhs, Fraction) else None))
        else:
            rows.append(_row(config, target, "main_term", n, main, stderr=main_stderr))
        correction, correction_stderr = _mean_and_stderr(-cross * escaped)
        rows.append(_row(config, target, "correction_term", n, correction, stderr=correction_stderr))
        escape, escape_stderr = _mean_and_stderr(deviation * escaped)
        rows.append(_row(config, target, "escape_term", n, escape, stderr=escape_stderr))

    if len(config.n_grid) >= 2 and min(means) > 0:
        fit = stats.linregress(np.log(config.n_grid), np.log(means))
        rows.append(_compared(config, target, "loglog_slope", max(config.n_grid), fit.slope, fit.stderr,
                              -constant.exponent))
    else:
        flags.append("log-log slope needs at least two grid points with a positive mean deviation")
    return rows, flags


def _identity_rows(
    config: ExperimentConfig, simulator: _Simulator, sequence: Union[ExactSequence, NumericSequence] = None
) -> Tuple[List[ResultRow], List[str]]:
    params = config.params
    largest = max(config.n_grid)
    if sequence is None:
        sequence = (
            compute_sequence(params.phi, largest) if largest <= IDENTITY_EXACT_N_MAX
            else compute_sequence_numeric(params.phi, largest)
        )
    if sequence.phi != params.phi:
        raise ConsistencyError(
            f"sequence is for phi={format_rational(sequence.phi)}, config for phi={format_rational(params.phi)}"
        )
    if sequence.n_max < largest:
        raise ConsistencyError(f"sequence ends at n={sequence.n_max}, the grid needs n={largest}")
    gap = float(params.gap)
    rows = []
    for n in config.n_grid:
        logger.info("identity: n=%d, %d replicates", n, config.replicates)
        mean, stderr = _mean_and_stderr(_cross_term(simulator.arrays(n), n, gap))
        rhs = identity_rhs(sequence, n)
        rows.append(_compared(config, Target.IDENTITY, "lhs", n, mean, stderr, rhs,
                              rhs if isinstance(rhs, Fraction) else None))
    return rows, []


def inclusion_exclusion_escape(cells: int, n: int) -> Fraction:
    """Exact probability that some of `cells` equally likely cells stays empty after n draws"""
    return sum(
        ((-1) ** (j + 1) * math.comb(cells, j) * Fraction(cells - j, cells) ** n for j in range(1, cells + 1)),
        Fraction(0),
    )


def union_bound(cells: int, n: int) -> float:
    """2^K (1 - 2^-K)^n = 2^K exp(-alpha_K n)"""
    return cells * (1 - 1 / cells) ** n


def _escape_rows(config: ExperimentConfig, simulator: _Simulator) -> Tuple[List[ResultRow], List[str]]:
    cells = config.params.cells
    target = Target.ESCAPE_PROBABILITY
    rows = []
    for n in config.n_grid:
        logger.info("escape_probability: n=%d, %d replicates", n, config.replicates)
        frequency = float(np.mean(~simulator.arrays(n).occupied))
        exact = inclusion_exclusion_escape(cells, n)
        probability = float(exact)
        # z-scores use the variance of the reference proportion, so a zero frequency still gets a scale
        reference_stderr = math.sqrt(probability * (1 - probability) / config.replicates)
        sample_stderr = math.sqrt(frequency * (1 - frequency) / config.replicates)
        bound = union_bound(cells, n)
        rows.append(_row(config, target, "escape_frequency", n, frequency, stderr=sample_stderr,
                         reference=probability, reference_exact=exact,
                         z=_z(frequency, probability, reference_stderr)))
        rows.append(_row(config, target, "escape_vs_bound", n, frequency, stderr=sample_stderr, reference=bound,
                         z=_z(frequency, bound, reference_stderr)))
    return rows, []


def _occupancy_rows(config: ExperimentConfig, simulator: _Simulator) -> Tuple[List[ResultRow], List[str]]:
    cells = config.params.cells
    target = Target.OCCUPANCY
    replicates = config.replicates
    rows, flags = [], []
    for n in config.n_grid:
        logger.info("occupancy: n=%d, %d replicates", n, replicates)
        arrays = simulator.arrays(n)
        if n / cells < 5:
            logger.warning("occupancy: n=%d gives %.2f expected points per cell, chi-square is approximate",
                           n, n / cells)
            flags.append(f"n={n}: expected cell count < 5")

        pooled = stats.chisquare(arrays.cell_sums)
        dof = cells - 1
        rows.append(_compared(config, target, "pooled_chi2", n, pooled.statistic, math.sqrt(2 * dof), dof))
        rows.append(_row(config, target, "pooled_chi2_p_value", n, pooled.pvalue))

        summed = float(np.sum(arrays.chi2))
        summed_dof = replicates * dof
        rows.append(_compared(config, target, "summed_chi2", n, summed, math.sqrt(2 * summed_dof), summed_dof))
        rows.append(_row(config, target, "summed_chi2_p_value", n, stats.chi2.sf(summed, summed_dof)))

        lower_fraction = float(np.mean(arrays.n_lower / n))
        rows.append(_compared(config, target, "lower_fraction", n, lower_fraction,
                              1 / (2 * math.sqrt(n * replicates)), 0.5))
        rows.append(_row(config, target, "count_sum_ok", n, np.mean(arrays.cell_total == n), reference=1.0))
    return rows, flags


_TARGET_ROWS = {
    Target.CONVERGENCE: _convergence_rows,
    Target.L1_RATE: _l1_rows,
    Target.IDENTITY: _identity_rows,
    Target.ESCAPE_PROBABILITY: _escape_rows,
    Target.OCCUPANCY: _occupancy_rows,
}


def _run_targets(config: ExperimentConfig, targets: Sequence[Target], workers: int, **extra) -> ExperimentResult:
    started = time.perf_counter()
    rows, flags = [], []
    with _block_runner(workers) as runner:
        simulator = _Simulator(config, runner)
        for target in targets:
            produce = _TARGET_ROWS[target]
            target_rows, target_flags = produce(config, simulator, **extra) if extra else produce(config, simulator)
            rows += target_rows
            flags += target_flags
    return _result(config, rows, flags, started)


def run_convergence(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Distribution of R_n along the grid: mean, median, 5%/95% quantiles and exceedance fractions

    Also counts, per replicate, violations of R_n > 1 - 2 phi and R_n = U_n - L_n on E_n, of R_n <= phi when all
    points fall into one half, and of E_n implying K <= N_n <= n - K. Every count must be zero.
    """
    _require(config, Target.CONVERGENCE)
    return _run_targets(config, [Target.CONVERGENCE], workers)


def run_l1_rate(
    config: ExperimentConfig, workers: int = 1, sequence: Union[ExactSequence, NumericSequence] = None
) -> ExperimentResult:
    """Estimates E|R_n - (1 - 2 phi)| and compares it with 2 a_n and 2 C(phi) n^(-1/d_phi)

    Args:
        config (ExperimentConfig): Config with the l1_rate target
        workers (int): Worker processes, 0 for one per CPU
        sequence (Union[ExactSequence, NumericSequence]): a_n for the same phi, computed up to max(n_grid) in
            float64 if omitted. Sizes beyond it are compared with the asymptotic form only.

    Returns:
        ExperimentResult: Per n the mean deviation and its ratios, the three terms of its decomposition and a
        log-log slope row

    Raises:
        ConsistencyError: If the sequence belongs to another phi
    """
    _require(config, Target.L1_RATE)
    return _run_targets(config, [Target.L1_RATE], workers, sequence=sequence)


def verify_identity(
    config: ExperimentConfig, workers: int = 1, sequence: Union[ExactSequence, NumericSequence] = None
) -> ExperimentResult:
    """Monte Carlo check of E[(U_n - L_n - (1 - 2 phi)) 1{1 <= N_n <= n-1}] = 2^-(n-1) ((2^n - 2 phi) a_n - (1 - phi))

    The right side is exact when max(n_grid) <= IDENTITY_EXACT_N_MAX.

    Raises:
        ConsistencyError: If the sequence belongs to another phi or is too short
    """
    _require(config, Target.IDENTITY)
    return _run_targets(config, [Target.IDENTITY], workers, sequence=sequence)


def estimate_escape_probability(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Frequency of E_n^c against its exact inclusion-exclusion value and the bound 2^K exp(-alpha_K n)"""
    _require(config, Target.ESCAPE_PROBABILITY)
    return _run_targets(config, [Target.ESCAPE_PROBABILITY], workers)


def occupancy_test(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Chi-square tests of the level-K cell counts against the uniform multinomial, and N_n / n against 1/2

    Sizes with fewer than 5 expected points per cell are flagged, not rejected.
    """
    _require(config, Target.OCCUPANCY)
    return _run_targets(config, [Target.OCCUPANCY], workers)


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Runs every target of the config on shared simulations, rows in the order of config.targets"""
    return _run_targets(config, list(config.targets), workers)
