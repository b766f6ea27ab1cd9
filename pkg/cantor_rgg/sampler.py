"""Cantor(phi) sampling through the truncated series X = sum phi^(i-1) Z_i, and the split statistics of a sample"""

import logging
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np

from cantor_rgg.exceptions import DomainError, SamplerConsistencyError
from cantor_rgg.model import CantorParams, SampleBatch, SplitStats

logger = logging.getLogger(__name__)

# Slack, in rescaled coordinates, for points that round onto an interval endpoint
BOUNDARY_TOLERANCE = 1e-9


def make_rng(*key: int) -> np.random.Generator:
    """Counter based Philox generator keyed by a tuple of non negative integers

    Args:
        *key (int): Entropy words, e.g. (seed, replicate_id)

    Returns:
        np.random.Generator: A generator whose stream depends on nothing but the key
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))


def points_from_bits(bits: np.ndarray, phi: float) -> np.ndarray:
    """Evaluates sum_i phi^(i-1) * bit_i * (1 - phi) by Horner's rule

    Args:
        bits (np.ndarray): 0/1 array, the last axis holds Z_1, Z_2, ... in that order
        phi (float): Distribution parameter

    Returns:
        np.ndarray: float64 array with the shape of `bits` minus its last axis
    """
    bits = np.asarray(bits)
    phi = float(phi)
    points = np.zeros(bits.shape[:-1], dtype=np.float64)
    for level in range(bits.shape[-1] - 1, -1, -1):
        points = phi * points + (1 - phi) * bits[..., level]
    return points


def sample_points(params: CantorParams, shape: Union[int, Tuple[int, ...]], rng: np.random.Generator) -> np.ndarray:
    """Draws an array of i.i.d. Cantor(phi) points truncated at params.depth

    Each point differs from an exact Cantor(phi) draw by at most params.tail_bound.
    """
    shape = (shape,) if isinstance(shape, int) else tuple(shape)
    bits = rng.integers(0, 2, size=shape + (params.depth,), dtype=np.uint8)
    return points_from_bits(bits, float(params.phi))


def sample_batch(params: CantorParams, n: int, seed: int, replicate_id: int = 0) -> SampleBatch:
    """Draws n i.i.d. Cantor(phi) points

    Args:
        params (CantorParams): Distribution
        n (int): Number of points
        seed (int): Unsigned 64 bit seed
        replicate_id (int): Replicate index, selects an independent stream for the same seed

    Returns:
        SampleBatch: The points. Point i depends on (seed, replicate_id, i) only, so the batch for n is a prefix of
        the batch for any larger n.

    Raises:
        DomainError: If n < 1, seed is not an unsigned 64 bit integer or replicate_id is negative
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not 0 <= seed < 2 ** 64:
        raise DomainError(f"seed must lie in [0, 2^64), got {seed}")
    if replicate_id < 0:
        raise DomainError(f"replicate_id must be >= 0, got {replicate_id}")
    # Bits are drawn point by point from one stream
    points = sample_points(params, n, make_rng(seed, replicate_id))
    return SampleBatch(points=points, params=params, seed=seed, replicate_id=replicate_id)


def cell_index(points: np.ndarray, params: CantorParams, level: int = None) -> np.ndarray:
    """Classifies points into the level-K Cantor intervals, numbered 0..2^K - 1 from left to right

    Args:
        points (np.ndarray): Points of any shape
        params (CantorParams): Distribution
        level (int): K, defaults to params.occupancy_depth

    Returns:
        np.ndarray: int64 array of cell numbers with the shape of `points`

    Raises:
        SamplerConsistencyError: If a point lies inside a deleted gap of level <= K
    """
    level = params.occupancy_depth if level is None else level
    phi = float(params.phi)
    y = np.array(points, dtype=np.float64)
    cells = np.zeros(y.shape, dtype=np.int64)
    for depth in range(1, level + 1):
        lower = y <= phi + BOUNDARY_TOLERANCE
        upper = y >= 1 - phi - BOUNDARY_TOLERANCE
        stray = ~(lower | upper)
        if stray.any():
            point = np.asarray(points, dtype=np.float64)[stray][0]
            raise SamplerConsistencyError(point=float(point), level=depth)
        cells = 2 * cells + (~lower)
        y = np.where(lower, y / phi, (y - 1 + phi) / phi)
        np.clip(y, 0.0, 1.0, out=y)
    return cells


def split_stats(batch: SampleBatch) -> SplitStats:
    """Computes N_n, L_n, U_n, m_n, M_n and the level-K occupancy vector of a batch

    Raises:
        DomainError: If the batch is empty
        SamplerConsistencyError: If a point lies inside a deleted gap of level <= K
    """
    points = batch.points
    if points.size == 0:
        raise DomainError("split_stats needs a nonempty batch")
    params = batch.params
    cells = cell_index(points, params)
    occupancy = np.bincount(cells, minlength=params.cells)
    lower = cells < params.cells // 2
    n_lower = int(lower.sum())
    return SplitStats(
        n_lower=n_lower,
        l_max=float(points[lower].max()) if n_lower > 0 else None,
        u_min=float(points[~lower].min()) if n_lower < points.size else None,
        minimum=float(points.min()),
        maximum=float(points.max()),
        occupancy=tuple(int(count) for count in occupancy),
    )


def format_points(points: Sequence[float], style: str = "decimal") -> str:
    """Renders points one per line, lossless

    Args:
        points (Sequence[float]): Points to write
        style (str): "decimal" for 17 significant digits, "hex" for float.hex

    Returns:
        str: The text, newline terminated
    """
    if style == "decimal":
        lines = [format(float(point), ".17g") for point in points]
    elif style == "hex":
        lines = [float(point).hex() for point in points]
    else:
        raise DomainError(f'style must be "decimal" or "hex", got {style!r}')
    return "".join(line + "\n" for line in lines)


def read_points(path: Union[str, Path]) -> np.ndarray:
    """Reads a points file written by `format_points` (decimal or hex lines, blank lines ignored)"""
    values = []
    for number, line in enumerate(Path(path).read_text().splitlines(), start=1):
        text = line.strip()
        if not text:
            continue
        try:
            values.append(float.fromhex(text) if "0x" in text.lower() else float(text))
        except ValueError as e:
            raise DomainError(f"{path}:{number}: not a number: {text!r}") from e
    logger.debug("Read %d points from %s", len(values), path)
    return np.array(values, dtype=np.float64)
