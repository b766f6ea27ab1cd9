"""Connectivity threshold R_n of the geometric graph on points of the line"""

from typing import Sequence, Union

import numpy as np

from cantor_rgg.exceptions import ConsistencyError, DomainError
from cantor_rgg.model import ThresholdMethod, ThresholdResult
from cantor_rgg.union_find import UnionFind

Points = Union[Sequence[float], np.ndarray]


def _sorted_points(points: Points) -> np.ndarray:
    values = np.sort(np.asarray(points, dtype=np.float64).reshape(-1))
    if values.size == 0:
        raise DomainError("the point set must not be empty")
    if not np.isfinite(values).all():
        raise DomainError("points must be finite")
    return values


def connectivity_threshold(points: Points) -> ThresholdResult:
    """Computes R_n = inf{r > 0 | G(V_n, r) is connected}

    On the line every L_p norm is the absolute difference and the infimum is the widest gap between consecutive
    points. A single point is connected for every r > 0, so R_1 = 0.

    Args:
        points (Points): Nonempty point set, duplicates allowed

    Returns:
        ThresholdResult: r and the endpoints of the leftmost widest gap

    Raises:
        DomainError: If the point set is empty
    """
    values = _sorted_points(points)
    if values.size == 1:
        only = float(values[0])
        return ThresholdResult(r=0.0, gap_left=only, gap_right=only, method=ThresholdMethod.MAX_GAP)
    gaps = np.diff(values)
    widest = int(np.argmax(gaps))
    return ThresholdResult(
        r=float(gaps[widest]),
        gap_left=float(values[widest]),
        gap_right=float(values[widest + 1]),
        method=ThresholdMethod.MAX_GAP,
    )


def is_connected(points: Points, r: float) -> bool:
    """Checks whether the graph joining points at distance <= r has a single component

    Edges between sorted neighbours are enough: every longer edge spans a chain of neighbour edges that are
    at most as long, so both edge sets produce the same components.

    Raises:
        DomainError: If r <= 0 or the point set is empty
    """
    if not r > 0:
        raise DomainError(f"r must be positive, got {r}")
    values = _sorted_points(points)
    components = UnionFind(values.size)
    for left in np.flatnonzero(np.diff(values) <= r).tolist():
        components.union(left, left + 1)
    return components.components == 1


def threshold_by_search(points: Points) -> ThresholdResult:
    """Finds R_n as the switching point of `is_connected` over the distinct gap values

    Independent of `connectivity_threshold`: the candidates are searched with the union-find connectivity test,
    and the answer is checked to be connected while the next smaller candidate is not.

    Raises:
        DomainError: If fewer than two points are given
    """
    values = _sorted_points(points)
    if values.size < 2:
        raise DomainError(f"threshold_by_search needs at least 2 points, got {values.size}")
    gaps = np.diff(values)
    candidates = np.unique(gaps[gaps > 0])
    if candidates.size == 0:
        return ThresholdResult(
            r=0.0, gap_left=float(values[0]), gap_right=float(values[1]), method=ThresholdMethod.GRAPH_SEARCH
        )

    low, high = 0, candidates.size - 1
    while low < high:
        middle = (low + high) // 2
        if is_connected(values, float(candidates[middle])):
            high = middle
        else:
            low = middle + 1
    r = float(candidates[low])
    if not is_connected(values, r) or (low > 0 and is_connected(values, float(candidates[low - 1]))):
        raise ConsistencyError(f"connectivity does not switch at r={r!r}")

    widest = int(np.flatnonzero(gaps == r)[0])
    return ThresholdResult(
        r=r,
        gap_left=float(values[widest]),
        gap_right=float(values[widest + 1]),
        method=ThresholdMethod.GRAPH_SEARCH,
    )
