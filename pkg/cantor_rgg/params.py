"""Distribution parameter, derived constants and the Cantor CDF oracle"""

import math
from fractions import Fraction
from typing import List, Tuple, Union

from cantor_rgg.exceptions import DomainError, ParameterDomainError
from cantor_rgg.model import CantorParams, CdfValue, format_rational, parse_rational


__all__ = [
    "cantor_cdf",
    "cantor_intervals",
    "default_depth",
    "make_params",
    "parse_rational",
    "theoretical_limit",
]


def default_depth(phi: Fraction) -> int:
    """Smallest D whose series tail phi^D / (1 - phi) lies below 2^-53

    Args:
        phi (Fraction): Distribution parameter in (0, 1/2)

    Returns:
        int: The truncation depth, 34 for phi = 1/3
    """
    value = float(phi)
    return max(1, math.ceil((-53 * math.log(2) + math.log(1 - value)) / math.log(value)))


def make_params(phi: Union[str, int, Fraction], depth: int = None) -> CantorParams:
    """Validates phi and builds the CantorParams

    Args:
        phi (Union[str, int, Fraction]): Exact parameter, e.g. "1/3" or Fraction(1, 3)
        depth (int): Truncation depth D, defaults to `default_depth(phi)`

    Returns:
        CantorParams: Params with all derived constants available

    Raises:
        ParameterDomainError: If phi is not inside the open interval (0, 1/2)
        DomainError: If phi is not a ratio of integers or depth < 1
    """
    value = parse_rational(phi)
    if not 0 < value < Fraction(1, 2):
        raise ParameterDomainError(format_rational(value))
    if depth is None:
        depth = default_depth(value)
    if depth < 1:
        raise DomainError(f"depth must be a positive integer, got {depth}")
    return CantorParams(phi=value, depth=depth)


def theoretical_limit(params: CantorParams) -> Fraction:
    """Almost sure limit 1 - 2*phi of the connectivity threshold"""
    return params.gap


def cantor_intervals(params: CantorParams, level: int) -> List[Tuple[Fraction, Fraction]]:
    """Returns the 2^level closed intervals left after `level` deletion steps, left to right"""
    if level < 0:
        raise DomainError(f"level must be >= 0, got {level}")
    intervals = [(Fraction(0), Fraction(1))]
    for _ in range(level):
        refined = []
        for left, right in intervals:
            length = (right - left) * params.phi
            refined += [(left, left + length), (right - length, right)]
        intervals = refined
    return intervals


def cantor_cdf(x: Union[float, Fraction], params: CantorParams, depth: int = None) -> CdfValue:
    """Evaluates the Cantor(phi) distribution function by its self-similar recursion

    F(x) = F(x/phi)/2 on [0, phi], F = 1/2 on [phi, 1 - phi] and F(x) = 1/2 + F((x - 1 + phi)/phi)/2 on
    [1 - phi, 1]. The recursion runs in exact rational arithmetic (floats convert exactly), so the only error
    is the unresolved remainder after `depth` levels.

    Args:
        x (Union[float, Fraction]): Point in [0, 1]
        params (CantorParams): Distribution
        depth (int): Recursion depth, defaults to params.depth

    Returns:
        CdfValue: Value and error bound. The bound is 0 if the recursion ends in a deleted interval or at an
        endpoint, else 2^-(depth + 1).

    Raises:
        DomainError: If x is outside [0, 1]
    """
    depth = params.depth if depth is None else depth
    if depth < 1:
        raise DomainError(f"depth must be a positive integer, got {depth}")
    y = Fraction(x)
    if not 0 <= y <= 1:
        raise DomainError(f"x must lie in [0, 1], got {x!r}")

    phi = params.phi
    acc, weight = Fraction(0), Fraction(1)
    for _ in range(depth):
        if y == 0:
            return CdfValue(value=float(acc), error_bound=0.0)
        if y == 1:
            return CdfValue(value=float(acc + weight), error_bound=0.0)
        weight /= 2
        if y <= phi:
            y = y / phi
        elif y >= 1 - phi:
            acc += weight
            y = (y - 1 + phi) / phi
        else:
            return CdfValue(value=float(acc + weight), error_bound=0.0)

    if y == 0:
        return CdfValue(value=float(acc), error_bound=0.0)
    if y == 1:
        return CdfValue(value=float(acc + weight), error_bound=0.0)
    return CdfValue(value=float(acc + weight / 2), error_bound=float(weight / 2))
