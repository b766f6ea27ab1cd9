"""The expected minimum a_n = E[min(X_1..X_n)] of Cantor(phi) samples

The recursion (2^n - 2 phi) a_n = 1 - phi + phi * sum_{k<n} C(n, k) a_k is solved exactly with rationals, and
in floating point for sizes where the exact denominators grow too large.
"""

import logging
import math
from fractions import Fraction
from typing import List, Union

import numpy as np
from scipy.stats import binom

from cantor_rgg.exceptions import ConsistencyError, DomainError, ParameterDomainError
from cantor_rgg.model import (ExactSequence, NumericSequence, OracleBracket, RateConstant,
                              format_rational, parse_rational)

logger = logging.getLogger(__name__)

# Desk scale ceiling of the exact recursion, larger n_max is computed but warned about. Denominators grow
# quadratically in bits and the cost per doubling of n is about 35x, so n = 512 takes a minute and n = 2048 a day.
EXACT_N_MAX = 2048
# Largest oracle depth; the residual grid holds 2^depth + 1 points, summed in chunks of ORACLE_CHUNK
ORACLE_MAX_DEPTH = 26
ORACLE_CHUNK = 2 ** 20
ORACLE_SLACK = 1e-12

Sequence = Union[ExactSequence, NumericSequence]


def _checked_phi(phi: Union[str, int, Fraction]) -> Fraction:
    value = parse_rational(phi)
    if not 0 < value < Fraction(1, 2):
        raise ParameterDomainError(format_rational(value))
    return value


def compute_sequence(phi: Union[str, int, Fraction], n_max: int) -> ExactSequence:
    """Computes a_1..a_n_max as exact rationals

    With phi = p/q the recursion is cleared of denominators to
    a_n = ((q - p) + p * sum_{k<n} C(n, k) a_k) / (q 2^n - 2p). Binomials are built row by row with integers.

    Args:
        phi (Union[str, int, Fraction]): Distribution parameter in (0, 1/2)
        n_max (int): Number of terms

    Returns:
        ExactSequence: The exact values, a_1 = 1/2 for every phi

    Raises:
        DomainError: If n_max < 1
        ParameterDomainError: If phi is not inside (0, 1/2)
    """
    phi = _checked_phi(phi)
    if n_max < 1:
        raise DomainError(f"n_max must be >= 1, got {n_max}")
    if n_max > EXACT_N_MAX:
        logger.warning(
            "Exact sequence up to n=%d exceeds the desk scale ceiling %d, expect a runtime of days", n_max, EXACT_N_MAX
        )
    p, q = phi.numerator, phi.denominator
    values: List[Fraction] = []
    row = [1]
    for n in range(1, n_max + 1):
        row = [1] + [row[k - 1] + row[k] for k in range(1, n)] + [1]
        weighted = sum((row[k] * values[k - 1] for k in range(1, n)), Fraction(0))
        values.append(((q - p) + p * weighted) / (q * 2 ** n - 2 * p))
        if n % 256 == 0:
            logger.debug("Exact sequence reached n=%d", n)
    return ExactSequence(phi=phi, values=tuple(values))


def compute_sequence_numeric(phi: Union[str, int, Fraction], n_max: int) -> NumericSequence:
    """Computes a_1..a_n_max in float64

    Uses the positive term form a_n = (phi * sum_{k<n} b(k; n, 1/2) a_k + (1 - phi) 2^-n) / (1 - 2 phi 2^-n) with
    the binomial pmf b. Every term is positive, so rounding errors stay relative and do not accumulate.

    Raises:
        DomainError: If n_max < 1
        ParameterDomainError: If phi is not inside (0, 1/2)
    """
    phi = _checked_phi(phi)
    if n_max < 1:
        raise DomainError(f"n_max must be >= 1, got {n_max}")
    phi_value = float(phi)
    values = np.empty(n_max, dtype=np.float64)
    for n in range(1, n_max + 1):
        weights = binom.pmf(np.arange(1, n), n, 0.5)
        tail = 0.5 ** n
        values[n - 1] = (phi_value * float(weights @ values[: n - 1]) + (1 - phi_value) * tail) / (
            1 - 2 * phi_value * tail
        )
    values.setflags(write=False)
    return NumericSequence(phi=phi, values=values)


def sequence_asymptotic_ratio(seq: Sequence, constant: RateConstant) -> List[float]:
    """Returns rho_n = a_n * n^(1/d_phi) / C(phi) for n = 1..n_max

    Raises:
        ConsistencyError: If sequence and constant belong to different phi
    """
    if seq.phi != constant.phi:
        raise ConsistencyError(
            f"sequence is for phi={format_rational(seq.phi)}, constant for phi={format_rational(constant.phi)}"
        )
    n = np.arange(1, seq.n_max + 1, dtype=np.float64)
    return (seq.floats() * n ** constant.exponent / constant.c_value).tolist()


def recursion_residual(seq: ExactSequence, n: int) -> Fraction:
    """(2^n - 2 phi) a_n - phi sum_{k<n} C(n, k) a_k - (1 - phi), zero for a correct sequence"""
    phi = seq.phi
    weighted = sum((math.comb(n, k) * seq.a(k) for k in range(1, n)), Fraction(0))
    return (2 ** n - 2 * phi) * seq.a(n) - phi * weighted - (1 - phi)


def mixture_residual(seq: ExactSequence, n: int) -> Fraction:
    """Residual of the min order statistic mixture

    m_n is phi * m_k with probability C(n, k) / 2^n for k = 1..n and phi * m_n + 1 - phi with probability 2^-n,
    so a_n = phi 2^-n sum_{k<=n} C(n, k) a_k + 2^-n (phi a_n + 1 - phi).
    """
    phi = seq.phi
    weighted = sum((math.comb(n, k) * seq.a(k) for k in range(1, n + 1)), Fraction(0))
    mixture = phi * weighted / 2 ** n + (phi * seq.a(n) + 1 - phi) / 2 ** n
    return seq.a(n) - mixture


def identity_rhs(seq: Sequence, n: int) -> Union[Fraction, float]:
    """E[(U_n - L_n - (1 - 2 phi)) 1{1 <= N_n <= n-1}] = 2^-(n-1) ((2^n - 2 phi) a_n - (1 - phi))

    Exact for an ExactSequence. For a NumericSequence the equal positive sum 2 phi sum_{k<n} b(k; n, 1/2) a_k
    is used, which avoids the cancellation of the closed form.
    """
    if n == 1:
        return Fraction(0) if isinstance(seq, ExactSequence) else 0.0
    if isinstance(seq, ExactSequence):
        return ((2 ** n - 2 * seq.phi) * seq.a(n) - (1 - seq.phi)) / 2 ** (n - 1)
    if n > seq.n_max:
        raise DomainError(f"n must lie in [1, {seq.n_max}], got {n}")
    weights = binom.pmf(np.arange(1, n), n, 0.5)
    return 2 * float(seq.phi) * float(weights @ seq.values[: n - 1])


def expected_maximum(seq: Sequence, n: int) -> Union[Fraction, float]:
    """E[M_n] = 1 - a_n, since 1 - X has the law of X"""
    return 1 - seq.a(n)


def _power_sum(start: int, stop: int, step: int, scale: float, n: int) -> float:
    """sum of (c / scale)^n over c in range(start, stop, step), ORACLE_CHUNK terms at a time"""
    partial_sums = []
    for first in range(start, stop, ORACLE_CHUNK * step):
        grid = np.arange(first, min(first + ORACLE_CHUNK * step, stop), step, dtype=np.float64) / scale
        partial_sums.append(float(np.sum(grid ** n)))
    return math.fsum(partial_sums)


def min_expectation_oracle(phi: Union[str, int, Fraction], n: int, depth: int = 20) -> OracleBracket:
    """Brackets a_n = integral_0^1 (1 - F(x))^n dx independently of the recursion

    F is constant on every deleted gap: the 2^j gaps of level j have length phi^j (1 - 2 phi) and F takes the
    values (2i + 1) / 2^(j+1) there, so they contribute in closed form. On each of the 2^depth residual intervals
    F lies between c / 2^depth and (c + 1) / 2^depth, which bounds the remainder from both sides.

    Args:
        phi (Union[str, int, Fraction]): Distribution parameter in (0, 1/2)
        n (int): Sample size, small n (<= 20) keeps the bracket meaningful
        depth (int): Number of gap levels integrated exactly, 10..26

    Returns:
        OracleBracket: Interval of width about phi^depth containing a_n

    Raises:
        DomainError: If n < 1 or depth is outside [10, 26]
    """
    phi = _checked_phi(phi)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not 10 <= depth <= ORACLE_MAX_DEPTH:
        raise DomainError(f"depth must lie in [10, {ORACLE_MAX_DEPTH}], got {depth}")
    phi_value = float(phi)

    pieces = []
    for level in range(depth):
        # 1 - F over the gaps of this level runs through the odd multiples of 2^-(level+1)
        odd = _power_sum(1, 2 ** (level + 1), 2, float(2 ** (level + 1)), n)
        pieces.append(phi_value ** level * (1 - 2 * phi_value) * odd)
    gaps = math.fsum(pieces)

    powers = _power_sum(0, 2 ** depth + 1, 1, float(2 ** depth), n)
    residual_length = phi_value ** depth
    lower = gaps + residual_length * (powers - 1.0)
    upper = gaps + residual_length * powers
    return OracleBracket(lo=lower * (1 - ORACLE_SLACK), hi=upper * (1 + ORACLE_SLACK))
