"""Gamma and Riemann zeta on the real half lines needed for the rate constant C(phi)"""

import math
from fractions import Fraction
from typing import Tuple, Union

import numpy as np

from cantor_rgg.exceptions import DomainError
from cantor_rgg.model import CantorParams, RateConstant

# Lanczos approximation with g = 7 and 9 terms
LANCZOS_G = 7
LANCZOS_COEFFICIENTS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
GAMMA_MAX_ARGUMENT = 171.6
GAMMA_REL_ERROR = 1e-13

# Borwein's acceleration of the alternating eta series, truncation error below 3 / (3 + sqrt 8)^24 < 1e-17
BORWEIN_TERMS = 24
ZETA_REL_ERROR = 1e-14

_SQRT_2PI = math.sqrt(2 * math.pi)


def _borwein_weights(terms: int) -> Tuple[float, ...]:
    """Weights (d_n - d_k) / d_n with d_k = n sum_{i<=k} (n + i - 1)! 4^i / ((n - i)! (2i)!)"""
    partial, cumulative = Fraction(0), []
    for i in range(terms + 1):
        partial += Fraction(
            terms * math.factorial(terms + i - 1) * 4 ** i,
            math.factorial(terms - i) * math.factorial(2 * i),
        )
        cumulative.append(partial)
    total = cumulative[-1]
    return tuple(float((total - value) / total) for value in cumulative[:terms])


_ETA_WEIGHTS = np.array(_borwein_weights(BORWEIN_TERMS))
_ETA_SIGNS = np.array([(-1.0) ** k for k in range(BORWEIN_TERMS)])
_ETA_BASES = np.arange(1, BORWEIN_TERMS + 1, dtype=np.float64)


def gamma(x: float) -> float:
    """Gamma function for 0 < x < 171.6, relative error below 1e-13

    Raises:
        DomainError: If x is outside (0, 171.6)
    """
    if not 0 < x < GAMMA_MAX_ARGUMENT:
        raise DomainError(f"gamma is implemented on (0, {GAMMA_MAX_ARGUMENT}), got {x}")
    if x < 0.5:
        # reflection
        return math.pi / (math.sin(math.pi * x) * gamma(1 - x))
    x -= 1
    series = LANCZOS_COEFFICIENTS[0]
    for index, coefficient in enumerate(LANCZOS_COEFFICIENTS[1:], start=1):
        series += coefficient / (x + index)
    t = x + LANCZOS_G + 0.5
    # t^(x + 1/2) is split in two halves, it overflows on its own for x near the upper end
    half_power = t ** ((x + 0.5) / 2)
    return _SQRT_2PI * half_power * math.exp(-t) * half_power * series


def zeta(s: float) -> float:
    """Riemann zeta for real s > 1, relative error below 1e-14

    zeta(s) = eta(s) / (1 - 2^(1-s)) with the eta series summed by Borwein's algorithm.

    Raises:
        DomainError: If s <= 1
    """
    if not s > 1:
        raise DomainError(f"zeta is implemented for s > 1, got {s}")
    eta = float(np.sum(_ETA_SIGNS * _ETA_WEIGHTS * _ETA_BASES ** -s))
    return eta / -math.expm1((1 - s) * math.log(2))


def rate_constant(params: CantorParams) -> RateConstant:
    """Evaluates C(phi) = (1 - phi)(1 - 2 phi) / (phi log 2) * Gamma(-log2 phi) * zeta(-log2 phi)

    Args:
        params (CantorParams): Distribution

    Returns:
        RateConstant: C(phi) with its factors, the exponent 1/d_phi = -log2 phi and a first order error estimate
    """
    phi = params.phi
    exponent = params.exponent
    prefactor = float((1 - phi) * (1 - 2 * phi) / phi) / math.log(2)
    gamma_factor = gamma(exponent)
    zeta_factor = zeta(exponent)
    c_value = prefactor * gamma_factor * zeta_factor
    return RateConstant(
        phi=phi,
        c_value=c_value,
        prefactor=prefactor,
        gamma_factor=gamma_factor,
        zeta_factor=zeta_factor,
        exponent=exponent,
        est_error=c_value * (GAMMA_REL_ERROR + ZETA_REL_ERROR),
    )


def asymptotic_mean_minimum(constant: RateConstant, n: Union[int, np.ndarray]) -> Union[float, np.ndarray]:
    """C(phi) n^(-1/d_phi), the leading term of a_n"""
    return constant.c_value * np.asarray(n, dtype=np.float64) ** -constant.exponent
