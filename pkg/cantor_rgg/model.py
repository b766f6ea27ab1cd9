import math
import re
from datetime import datetime
from enum import Enum
from fractions import Fraction
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import (BaseModel, ConfigDict, Field, field_serializer,
                      field_validator, model_validator)

from cantor_rgg.exceptions import DomainError, ParameterDomainError

_RATIONAL = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+)\s*)?$")


def parse_rational(value: Union[str, int, Fraction]) -> Fraction:
    """Turns a "p/q" string, an int or a Fraction into an exact Fraction

    Args:
        value (Union[str, int, Fraction]): The value to parse. Floats are rejected on purpose, they are not exact.

    Returns:
        Fraction: The parsed rational

    Raises:
        DomainError: If the value is not a ratio of integers
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int) and not isinstance(value, bool):
        return Fraction(value)
    if isinstance(value, str):
        match = _RATIONAL.match(value)
        denominator = int(match.group(2) or 1) if match else 0
        if denominator:
            return Fraction(int(match.group(1)), denominator)
    raise DomainError(f'φ must be a rational "p/q" string, got {value!r}')


def format_rational(value: Fraction) -> str:
    """Serializes a Fraction as "p/q" (always with a denominator)"""
    return f"{value.numerator}/{value.denominator}"


class CantorParams(BaseModel):
    """Parameter of the Cantor(phi) distribution plus the constants derived from it

    Attributes:
        phi (Fraction): Exact ratio in the open interval (0, 1/2)
        depth (int): Truncation depth D of the series representation and of the CDF recursion

    Notes: Use `cantor_rgg.params.make_params` to construct instances, it fills in the default depth.
    Serializes as {"phi": "p/q", "depth": D}.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    phi: Fraction
    depth: int = Field(ge=1)

    @field_validator("phi", mode="before")
    @classmethod
    def _parse_phi(cls, value):
        return parse_rational(value)

    @field_validator("phi")
    @classmethod
    def _check_phi(cls, value: Fraction) -> Fraction:
        if not 0 < value < Fraction(1, 2):
            raise ParameterDomainError(format_rational(value))
        return value

    @field_serializer("phi")
    def _dump_phi(self, value: Fraction) -> str:
        return format_rational(value)

    @property
    def dim(self) -> float:
        """Hausdorff dimension d_phi = -log 2 / log phi of the generalized Cantor set"""
        return math.log(2) / (math.log(self.phi.denominator) - math.log(self.phi.numerator))

    @property
    def exponent(self) -> float:
        """Rate exponent 1/d_phi = -log2(phi)"""
        return math.log2(self.phi.denominator) - math.log2(self.phi.numerator)

    @property
    def gap(self) -> Fraction:
        """Length 1 - 2*phi of the first deleted middle interval"""
        return 1 - 2 * self.phi

    @property
    def occupancy_depth(self) -> int:
        """Least K with phi^K < (1 - phi)(1 - 2*phi)/2"""
        bound = (1 - self.phi) * (1 - 2 * self.phi) / 2
        k, power = 1, self.phi
        while power >= bound:
            k += 1
            power *= self.phi
        return k

    @property
    def cells(self) -> int:
        """Number 2^K of level-K Cantor intervals"""
        return 2 ** self.occupancy_depth

    @property
    def tail_bound(self) -> float:
        """Bound phi^D / (1 - phi) on the distance between a truncated and an exact draw"""
        return float(self.phi ** self.depth / (1 - self.phi))


class CdfValue(BaseModel):
    """Depth limited evaluation of the Cantor CDF

    Attributes:
        value (float): Approximation of F(x)
        error_bound (float): |F(x) - value| <= error_bound, zero if the evaluation is exact
    """

    model_config = ConfigDict(frozen=True)

    value: float = Field(ge=0, le=1)
    error_bound: float = Field(ge=0)


class SampleBatch(BaseModel):
    """n i.i.d. Cantor(phi) points together with the key of the stream they were drawn from

    Attributes:
        points (np.ndarray): Read-only float64 array of the points, in drawing order
        params (CantorParams): Distribution the points were drawn from
        seed (int): Seed of the stream
        replicate_id (int): Replicate index of the stream
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    points: np.ndarray
    params: CantorParams
    seed: int = Field(ge=0, lt=2 ** 64)
    replicate_id: int = Field(ge=0)

    @field_validator("points", mode="before")
    @classmethod
    def _freeze_points(cls, value):
        points = np.array(value, dtype=np.float64).reshape(-1)
        points.setflags(write=False)
        return points

    @property
    def n(self) -> int:
        return int(self.points.size)


class SplitStats(BaseModel):
    """Statistics of a sample with respect to the first split [0, phi] | [1 - phi, 1] and the level-K cells

    Attributes:
        n_lower (int): N_n, number of points in [0, phi]
        l_max (Optional[float]): L_n, largest point in [0, phi], None if there is none
        u_min (Optional[float]): U_n, smallest point in [1 - phi, 1], None if there is none
        minimum (float): m_n
        maximum (float): M_n
        occupancy (Tuple[int, ...]): Number of points in each of the 2^K level-K intervals, left to right
    """

    model_config = ConfigDict(frozen=True)

    n_lower: int = Field(ge=0)
    l_max: Optional[float] = None
    u_min: Optional[float] = None
    minimum: float
    maximum: float
    occupancy: Tuple[int, ...]

    @property
    def n(self) -> int:
        return sum(self.occupancy)

    @property
    def n_upper(self) -> int:
        return self.n - self.n_lower

    @property
    def all_cells_occupied(self) -> bool:
        """The event E_n: every level-K interval holds at least one point"""
        return min(self.occupancy) >= 1

    @property
    def cross_gap(self) -> Optional[float]:
        """U_n - L_n if both halves are occupied"""
        if self.l_max is None or self.u_min is None:
            return None
        return self.u_min - self.l_max


class ThresholdMethod(Enum):
    """How a connectivity threshold was obtained

    Values:
        - MAX_GAP: max_gap
        - GRAPH_SEARCH: graph_search
    """

    MAX_GAP = "max_gap"
    GRAPH_SEARCH = "graph_search"


class ThresholdResult(BaseModel):
    """Connectivity threshold R_n of a one dimensional point set

    Attributes:
        r (float): R_n, the widest gap between consecutive points
        gap_left (float): Left endpoint of the widest gap
        gap_right (float): Right endpoint of the widest gap
        method (ThresholdMethod): Algorithm that produced the result
    """

    model_config = ConfigDict(frozen=True)

    r: float = Field(ge=0)
    gap_left: float
    gap_right: float
    method: ThresholdMethod


class ExactSequence(BaseModel):
    """Exact values a_1..a_N of the expected minimum of n Cantor(phi) points

    Attributes:
        phi (Fraction): Distribution parameter
        values (Tuple[Fraction, ...]): a_1, ..., a_N
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    phi: Fraction
    values: Tuple[Fraction, ...]

    @property
    def n_max(self) -> int:
        return len(self.values)

    def a(self, n: int) -> Fraction:
        """Returns a_n (1-based)"""
        if not 1 <= n <= self.n_max:
            raise DomainError(f"n must lie in [1, {self.n_max}], got {n}")
        return self.values[n - 1]

    def floats(self) -> np.ndarray:
        return np.array([float(value) for value in self.values])


class NumericSequence(BaseModel):
    """Floating point values a_1..a_N, for sizes where exact rationals get too large

    Attributes:
        phi (Fraction): Distribution parameter
        values (np.ndarray): a_1, ..., a_N as float64
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    phi: Fraction
    values: np.ndarray

    @property
    def n_max(self) -> int:
        return int(self.values.size)

    def a(self, n: int) -> float:
        if not 1 <= n <= self.n_max:
            raise DomainError(f"n must lie in [1, {self.n_max}], got {n}")
        return float(self.values[n - 1])

    def floats(self) -> np.ndarray:
        return self.values


class OracleBracket(BaseModel):
    """Certified interval [lo, hi] around a_n

    Attributes:
        lo (float): Lower end
        hi (float): Upper end
    """

    model_config = ConfigDict(frozen=True)

    lo: float
    hi: float

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, value: Union[float, Fraction]) -> bool:
        return self.lo <= value <= self.hi


class RateConstant(BaseModel):
    """The constant C(phi) of a_n ~ C(phi) n^(-1/d_phi) with its factors

    Attributes:
        phi (Fraction): Distribution parameter
        c_value (float): C(phi)
        prefactor (float): (1 - phi)(1 - 2 phi) / (phi log 2)
        gamma_factor (float): Gamma(-log2 phi)
        zeta_factor (float): zeta(-log2 phi)
        exponent (float): 1/d_phi = -log2 phi
        est_error (float): Estimated absolute error of c_value
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    phi: Fraction
    c_value: float = Field(gt=0)
    prefactor: float
    gamma_factor: float
    zeta_factor: float
    exponent: float = Field(gt=1)
    est_error: float = Field(ge=0)

    @field_serializer("phi")
    def _dump_phi(self, value: Fraction) -> str:
        return format_rational(value)


class Target(Enum):
    """Quantities the experiment engine can estimate

    Values:
        - CONVERGENCE: convergence
        - L1_RATE: l1_rate
        - IDENTITY: identity
        - ESCAPE_PROBABILITY: escape_probability
        - OCCUPANCY: occupancy
    """

    CONVERGENCE = "convergence"
    L1_RATE = "l1_rate"
    IDENTITY = "identity"
    ESCAPE_PROBABILITY = "escape_probability"
    OCCUPANCY = "occupancy"


RATE_GRID = (64, 128, 256, 512, 1024, 2048)
CONVERGENCE_GRID = (100, 1_000, 10_000, 100_000)


class ExperimentConfig(BaseModel):
    """Configuration of a Monte Carlo run

    Attributes:
        params (CantorParams): Distribution to sample from
        n_grid (Tuple[int, ...]): Strictly increasing sample sizes, all >= 2
        replicates (int): Replicates per sample size, >= 2
        master_seed (int): Root of every random stream of the run
        targets (Tuple[Target, ...]): Which estimators to run
        deltas (Tuple[float, ...]): Tolerances of the convergence exceedance fractions

    Notes: If n_grid is omitted it defaults to 2^6..2^11, or to 10^2..10^5 when convergence is the only target.
    """

    model_config = ConfigDict(frozen=True)

    params: CantorParams
    n_grid: Tuple[int, ...]
    replicates: int = Field(default=1000, ge=2)
    master_seed: int = Field(default=0, ge=0, lt=2 ** 64)
    targets: Tuple[Target, ...] = tuple(Target)
    deltas: Tuple[float, ...] = (0.05, 0.01)

    @model_validator(mode="before")
    @classmethod
    def _default_grid(cls, data):
        if isinstance(data, dict) and data.get("n_grid") is None:
            targets = [Target(target) for target in data.get("targets") or tuple(Target)]
            data = {**data, "n_grid": CONVERGENCE_GRID if targets == [Target.CONVERGENCE] else RATE_GRID}
        return data

    @field_validator("n_grid")
    @classmethod
    def _check_grid(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if not value:
            raise ValueError("n_grid must not be empty")
        if min(value) < 2:
            raise ValueError("every n in n_grid must be >= 2")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("n_grid must be strictly increasing")
        return value

    @field_validator("targets")
    @classmethod
    def _check_targets(cls, value: Tuple[Target, ...]) -> Tuple[Target, ...]:
        if not value:
            raise ValueError("at least one target is required")
        return value

    @field_validator("deltas")
    @classmethod
    def _check_deltas(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if any(delta <= 0 for delta in value):
            raise ValueError("deltas must be positive")
        return value


class ResultRow(BaseModel):
    """One estimate of an experiment

    Attributes:
        target (Target): Estimator that produced the row
        statistic (str): Name of the estimated quantity
        n (int): Sample size
        estimate (float): Point estimate
        stderr (float): Standard error of the estimate, NaN if not applicable
        reference (Optional[float]): Value the estimate is compared against
        reference_exact (Optional[Fraction]): Exact form of the reference if one exists
        z (Optional[float]): (estimate - reference) / standard error
        replicates (int): Number of replicates behind the estimate
        seed (int): Master seed of the run
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    target: Target
    statistic: str
    n: int
    estimate: float
    stderr: float = math.nan
    reference: Optional[float] = None
    reference_exact: Optional[Fraction] = None
    z: Optional[float] = None
    replicates: int
    seed: int


class ExperimentManifest(BaseModel):
    """Reproducibility record attached to an ExperimentResult

    Attributes:
        config (ExperimentConfig): Echo of the configuration
        version (str): cantor_rgg version
        wall_time (float): Seconds spent, informational only
    """

    model_config = ConfigDict(frozen=True)

    config: ExperimentConfig
    version: str
    wall_time: float = 0.0


class ExperimentResult(BaseModel):
    """Rows of estimates of one or more targets

    Attributes:
        rows (Tuple[ResultRow, ...]): Estimates in target, n and statistic order
        flags (Tuple[str, ...]): Non fatal warnings, e.g. chi-square cells below 5 expected counts
        manifest (ExperimentManifest): Reproducibility record
    """

    model_config = ConfigDict(frozen=True)

    rows: Tuple[ResultRow, ...]
    flags: Tuple[str, ...] = ()
    manifest: ExperimentManifest

    def select(self, statistic: str, target: Target = None) -> List[ResultRow]:
        """Returns all rows of the given statistic, in n order"""
        return [
            row for row in self.rows
            if row.statistic == statistic and (target is None or row.target == target)
        ]

    def row(self, statistic: str, n: int, target: Target = None) -> ResultRow:
        for row in self.select(statistic, target):
            if row.n == n:
                return row
        raise KeyError(f"no row {statistic!r} for n={n}")


class RunManifest(BaseModel):
    """Manifest written next to the CSV outputs of an experiment run

    Attributes:
        config_hash (str): sha256 hex digest of the canonical config JSON
        master_seed (int): Master seed of the run
        started_at (datetime): UTC start time
        finished_at (datetime): UTC end time
        version (str): cantor_rgg version
        outputs (List[str]): File names of the CSVs, relative to the manifest
        workers (int): Number of worker processes used, results do not depend on it
        wall_time (float): Seconds spent
        config (dict): Canonical config
    """

    config_hash: str
    master_seed: int
    started_at: datetime
    finished_at: datetime
    version: str
    outputs: List[str]
    workers: int
    wall_time: float
    config: dict


class CheckOutcome(BaseModel):
    """Outcome of one acceptance check

    Attributes:
        name (str): Short name of the check
        passed (bool): Whether the check passed
        detail (str): Measured values, for the report
    """

    name: str
    passed: bool
    detail: str = ""
