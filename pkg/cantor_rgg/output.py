"""Plot ready text renderings: experiment CSV, sequence CSV and the canonical config JSON"""

import csv
import hashlib
import io
import json
import math
from fractions import Fraction
from typing import Optional, Union

from cantor_rgg.model import ExactSequence, ExperimentConfig, ExperimentResult, NumericSequence, format_rational
from cantor_rgg.params import make_params
from cantor_rgg.sequence import sequence_asymptotic_ratio
from cantor_rgg.specfun import rate_constant

RESULT_COLUMNS = ("target", "statistic", "n", "estimate", "stderr", "reference", "z", "replicates", "seed")
SEQUENCE_COLUMNS = ("n", "a_n", "a_n_float", "rho")


def format_value(value: Union[None, int, float, Fraction]) -> str:
    """Rationals as "p/q", floats with 17 significant digits, None as an empty field"""
    if value is None:
        return ""
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, int):
        return str(value)
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".17g")


def _reference(exact: Optional[Fraction], approximate: Optional[float]) -> Union[None, float, Fraction]:
    return exact if exact is not None else approximate


def results_csv(result: ExperimentResult) -> str:
    """Renders the rows of a result in the fixed column order"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for row in result.rows:
        writer.writerow([
            row.target.value,
            row.statistic,
            row.n,
            format_value(row.estimate),
            format_value(row.stderr),
            format_value(_reference(row.reference_exact, row.reference)),
            format_value(row.z),
            row.replicates,
            row.seed,
        ])
    return buffer.getvalue()


def sequence_csv(seq: Union[ExactSequence, NumericSequence]) -> str:
    """Renders n, a_n, a_n as float and rho_n = a_n n^(1/d_phi) / C(phi)"""
    rho = sequence_asymptotic_ratio(seq, rate_constant(make_params(seq.phi)))
    floats = seq.floats()
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SEQUENCE_COLUMNS)
    for n in range(1, seq.n_max + 1):
        writer.writerow([n, format_value(seq.a(n)), format_value(floats[n - 1]), format_value(rho[n - 1])])
    return buffer.getvalue()


def config_document(config: ExperimentConfig) -> dict:
    """Flat config document, the format read by `cli.parse_config`"""
    return {
        "phi": format_rational(config.params.phi),
        "depth": config.params.depth,
        "n_grid": list(config.n_grid),
        "replicates": config.replicates,
        "master_seed": config.master_seed,
        "targets": [target.value for target in config.targets],
        "deltas": list(config.deltas),
    }


def emit_config(config: ExperimentConfig) -> str:
    """Canonical JSON of a config, sorted keys and no insignificant whitespace"""
    return json.dumps(config_document(config), sort_keys=True, separators=(",", ":"))


def config_hash(config: ExperimentConfig) -> str:
    """sha256 hex digest of the canonical config JSON"""
    return hashlib.sha256(emit_config(config).encode("utf-8")).hexdigest()
