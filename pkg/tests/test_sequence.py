import logging
from fractions import Fraction

import pytest

from cantor_rgg import sequence
from cantor_rgg.exceptions import ConsistencyError, DomainError, ParameterDomainError
from cantor_rgg.params import make_params
from cantor_rgg.sampler import make_rng, sample_points
from cantor_rgg.sequence import (compute_sequence, compute_sequence_numeric, expected_maximum, identity_rhs,
                                 min_expectation_oracle, mixture_residual, recursion_residual,
                                 sequence_asymptotic_ratio)
from cantor_rgg.specfun import rate_constant
from tests import BaseTestClass


class TestExactSequence(BaseTestClass):
    def test_golden_values(self):
        seq = compute_sequence("1/3", 16)
        assert seq.n_max == 16
        assert seq.values[:4] == (Fraction(1, 2), Fraction(3, 10), Fraction(1, 5), Fraction(33, 230))

    @pytest.mark.parametrize("phi", ["1/4", "1/3", "2/5", "3/7"])
    def test_first_term_is_one_half(self, phi):
        assert compute_sequence(phi, 1).a(1) == Fraction(1, 2)

    def test_residuals_vanish(self, any_params):
        seq = compute_sequence(any_params.phi, 16)
        for n in range(1, 17):
            assert recursion_residual(seq, n) == 0
            assert mixture_residual(seq, n) == 0

    def test_decreasing_and_positive(self, any_params):
        values = compute_sequence(any_params.phi, 40).values
        assert all(value > 0 for value in values)
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_expected_maximum(self):
        seq = compute_sequence("1/3", 5)
        assert expected_maximum(seq, 2) == Fraction(7, 10)

    def test_monte_carlo_minimum(self, params):
        seq = compute_sequence(params.phi, 8)
        minima = sample_points(params, (20000, 8), make_rng(21)).min(axis=1)
        assert minima.mean() == pytest.approx(float(seq.a(8)), rel=0.05)

    def test_invalid_arguments(self):
        with pytest.raises(DomainError):
            compute_sequence("1/3", 0)
        with pytest.raises(ParameterDomainError):
            compute_sequence("1/2", 4)
        with pytest.raises(DomainError):
            compute_sequence("1/3", 3).a(4)

    def test_ceiling_warning(self, monkeypatch, caplog):
        monkeypatch.setattr(sequence, "EXACT_N_MAX", 4)
        with caplog.at_level(logging.WARNING, logger="cantor_rgg.sequence"):
            compute_sequence("1/3", 5)
        assert "ceiling" in caplog.text


class TestNumericSequence(BaseTestClass):
    def test_agrees_with_exact(self, any_params):
        exact = compute_sequence(any_params.phi, 64)
        numeric = compute_sequence_numeric(any_params.phi, 64)
        assert numeric.n_max == 64
        assert numeric.floats() == pytest.approx(exact.floats(), rel=1e-12)

    def test_read_only(self):
        numeric = compute_sequence_numeric("1/3", 4)
        with pytest.raises(ValueError):
            numeric.values[0] = 1.0

    def test_invalid_arguments(self):
        with pytest.raises(DomainError):
            compute_sequence_numeric("1/3", 0)
        with pytest.raises(ParameterDomainError):
            compute_sequence_numeric("0", 4)


class TestIdentity(BaseTestClass):
    def test_closed_form_and_positive_sum_agree(self, any_params):
        exact = compute_sequence(any_params.phi, 30)
        numeric = compute_sequence_numeric(any_params.phi, 30)
        for n in range(2, 31):
            rhs = identity_rhs(exact, n)
            assert isinstance(rhs, Fraction)
            assert identity_rhs(numeric, n) == pytest.approx(float(rhs), rel=1e-12)

    def test_single_point(self):
        assert identity_rhs(compute_sequence("1/3", 2), 1) == 0
        assert identity_rhs(compute_sequence_numeric("1/3", 2), 1) == 0.0

    def test_beyond_sequence(self):
        with pytest.raises(DomainError):
            identity_rhs(compute_sequence_numeric("1/3", 4), 5)
        with pytest.raises(DomainError):
            identity_rhs(compute_sequence("1/3", 4), 5)


class TestOracle(BaseTestClass):
    @pytest.mark.parametrize("phi", ["1/4", "1/3", "2/5"])
    def test_brackets_exact_values(self, phi):
        seq = compute_sequence(phi, 10)
        for n in range(1, 11):
            bracket = min_expectation_oracle(phi, n, depth=20)
            assert bracket.contains(seq.a(n)), f"n={n}: {bracket} misses {float(seq.a(n))}"
            assert bracket.width < 1e-6

    def test_chunked_grid_sum(self, monkeypatch):
        whole = min_expectation_oracle("1/3", 5, depth=14)
        monkeypatch.setattr(sequence, "ORACLE_CHUNK", 1000)
        chunked = min_expectation_oracle("1/3", 5, depth=14)
        assert chunked.lo == pytest.approx(whole.lo, rel=1e-13)
        assert chunked.hi == pytest.approx(whole.hi, rel=1e-13)

    def test_deeper_is_narrower(self):
        assert min_expectation_oracle("1/3", 3, depth=12).width > min_expectation_oracle("1/3", 3, depth=16).width

    @pytest.mark.parametrize("n, depth", [(0, 20), (3, 9), (3, 27)])
    def test_invalid_arguments(self, n, depth):
        with pytest.raises(DomainError):
            min_expectation_oracle("1/3", n, depth=depth)


class TestAsymptoticRatio(BaseTestClass):
    def test_ratio_approaches_one(self, params):
        seq = compute_sequence_numeric(params.phi, 2048)
        rho = sequence_asymptotic_ratio(seq, rate_constant(params))
        assert len(rho) == 2048
        assert abs(rho[2047] / rho[1023] - 1) < 0.02
        assert 0.8 <= rho[2047] <= 1.2

    def test_phi_mismatch(self, params):
        with pytest.raises(ConsistencyError):
            sequence_asymptotic_ratio(compute_sequence("1/4", 4), rate_constant(params))

    @pytest.mark.slow
    def test_exact_agrees_with_numeric_at_512(self, params):
        exact = compute_sequence(params.phi, 512)
        numeric = compute_sequence_numeric(params.phi, 2048)
        assert float(exact.a(512)) == pytest.approx(numeric.a(512), rel=1e-9)
        exact_rho = sequence_asymptotic_ratio(exact, rate_constant(params))
        assert exact_rho[511] == pytest.approx(sequence_asymptotic_ratio(numeric, rate_constant(params))[511], rel=1e-9)

    def test_make_params_phi_matches(self):
        assert rate_constant(make_params("2/5")).phi == Fraction(2, 5)
