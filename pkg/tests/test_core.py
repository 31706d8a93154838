"""Channel primitives: parameters, probabilities, schedules, policies."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relmod import (
    IncrementSchedule,
    ParameterError,
    SystemParams,
    ThresholdPolicy,
    dpe1,
    ml_fixed_threshold,
    pe_given_0,
    pe_given_1,
    poisson_pmf,
    validate_schedule,
)
from relmod.core import ErrorReport, NumericError

REL_TOL = 1e-12
# Reference decoding point at the default parameter set (M=50, noise 15),
# cross-checked against direct summation of the Poisson mass.
ML_REF = 34.098571920535576
MISS_AT_ZERO = 0.9999927022043194
FALSE_ALARM_REF = 7.297795680649699e-06


class TestSystemParams:
    def test_derived_quantities(self):
        p = SystemParams()
        assert p.M == 50.0
        assert p.B_M == 42.0
        assert p.K == 0

    def test_storage_override_replaces_budget(self):
        p = SystemParams(storage_override=60.0)
        assert p.B_M == 60.0
        assert p.M == 50.0

    def test_with_noise_and_with_storage(self):
        p = SystemParams()
        assert p.with_noise(3.0).lam == 3.0
        assert p.with_storage(10.0).B_M == 10.0
        # originals untouched
        assert p.lam == 15.0 and p.B_M == 42.0

    def test_hitting_reads_zero_beyond_memory(self):
        p = SystemParams(hitting_probs=(0.8, 0.15, 0.05))
        assert p.K == 2
        assert p.hitting(1) == 0.15
        assert p.hitting(3) == 0.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"beta": 0.0},
            {"beta": -1.0},
            {"T": 0.0},
            {"T_M": 0.0},
            {"T_M": 25.0},
            {"T_M": 26.0},
            {"lam": 0.0},
            {"hitting_probs": ()},
            {"hitting_probs": (0.0, 0.5)},
            {"hitting_probs": (0.9, -0.1)},
            {"hitting_probs": (0.9, 0.2)},
            {"storage_override": -1.0},
        ],
    )
    def test_rejects_invalid_parameters(self, kwargs):
        with pytest.raises(ParameterError):
            SystemParams(**kwargs)


class TestPoissonPmf:
    def test_small_counts(self):
        assert poisson_pmf(0, 15.0) == pytest.approx(math.exp(-15.0), rel=REL_TOL)
        assert poisson_pmf(1, 15.0) == pytest.approx(15.0 * math.exp(-15.0), rel=REL_TOL)

    def test_recurrence(self):
        # pmf(k) * mean / (k+1) = pmf(k+1)
        for k in (0, 3, 17, 40):
            lhs = poisson_pmf(k, 22.5) * 22.5 / (k + 1)
            assert lhs == pytest.approx(poisson_pmf(k + 1, 22.5), rel=1e-10)

    def test_large_mean_stays_finite(self):
        v = poisson_pmf(10_000, 10_000.0)
        assert 0.0 < v < 1.0
        assert v == pytest.approx(1.0 / math.sqrt(2 * math.pi * 10_000.0), rel=1e-2)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ParameterError):
            poisson_pmf(-1, 5.0)
        with pytest.raises(ParameterError):
            poisson_pmf(2, 0.0)

    @given(mean=st.floats(min_value=0.1, max_value=300.0))
    @settings(max_examples=40, deadline=None)
    def test_mass_sums_to_one(self, mean):
        top = int(mean + 12.0 * math.sqrt(mean) + 40.0)
        total = sum(poisson_pmf(k, mean) for k in range(top))
        assert total == pytest.approx(1.0, abs=1e-9)


class TestDecisionProbabilities:
    def test_reference_point(self):
        assert ml_fixed_threshold(50.0, 15.0) == pytest.approx(ML_REF, rel=REL_TOL)
        assert pe_given_1(0.0, ML_REF, 15.0) == pytest.approx(MISS_AT_ZERO, rel=REL_TOL)
        assert pe_given_0(0.0, ML_REF, 15.0) == pytest.approx(
            FALSE_ALARM_REF, rel=REL_TOL
        )

    def test_complement(self):
        for x in (0.0, 10.0, 50.0):
            total = pe_given_1(x, ML_REF, 15.0) + pe_given_0(x, ML_REF, 15.0)
            assert total == pytest.approx(1.0, abs=1e-14)

    def test_threshold_between_noise_and_signal(self):
        th = ml_fixed_threshold(50.0, 15.0)
        assert 15.0 < th < 50.0

    def test_ceiling_decision_rule(self):
        # Any threshold in (n-1, n] decodes identically.
        a = pe_given_1(20.0, 34.001, 15.0)
        b = pe_given_1(20.0, 35.0, 15.0)
        c = pe_given_1(20.0, 35.001, 15.0)
        assert a == b
        assert c > b

    @given(
        x=st.floats(min_value=0.0, max_value=150.0),
        extra=st.floats(min_value=1e-6, max_value=80.0),
        lam=st.floats(min_value=0.5, max_value=40.0),
    )
    @settings(max_examples=80, deadline=None)
    def test_miss_probability_decreases_with_release(self, x, extra, lam):
        th = ml_fixed_threshold(50.0, lam)
        assert pe_given_1(x + extra, th, lam) <= pe_given_1(x, th, lam) + 1e-15

    def test_derivative_matches_finite_difference(self):
        h = 1e-6
        for x in (0.0, 5.0, 20.0, 45.0):
            fd = (pe_given_1(x + h, ML_REF, 15.0) - pe_given_1(x - h if x else x, ML_REF, 15.0)) / (
                2 * h if x else h
            )
            assert dpe1(x, ML_REF, 15.0) == pytest.approx(fd, rel=1e-5)

    def test_derivative_is_negative_mass(self):
        # |d pe / dx| equals the pmf at the decision cut minus one.
        n = math.ceil(ML_REF)
        assert dpe1(10.0, ML_REF, 15.0) == pytest.approx(
            -poisson_pmf(n - 1, 25.0), rel=REL_TOL
        )


class TestIncrementSchedule:
    def test_indexing_and_total(self):
        s = IncrementSchedule((3.0, 2.0, 1.0))
        assert s.J == 3
        assert s.delta(1) == 3.0
        assert s.delta(3) == 1.0
        assert s.delta(4) == 0.0
        assert s.delta(0) == 0.0
        assert s.total == 6.0

    def test_empty(self):
        s = IncrementSchedule(())
        assert s.J == 0
        assert s.delta(1) == 0.0
        assert s.total == 0.0


class TestThresholdPolicy:
    def test_fixed(self):
        pol = ThresholdPolicy.fixed(30.0)
        assert pol.kind == "fixed"
        assert pol.at(1) == 30.0
        assert pol.at(99) == 30.0

    def test_per_state_with_tail(self):
        pol = ThresholdPolicy.per_state((37.0, 36.0, 34.0))
        assert pol.at(1) == 37.0
        assert pol.at(2) == 36.0
        assert pol.at(3) == 34.0
        assert pol.at(10) == 34.0

    def test_rejects_bad_policies(self):
        with pytest.raises(ParameterError):
            ThresholdPolicy("fixed", (30.0, 31.0))
        with pytest.raises(ParameterError):
            ThresholdPolicy("other", (30.0,))
        with pytest.raises(ParameterError):
            ThresholdPolicy.per_state(())
        with pytest.raises(ParameterError):
            ThresholdPolicy.per_state((30.0, -1.0))
        with pytest.raises(ParameterError):
            ThresholdPolicy.fixed(30.0).at(0)


class TestErrorReport:
    def test_rejects_out_of_range_probability(self):
        with pytest.raises(NumericError):
            ErrorReport(pe_total=1.5, pe_given_0=0.0, pe_given_1=0.0)
        with pytest.raises(NumericError):
            ErrorReport(pe_total=0.1, pe_given_0=-0.2, pe_given_1=0.0)


class TestValidateSchedule:
    def test_feasible(self):
        rep = validate_schedule(IncrementSchedule((10.0, 8.0)), 42.0)
        assert rep.feasible
        assert rep.prefix_sums == (10.0, 18.0)
        assert rep.slack == (32.0, 24.0)
        assert rep.first_violation is None

    def test_budget_violation(self):
        rep = validate_schedule(IncrementSchedule((30.0, 20.0)), 42.0)
        assert not rep.feasible
        assert rep.first_violation == 2

    def test_negative_prefix_violation(self):
        rep = validate_schedule(IncrementSchedule((-1.0, 2.0)), 42.0)
        assert not rep.feasible
        assert rep.first_violation == 1

    @given(
        deltas=st.lists(
            st.floats(min_value=0.0, max_value=5.0), min_size=0, max_size=10
        )
    )
    @settings(max_examples=60, deadline=None)
    def test_nonnegative_within_budget_is_feasible(self, deltas):
        total = sum(deltas)
        rep = validate_schedule(IncrementSchedule(tuple(deltas)), total + 1.0)
        assert rep.feasible
