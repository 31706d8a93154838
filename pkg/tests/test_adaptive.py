"""State-aware thresholds and the alternating joint optimization."""

import pytest

from relmod import (
    IncrementSchedule,
    ParameterError,
    SystemParams,
    ThresholdPolicy,
    adaptive_thresholds,
    ml_fixed_threshold,
    optimize_strategy3,
    optimize_strategy4,
    pe_adaptive,
    pe_strategy1,
    solve_increments,
)

PE_S2_REF = 3.891563767556541e-06
PE_S3_REF = 1.268942794288334e-06
PE_S4_REF = 1.066250804950031e-06
THR_S3_STATE1_REF = 37.24200208307177
S4_DELTA1_REF = 12.011881773003118
S4_THR1_REF = 37.90666971878528


def default_setup():
    params = SystemParams()
    policy = ThresholdPolicy.fixed(ml_fixed_threshold(params.M, params.lam))
    return params, policy


class TestAdaptiveThresholds:
    def test_reference_first_state(self):
        params, policy = default_setup()
        schedule, _ = solve_increments(params, policy)
        adaptive = adaptive_thresholds(params, schedule)
        assert adaptive.kind == "per-state"
        assert adaptive.at(1) == pytest.approx(THR_S3_STATE1_REF, rel=1e-10)

    def test_values_decrease_with_state(self):
        # Release shrinks with run length, so the matched threshold does too.
        params, policy = default_setup()
        schedule, _ = solve_increments(params, policy)
        adaptive = adaptive_thresholds(params, schedule)
        vals = [adaptive.at(j) for j in range(1, schedule.J + 2)]
        for a, b in zip(vals, vals[1:]):
            assert a > b

    def test_tail_matches_baseline_threshold(self):
        params, policy = default_setup()
        schedule, _ = solve_increments(params, policy)
        adaptive = adaptive_thresholds(params, schedule)
        base = ml_fixed_threshold(params.M, params.lam)
        assert adaptive.at(schedule.J + 1) == pytest.approx(base, rel=1e-12)
        assert adaptive.at(schedule.J + 5) == adaptive.at(schedule.J + 1)

    def test_empty_schedule_collapses_to_fixed(self):
        params, _ = default_setup()
        adaptive = adaptive_thresholds(params, IncrementSchedule(()))
        assert adaptive.at(1) == pytest.approx(
            ml_fixed_threshold(params.M, params.lam), rel=1e-12
        )


class TestPeAdaptive:
    def test_reference_value(self):
        params, policy = default_setup()
        schedule, _ = solve_increments(params, policy)
        adaptive = adaptive_thresholds(params, schedule)
        rep = pe_adaptive(params, schedule, adaptive)
        assert rep.pe_total == pytest.approx(PE_S3_REF, rel=1e-10)

    def test_improves_on_fixed_threshold(self):
        params, policy = default_setup()
        schedule, _ = solve_increments(params, policy)
        adaptive = adaptive_thresholds(params, schedule)
        assert pe_adaptive(params, schedule, adaptive).pe_total < PE_S2_REF

    def test_rejects_fixed_policy(self):
        params, policy = default_setup()
        schedule, _ = solve_increments(params, policy)
        with pytest.raises(ParameterError):
            pe_adaptive(params, schedule, policy)


class TestOptimizeStrategy3:
    def test_reference_solution(self):
        params, _ = default_setup()
        sol = optimize_strategy3(params)
        assert sol.pe.pe_total == pytest.approx(PE_S3_REF, rel=1e-10)
        assert sol.policy.kind == "per-state"
        assert sol.schedule.total == pytest.approx(params.B_M, rel=1e-9)

    def test_schedule_matches_fixed_threshold_solver(self):
        # Stage one keeps the baseline schedule; only thresholds move.
        params, policy = default_setup()
        schedule, _ = solve_increments(params, policy)
        sol = optimize_strategy3(params)
        for j in range(1, schedule.J + 1):
            assert sol.schedule.delta(j) == pytest.approx(schedule.delta(j), rel=1e-12)


class TestOptimizeStrategy4:
    def test_reference_solution(self):
        params, _ = default_setup()
        sol = optimize_strategy4(params)
        assert sol.pe.pe_total == pytest.approx(PE_S4_REF, rel=1e-10)
        assert sol.converged
        assert sol.iterations == 3
        assert sol.schedule.delta(1) == pytest.approx(S4_DELTA1_REF, rel=1e-8)
        assert sol.policy.at(1) == pytest.approx(S4_THR1_REF, rel=1e-8)

    def test_budget_exhausted(self):
        params, _ = default_setup()
        sol = optimize_strategy4(params)
        assert sol.schedule.total == pytest.approx(params.B_M, rel=1e-9)

    def test_ordering_chain(self):
        params, _ = default_setup()
        pe3 = optimize_strategy3(params).pe.pe_total
        pe4 = optimize_strategy4(params).pe.pe_total
        assert pe4 <= pe3 <= PE_S2_REF <= pe_strategy1(params).pe_total

    def test_ordering_holds_across_noise(self):
        for lam in (3.0, 7.0, 11.0):
            params = SystemParams(lam=lam)
            pe3 = optimize_strategy3(params).pe.pe_total
            pe4 = optimize_strategy4(params).pe.pe_total
            assert pe4 <= pe3

    def test_zero_budget_degenerates_for_both(self):
        params, _ = default_setup()
        empty = params.with_storage(0.0)
        base = pe_strategy1(empty).pe_total
        sol3 = optimize_strategy3(empty)
        sol4 = optimize_strategy4(empty)
        assert sol3.pe.pe_total == pytest.approx(base, rel=1e-12)
        assert sol4.pe.pe_total == pytest.approx(base, rel=1e-12)
        assert sol4.iterations == 1
        assert sol4.converged
