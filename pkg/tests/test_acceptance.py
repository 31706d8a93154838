"""Acceptance gate: fourteen release criteria, one verdict line each.

Run with -s to watch the verdict lines stream; without it they surface in
captured output for any failing criterion.
"""

import time

import numpy as np
import pytest

from relmod import (
    IncrementSchedule,
    SystemParams,
    ThresholdPolicy,
    boundary_closed_form,
    boundary_sequence,
    brute_force_schedule,
    dpe1,
    increment_count_bound,
    ml_fixed_threshold,
    optimize_strategy3,
    optimize_strategy4,
    pe_bounds,
    pe_schedule,
    pe_strategy1,
    solve_increments,
)
from relmod.cli import main
from relmod.experiments import build_config, run_sweep
from relmod.isi import (
    exact_pe_isi,
    isi_adaptive_policy,
    strategy5_exact_pe_1isi,
    strategy5_pe_bounds_1isi,
    suboptimal_increments_1isi,
    suboptimal_increments_2isi,
    two_symbol_chain,
)
from relmod.simulate import make_strategy, simulate

KKT_REL_TOL = 1e-9
BUDGET_REL_TOL = 1e-9
CLOSED_FORM_TOL = 1e-6
GRID_STEP = 0.05
BOUND_GAP_MAX = 0.10
ORDER_MARGIN_MIN = 1e-6
R2_MIN = 0.95
CHAIN_TOL = 1e-12
REDUCTION_TOL = 1e-12
MC_SLOTS = 1_000_000
MC_SEED = 20240
MC_SIGMA_FACTOR = 4.0
SOLVE_TIME_MAX = 1.0
GRID_TIME_MAX = 300.0
MC_TIME_MAX = 60.0

LAM_SET = (3.0, 7.0, 11.0, 15.0)


def verdict(num, label, ok, detail=""):
    tag = "PASS" if ok else "FAIL"
    suffix = f" [{detail}]" if detail else ""
    print(f"criterion {num:02d} {label}: {tag}{suffix}")
    return ok


def fixed_policy(params):
    return ThresholdPolicy.fixed(ml_fixed_threshold(params.M, params.lam))


class TestAcceptance:
    def test_01_optimality_conditions(self):
        ok = True
        worst = 0.0
        for lam in LAM_SET:
            params = SystemParams(lam=lam)
            policy = fixed_policy(params)
            start = time.perf_counter()
            schedule, _ = solve_increments(params, policy)
            elapsed = time.perf_counter() - start
            ok &= elapsed < SOLVE_TIME_MAX
            ok &= abs(schedule.total - params.B_M) <= BUDGET_REL_TOL * params.B_M
            ok &= all(a > b for a, b in zip(schedule.deltas, schedule.deltas[1:]))
            vals = [
                2.0**-j
                * abs(dpe1(params.M + schedule.delta(j), policy.at(j), params.lam))
                for j in range(1, schedule.J + 1)
            ]
            spread = max(vals) / min(vals) - 1.0
            worst = max(worst, spread)
            ok &= spread <= 10.0 * KKT_REL_TOL
        assert verdict(1, "stationarity + budget", ok, f"ratio spread {worst:.2e}")

    def test_02_landmark_sandwich(self):
        ok = True
        for lam in LAM_SET:
            params = SystemParams(lam=lam)
            policy = fixed_policy(params)
            schedule, _ = solve_increments(params, policy)
            bound = boundary_sequence(params, policy)
            for i in range(schedule.J):
                ok &= bound.a[i + 1] - 1e-9 <= schedule.deltas[i] <= bound.a[i] + 1e-9
        assert verdict(2, "landmark sandwich", ok)

    def test_03_schedule_depth(self):
        depths = {}
        for lam in range(3, 16):
            params = SystemParams(lam=float(lam))
            schedule, _ = solve_increments(params, fixed_policy(params))
            depths[lam] = schedule.J
        default_depth = depths[15]
        ok = default_depth in (8, 9, 10)
        ok &= all(j in (8, 9, 10) for j in depths.values())
        bands = f"noise 3-7 gives J={depths[3]}, 8-15 gives J={depths[15]}"
        assert verdict(3, "depth in expected band", ok, bands)

    def test_04_grid_search_agreement(self):
        ok = True
        start = time.perf_counter()
        for budget in (2.0, 5.0, 10.0):
            params = SystemParams(storage_override=budget)
            policy = fixed_policy(params)
            grid = brute_force_schedule(params, policy, GRID_STEP, 4)
            exact, _ = solve_increments(params, policy)
            for j in range(1, 5):
                ok &= abs(grid.delta(j) - exact.delta(j)) <= GRID_STEP + 1e-12
        elapsed = time.perf_counter() - start
        ok &= elapsed < GRID_TIME_MAX
        assert verdict(4, "grid search agrees", ok, f"{elapsed:.1f}s")

    def test_05_bound_tightness(self):
        ok = True
        worst = 0.0
        for lam in LAM_SET:
            params = SystemParams(lam=lam)
            policy = fixed_policy(params)
            lower, upper = pe_bounds(params, policy)
            schedule, _ = solve_increments(params, policy)
            pe = pe_schedule(params, schedule, policy).pe_total
            ok &= lower <= pe <= upper
            gap = (upper - lower) / upper
            worst = max(worst, gap)
            ok &= gap < BOUND_GAP_MAX
        assert verdict(5, "analytic bounds tight", ok, f"max rel gap {worst:.3f}")

    def test_06_strategy_ordering(self):
        params = SystemParams()
        policy = fixed_policy(params)
        schedule, _ = solve_increments(params, policy)
        pe1 = pe_strategy1(params).pe_total
        pe2 = pe_schedule(params, schedule, policy).pe_total
        pe3 = optimize_strategy3(params).pe.pe_total
        pe4 = optimize_strategy4(params).pe.pe_total
        ok = pe4 < pe3 < pe2 < pe1
        spread = pe1 - pe4
        ok &= spread > ORDER_MARGIN_MIN
        assert verdict(6, "refinements ordered", ok, f"spread {spread:.2e}")

    def test_07_storage_sweep_shape(self):
        grid = ",".join(str(v) for v in range(10, 81, 5))
        cfg = build_config({"sweep": "B_M", "grid": grid, "mc_slots": "0"})
        rows = run_sweep(cfg)
        series = {}
        for row in rows:
            series.setdefault(row["strategy"], []).append(float(row["pe"]))
        ok = len(set(series["S1"])) == 1
        for name in ("S2", "S3", "S4"):
            pes = series[name]
            ok &= all(a > b for a, b in zip(pes, pes[1:]))
        ys = np.log(series["S4"])
        xs = np.array([float(v) for v in range(10, 81, 5)])
        design = np.vstack([xs, np.ones_like(xs)]).T
        _, residual, *_ = np.linalg.lstsq(design, ys, rcond=None)
        r2 = 1.0 - residual[0] / ((ys - ys.mean()) ** 2).sum()
        ok &= r2 > R2_MIN
        assert verdict(7, "storage sweep shape", ok, f"R2 {r2:.3f}")

    def test_08_depth_bound_behavior(self):
        ok = True
        for budget in (10.0, 25.0, 42.0, 60.0):
            previous = None
            for lam in LAM_SET:
                params = SystemParams(lam=lam, storage_override=budget)
                policy = fixed_policy(params)
                schedule, _ = solve_increments(params, policy)
                bound = increment_count_bound(params, policy)
                ok &= bound >= schedule.J
                if previous is not None:
                    ok &= bound <= previous
                previous = bound
        assert verdict(8, "depth bound dominates", ok)

    def test_09_closed_form_landmarks(self):
        ok = True
        worst = 0.0
        for lam in LAM_SET:
            params = SystemParams(lam=lam)
            policy = fixed_policy(params)
            bound = boundary_sequence(params, policy)
            for i in range(1, bound.J + 2):
                err = abs(
                    boundary_closed_form(i, bound.J, params, policy) - bound.a[i - 1]
                )
                worst = max(worst, err)
                ok &= err <= CLOSED_FORM_TOL
        assert verdict(9, "closed form matches", ok, f"max err {worst:.1e}")

    def test_10_monte_carlo_agreement(self):
        params = SystemParams()
        policy = fixed_policy(params)
        schedule, _ = solve_increments(params, policy)
        one_tap = SystemParams(hitting_probs=(0.9, 0.1))
        two_tap = SystemParams(hitting_probs=(0.8, 0.15, 0.05))
        s61 = suboptimal_increments_1isi(one_tap, schedule)
        s62 = suboptimal_increments_2isi(two_tap, schedule)
        cases = (
            ("S1", params, "S1", pe_strategy1(params).pe_total, False),
            ("S2", params, "S2", pe_schedule(params, schedule, policy).pe_total, False),
            ("S3", params, "S3", optimize_strategy3(params).pe.pe_total, False),
            ("S4", params, "S4", optimize_strategy4(params).pe.pe_total, False),
            (
                "S6K1",
                one_tap,
                "S6",
                exact_pe_isi(one_tap, s61, isi_adaptive_policy(one_tap, s61), 1).pe_total,
                True,
            ),
            (
                "S6K2",
                two_tap,
                "S6",
                exact_pe_isi(two_tap, s62, isi_adaptive_policy(two_tap, s62), 2).pe_total,
                True,
            ),
        )
        ok = True
        worst = 0.0
        for label, sys_params, name, target, allow in cases:
            spec = make_strategy(name, sys_params)
            start = time.perf_counter()
            report = simulate(
                spec, sys_params, MC_SLOTS, seed=MC_SEED, allow_infeasible=allow
            )
            elapsed = time.perf_counter() - start
            ok &= elapsed < MC_TIME_MAX
            sigma = (target * (1.0 - target) / report.slots) ** 0.5
            z = abs(report.ber - target) / sigma
            worst = max(worst, z)
            ok &= z < MC_SIGMA_FACTOR
        assert verdict(10, "simulation matches analysis", ok, f"max z {worst:.2f}")

    def test_11_one_tap_interference_ordering(self):
        ok = True
        ratios = {}
        for lam in (3.0, 15.0):
            clean = SystemParams(lam=lam)
            tap = SystemParams(lam=lam, hitting_probs=(0.9, 0.1))
            policy = fixed_policy(clean)
            schedule, _ = solve_increments(clean, policy)
            s61 = suboptimal_increments_1isi(tap, schedule)
            pe6 = exact_pe_isi(tap, s61, isi_adaptive_policy(tap, s61), 1).pe_total
            pe1 = exact_pe_isi(tap, IncrementSchedule(()), policy, 1).pe_total
            pe5 = strategy5_exact_pe_1isi(tap).pe_total
            pe4 = optimize_strategy4(clean).pe.pe_total
            ok &= pe1 < pe5
            ok &= pe6 < pe1
            ok &= pe4 < pe1
            ratios[lam] = pe6 / pe4
        ok &= ratios[15.0] < ratios[3.0]
        tap = SystemParams(hitting_probs=(0.9, 0.1))
        mc = simulate(make_strategy("S5", tap), tap, 200000, seed=MC_SEED)
        lower, upper = strategy5_pe_bounds_1isi(tap, 3)
        slack = MC_SIGMA_FACTOR * mc.ci_half_width
        ok &= lower - slack <= mc.ber <= upper + slack
        detail = f"gap ratio {ratios[3.0]:.0f} to {ratios[15.0]:.0f}"
        assert verdict(11, "one-tap ordering", ok, detail)

    def test_12_two_tap_interference_ordering(self):
        chain = two_symbol_chain(8)
        ok = abs(chain.steady.sum() - 1.0) <= CHAIN_TOL
        for k in range(1, 8):
            want = 2.0 ** -(k + 1)
            ok &= abs(chain.steady[2 * (k - 1)] - want) <= CHAIN_TOL
            ok &= abs(chain.steady[2 * k - 1] - want) <= CHAIN_TOL
        ok &= abs(chain.steady[-1] - 2.0**-8) <= CHAIN_TOL
        clean = SystemParams()
        two_tap = SystemParams(hitting_probs=(0.8, 0.15, 0.05))
        policy = fixed_policy(clean)
        schedule, _ = solve_increments(clean, policy)
        s62 = suboptimal_increments_2isi(two_tap, schedule)
        pe6 = exact_pe_isi(two_tap, s62, isi_adaptive_policy(two_tap, s62), 2).pe_total
        pe1 = exact_pe_isi(two_tap, IncrementSchedule(()), policy, 2).pe_total
        pe4 = optimize_strategy4(clean).pe.pe_total
        mc5 = simulate(make_strategy("S5", two_tap), two_tap, 200000, seed=MC_SEED)
        ok &= pe6 < pe1
        ok &= pe4 < pe1
        ok &= pe6 < mc5.ber
        ok &= pe4 < mc5.ber
        assert verdict(12, "two-tap ordering", ok)

    def test_13_interference_free_reduction(self):
        clean = SystemParams()
        policy = fixed_policy(clean)
        want = pe_strategy1(clean).pe_total
        ok = True
        for probs, memory in (((1.0, 0.0), 1), ((1.0, 0.0, 0.0), 2)):
            degenerate = SystemParams(hitting_probs=probs)
            got = exact_pe_isi(
                degenerate, IncrementSchedule(()), policy, memory
            ).pe_total
            ok &= abs(got - want) <= REDUCTION_TOL * want
        assert verdict(13, "degenerate taps reduce", ok)

    def test_14_report_reproducibility(self, tmp_path):
        first_dir = tmp_path / "a"
        second_dir = tmp_path / "b"
        assert main(["figure", "fig4", f"out={first_dir}"]) == 0
        assert main(["figure", "fig4", f"out={second_dir}"]) == 0
        first = (first_dir / "fig4.csv").read_bytes()
        second = (second_dir / "fig4.csv").read_bytes()
        ok = first == second and len(first) > 0
        ok &= (first_dir / "fig4.png").exists()
        assert verdict(14, "report byte-stable", ok, f"{len(first)} bytes")
