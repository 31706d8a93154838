"""Adaptive decoding thresholds and the joint schedule/threshold descent.

Once the transmitter modulates its release by run-length state, the
maximum-likelihood threshold becomes state-dependent: the receiver that
believes it is in state j compares against the ML point for a release of
M + Delta_j. One refinement pass after solving the schedule gives
strategy 3; alternating schedule solves and threshold refreshes until the
error probability stops improving gives strategy 4. Both directions of the
alternation solve their subproblem exactly, so the error probability is
non-increasing across iterations by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    ErrorReport,
    IncrementSchedule,
    NumericError,
    ParameterError,
    SystemParams,
    ThresholdPolicy,
    ml_fixed_threshold,
)
from .noisi import pe_schedule, solve_increments

# Default convergence controls for the joint descent.
DESCENT_TOL = 1e-12
DESCENT_MAX_ITER = 200
# Allowed numeric backsliding before the monotonicity guard trips.
MONOTONE_SLACK = 1e-15


@dataclass(frozen=True)
class JointSolution:
    """Converged (schedule, policy) pair with its error report.

    The recorded pe values are non-increasing across iterations; converged
    means the last improvement fell below the tolerance.
    """

    schedule: IncrementSchedule
    policy: ThresholdPolicy
    pe: ErrorReport
    iterations: int
    converged: bool


def adaptive_thresholds(params: SystemParams, schedule: IncrementSchedule) -> ThresholdPolicy:
    """Per-state ML thresholds for a given schedule.

    State j gets (M + Delta_j) / ln(1 + (M + Delta_j) / lam); states beyond J
    release exactly M, so a single tail value covers all of them and the
    policy carries J + 1 numbers in total.
    """
    M, lam = params.M, params.lam
    values = [
        ml_fixed_threshold(M + schedule.delta(j), lam) for j in range(1, schedule.J + 1)
    ]
    values.append(ml_fixed_threshold(M, lam))
    return ThresholdPolicy.per_state(values)


def pe_adaptive(
    params: SystemParams, schedule: IncrementSchedule, policy: ThresholdPolicy
) -> ErrorReport:
    """Error probability under a per-state policy.

    Identical state averaging to the fixed-threshold evaluation; each state
    contributes both its miss and its false-alarm probability at the
    threshold the receiver applies there. Error propagation from wrong state
    tracking is ignored here; the simulator measures it.
    """
    if policy.kind != "per-state":
        raise ParameterError("pe_adaptive requires a per-state policy")
    return pe_schedule(params, schedule, policy)


def optimize_strategy3(params: SystemParams) -> JointSolution:
    """One refinement pass: solve under the fixed ML threshold, then adapt.

    The schedule is the fixed-threshold optimum; thresholds are recomputed
    once for that schedule and not fed back.
    """
    fixed = ThresholdPolicy.fixed(ml_fixed_threshold(params.M, params.lam))
    schedule, _ = solve_increments(params, fixed)
    policy = adaptive_thresholds(params, schedule)
    report = pe_schedule(params, schedule, policy)
    return JointSolution(
        schedule=schedule, policy=policy, pe=report, iterations=1, converged=True
    )


def optimize_strategy4(
    params: SystemParams,
    tol: float = DESCENT_TOL,
    max_iter: int = DESCENT_MAX_ITER,
) -> JointSolution:
    """Joint schedule/threshold optimization by coordinate descent.

    Starts from the fixed-threshold solution, then alternates an exact
    schedule solve under the current thresholds with a threshold refresh for
    the current schedule. Stops when the error probability improves by less
    than tol (converged) or after max_iter alternations (not converged).
    A monotonicity violation beyond numeric slack raises, since each half
    step is an exact minimizer of its subproblem.
    """
    if tol <= 0:
        raise ParameterError(f"tolerance must be positive, got {tol}")
    if max_iter < 1:
        raise ParameterError(f"need at least one iteration, got {max_iter}")

    fixed = ThresholdPolicy.fixed(ml_fixed_threshold(params.M, params.lam))
    schedule, _ = solve_increments(params, fixed)
    policy = adaptive_thresholds(params, schedule)
    report = pe_schedule(params, schedule, policy)

    iterations = 0
    converged = False
    for _ in range(max_iter):
        new_schedule, _ = solve_increments(params, policy)
        new_policy = adaptive_thresholds(params, new_schedule)
        new_report = pe_schedule(params, new_schedule, new_policy)
        iterations += 1
        if new_report.pe_total > report.pe_total + MONOTONE_SLACK:
            raise NumericError(
                f"joint descent increased the error probability: "
                f"{report.pe_total} -> {new_report.pe_total}"
            )
        improvement = report.pe_total - new_report.pe_total
        schedule, policy, report = new_schedule, new_policy, new_report
        if improvement < tol:
            converged = True
            break
    return JointSolution(
        schedule=schedule,
        policy=policy,
        pe=report,
        iterations=iterations,
        converged=converged,
    )
