"""Optimal release schedules without inter-symbol interference.

The transmitter spends a storage budget B_M across the run-length states of
consecutive "1" bits: state j (j - 1 previous ones) occurs with probability
2^{-j} and releases M + Delta_j. Minimizing the state-averaged miss
probability subject to the prefix-sum storage constraints is a convex
problem whose stationarity conditions decouple per state given a single
multiplier mu: |d/dx pe_given_1| evaluated at M + Delta_j must equal
2^j * mu wherever Delta_j > 0. The solver therefore water-fills on mu.

Boundary points a_i mark where the derivative magnitude falls to
2^{-(J-i+1)} of its value at M; they sandwich each optimal increment and
yield closed-form error bounds plus an upper bound on the number of
positive increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import lambertw

from .core import (
    ErrorReport,
    FeasibilityError,
    IncrementSchedule,
    NumericError,
    ParameterError,
    SystemParams,
    ThresholdPolicy,
    dpe1,
    ml_fixed_threshold,
    pe_given_0,
    pe_given_1,
    validate_schedule,
)

# Relative tolerance on the budget residual |sum(Delta) - B_M|.
BUDGET_REL_TOL = 1e-9
# Relative width at which the mu bisection interval is considered collapsed.
MU_REL_TOL = 1e-12
# Absolute tolerance of the inner derivative inversions (molecules).
INVERT_XTOL = 1e-12
# Iteration caps.
MU_MAX_ITER = 200
BRACKET_MAX_ITER = 2000
CANDIDATE_J_CAP = 10_000
# Enumeration guard for the brute-force oracle.
BRUTE_FORCE_GUARD = 1e8


@dataclass(frozen=True)
class BoundarySequence:
    """Derivative-ratio landmarks a_1 >= a_2 >= ... >= a_{J+1} = 0.

    J is the smallest candidate for which the budget is bracketed:
    sum(a_2..a_{J+1}) <= B_M <= sum(a_1..a_J).
    """

    a: tuple[float, ...]
    J: int

    def __post_init__(self) -> None:
        if len(self.a) != self.J + 1:
            raise ParameterError("boundary sequence must carry J + 1 entries")


@dataclass(frozen=True)
class KktCertificate:
    """Stationarity evidence for a solved schedule.

    mu is the active multiplier; residual is the worst relative deviation of
    2^{-j} |dpe1(M + Delta_j)| from mu over the positive increments;
    active_prefix_sum is the spent budget.
    """

    mu: float
    residual: float
    active_prefix_sum: float


def _g(x: float, threshold: float, lam: float) -> float:
    # Magnitude of the miss-probability slope at release x.
    return -dpe1(x, threshold, lam)


def _check_decreasing_branch(params: SystemParams, policy: ThresholdPolicy, j_max: int) -> None:
    # The inversions below need |dpe1| strictly decreasing for x >= M, which
    # holds when M + lam sits above the relevant Poisson mode.
    M, lam = params.M, params.lam
    for j in range(1, j_max + 1):
        n = math.ceil(policy.at(j))
        if M + lam <= n - 1:
            raise ParameterError(
                f"M + lam = {M + lam} does not exceed the mode {n - 1} implied by "
                f"the state-{j} threshold; the decreasing-branch inversion is invalid"
            )


def _invert_g(target: float, threshold: float, lam: float, M: float) -> float:
    """Solve g(x) = target for x >= M on the strictly decreasing branch."""
    g_at_M = _g(M, threshold, lam)
    if target >= g_at_M:
        return M
    hi = M + 1.0
    for _ in range(BRACKET_MAX_ITER):
        if _g(hi, threshold, lam) < target:
            break
        hi = M + 2.0 * (hi - M)
    else:  # pragma: no cover - target > 0 guarantees escape
        raise NumericError(f"could not bracket the inversion of g at target {target}")
    root = brentq(
        lambda x: _g(x, threshold, lam) - target,
        M,
        hi,
        xtol=INVERT_XTOL,
        rtol=8.9e-16,
    )
    return float(root)


def _trial_schedule(
    mu: float, params: SystemParams, policy: ThresholdPolicy, j_probe: int
) -> list[float]:
    """Per-state water-filling response for a trial multiplier."""
    M, lam = params.M, params.lam
    deltas = []
    for j in range(1, j_probe + 1):
        target = (2.0**j) * mu
        th = policy.at(j)
        if target >= _g(M, th, lam):
            deltas.append(0.0)
        else:
            deltas.append(_invert_g(target, th, lam, M) - M)
    while deltas and deltas[-1] == 0.0:
        deltas.pop()
    return deltas


def solve_increments(
    params: SystemParams, policy: ThresholdPolicy
) -> tuple[IncrementSchedule, KktCertificate]:
    """Water-fill the storage budget across run-length states.

    Bisects the multiplier mu (geometric midpoints, since the useful range
    spans many orders of magnitude) until the spent budget matches B_M to
    BUDGET_REL_TOL relative. The response Delta_j(mu) is the inverse of the
    derivative magnitude at 2^j * mu, clipped at zero, and is monotone in mu,
    so the bisection is globally convergent.

    Returns the schedule plus a KktCertificate with the achieved residual.
    """
    M, B_M, lam = params.M, params.B_M, params.lam

    # The state depth never exceeds the budget divided by the smallest
    # useful increment; 64 covers every parameterization of interest and the
    # solver verifies the tail is inactive.
    j_probe = 64
    _check_decreasing_branch(params, policy, j_probe)

    if B_M <= 0:
        mu0 = max(_g(M, policy.at(j), lam) / (2.0**j) for j in range(1, j_probe + 1))
        return IncrementSchedule(()), KktCertificate(mu=mu0, residual=0.0, active_prefix_sum=0.0)

    # mu_hi zeroes every state; shrink mu_lo until the budget is exceeded.
    mu_hi = max(_g(M, policy.at(j), lam) / (2.0**j) for j in range(1, j_probe + 1))
    mu_lo = mu_hi / 2.0
    for _ in range(BRACKET_MAX_ITER):
        if sum(_trial_schedule(mu_lo, params, policy, j_probe)) > B_M:
            break
        mu_lo /= 2.0
    else:  # pragma: no cover - S(mu) -> infinity as mu -> 0
        raise NumericError("could not bracket the water-filling multiplier")

    deltas = None
    mu = mu_lo
    for _ in range(MU_MAX_ITER):
        mu = math.sqrt(mu_lo * mu_hi)
        deltas = _trial_schedule(mu, params, policy, j_probe)
        spent = sum(deltas)
        if abs(spent - B_M) <= BUDGET_REL_TOL * B_M:
            break
        if spent > B_M:
            mu_lo = mu
        else:
            mu_hi = mu
        if (mu_hi - mu_lo) <= MU_REL_TOL * mu_lo:
            mu = math.sqrt(mu_lo * mu_hi)
            deltas = _trial_schedule(mu, params, policy, j_probe)
            break
    else:
        raise NumericError(
            f"water-filling did not converge in {MU_MAX_ITER} bisections: "
            f"mu in [{mu_lo}, {mu_hi}], budget residual "
            f"{sum(_trial_schedule(mu, params, policy, j_probe)) - B_M}"
        )

    if len(deltas) >= j_probe:  # pragma: no cover - depth guard
        raise NumericError("state depth exceeded the solver probe window")

    spent = sum(deltas)
    if abs(spent - B_M) > 1e-6 * B_M:  # pragma: no cover - continuity guard
        raise NumericError(
            f"multiplier interval collapsed with budget residual {spent - B_M}"
        )
    residual = 0.0
    for j, d in enumerate(deltas, start=1):
        if d > 0:
            ratio = _g(M + d, policy.at(j), lam) / (2.0**j) / mu
            residual = max(residual, abs(ratio - 1.0))
    cert = KktCertificate(mu=mu, residual=residual, active_prefix_sum=spent)
    return IncrementSchedule(tuple(deltas)), cert


def schedule_objective(
    params: SystemParams,
    schedule: IncrementSchedule,
    policy: ThresholdPolicy,
    n_states: int,
) -> float:
    """State-averaged miss probability truncated at n_states with exact tail.

    The quantity both solve_increments and brute_force_schedule minimize;
    exposed so the two can be compared on equal footing.
    """
    M, lam = params.M, params.lam
    total = 0.0
    for j in range(1, n_states + 1):
        total += 2.0 ** (-j) * pe_given_1(M + schedule.delta(j), policy.at(j), lam)
    total += 2.0 ** (-n_states) * pe_given_1(M, policy.at(n_states + 1), lam)
    return total


def brute_force_schedule(
    params: SystemParams,
    policy: ThresholdPolicy,
    grid_step: float,
    max_states: int,
) -> IncrementSchedule:
    """Exact minimizer of the truncated objective over a molecule grid.

    Independent oracle for solve_increments. The objective is separable per
    state and the storage constraint reduces to the total spend for
    nonnegative increments, so the grid argmin is found by dynamic
    programming over (state, remaining units) instead of raw enumeration;
    the result is still the exact minimizer over the grid.
    """
    if grid_step <= 0:
        raise ParameterError(f"grid step must be positive, got {grid_step}")
    if max_states < 1:
        raise ParameterError(f"need at least one state, got {max_states}")
    B_M = params.B_M
    if B_M / grid_step * max_states > BRUTE_FORCE_GUARD:
        raise ParameterError(
            f"grid too large: {B_M / grid_step:.3g} steps x {max_states} states "
            f"exceeds the {BRUTE_FORCE_GUARD:.0e} combination guard"
        )
    _check_decreasing_branch(params, policy, max_states + 1)
    n_units = int(math.floor(B_M / grid_step + 1e-9))
    if n_units == 0:
        return IncrementSchedule(())

    M, lam = params.M, params.lam
    # cost[j][s]: state-j contribution when spending s grid units there.
    cost = np.empty((max_states, n_units + 1))
    for j in range(1, max_states + 1):
        th = policy.at(j)
        w = 2.0 ** (-j)
        for s in range(n_units + 1):
            cost[j - 1, s] = w * pe_given_1(M + s * grid_step, th, lam)

    # best[b]: minimal cost of states j..max_states given b units remain.
    best = cost[max_states - 1].copy()
    choice = np.zeros((max_states, n_units + 1), dtype=int)
    choice[max_states - 1] = np.arange(n_units + 1)
    # Spending everything in the last considered state is optimal for it,
    # but record the explicit argmin to stay exact under ties.
    for j in range(max_states - 1, 0, -1):
        new_best = np.empty(n_units + 1)
        for b in range(n_units + 1):
            totals = cost[j - 1, : b + 1] + best[b::-1]
            s = int(np.argmin(totals))
            choice[j - 1, b] = s
            new_best[b] = totals[s]
        best = new_best

    deltas = []
    b = n_units
    for j in range(1, max_states + 1):
        s = int(choice[j - 1, b])
        deltas.append(s * grid_step)
        b -= s
    while deltas and deltas[-1] == 0.0:
        deltas.pop()
    return IncrementSchedule(tuple(deltas))


def boundary_sequence(params: SystemParams, policy: ThresholdPolicy) -> BoundarySequence:
    """Find J and the landmarks a_i via the derivative-ratio equations.

    a_i solves |dpe1|(M + a_i) = |dpe1|(M) / 2^{J-i+1}; the candidate J grows
    from 1 until sum(a_1..a_J) reaches B_M, at which point the complementary
    sum over a_2..a_{J+1} is automatically below B_M.
    """
    M, B_M, lam = params.M, params.B_M, params.lam
    _check_decreasing_branch(params, policy, 2)

    for J in range(1, CANDIDATE_J_CAP + 1):
        a = []
        for i in range(1, J + 1):
            th = policy.at(i)
            target = _g(M, th, lam) / (2.0 ** (J - i + 1))
            a.append(_invert_g(target, th, lam, M) - M)
        upper = sum(a)
        if upper >= B_M:
            a.append(0.0)
            lower = sum(a[1:])
            if lower > B_M * (1 + BUDGET_REL_TOL):  # pragma: no cover - identity guard
                raise NumericError(
                    f"bracketing failed at J={J}: lower sum {lower} exceeds budget {B_M}"
                )
            return BoundarySequence(a=tuple(a), J=J)
    raise NumericError(f"no bracketing J found below {CANDIDATE_J_CAP}")


def boundary_closed_form(
    i: int, J: int, params: SystemParams, policy: ThresholdPolicy
) -> float:
    """Closed-form landmark a_i through the lower real branch of Lambert W.

    Writing nu = ceil(threshold) - 1, the ratio equation becomes
    y^nu e^{-y} = C with y = M + lam + a_i, whose relevant root is
    y = -nu * W_{-1}(-C^{1/nu} / nu). The bisection root of
    boundary_sequence is authoritative; this form validates it.
    """
    if not 1 <= i <= J + 1:
        raise ParameterError(f"index {i} outside 1..{J + 1}")
    M, lam = params.M, params.lam
    th = policy.at(i)
    nu = math.ceil(th) - 1
    if nu <= 0:
        raise NumericError(f"threshold {th} leaves no lower tail to match")
    # log of the target constant y^nu e^{-y} at the scaled derivative value.
    log_c = -(M + lam) + nu * math.log(M + lam) - (J - i + 1) * math.log(2.0)
    arg = -math.exp(log_c / nu) / nu
    if not (-1.0 / math.e <= arg < 0):
        raise NumericError(
            f"Lambert W argument {arg} leaves the W_-1 domain [-1/e, 0)"
        )
    w = lambertw(arg, k=-1)
    if not math.isfinite(w.real) or abs(w.imag) > 1e-9:
        raise NumericError(f"Lambert W returned a non-real branch value {w}")
    y = -nu * w.real
    return y - lam - M


def pe_strategy1(params: SystemParams) -> ErrorReport:
    """Error probability of the non-adaptive transmitter at the ML threshold."""
    th = ml_fixed_threshold(params.M, params.lam)
    p0 = pe_given_0(0.0, th, params.lam)
    p1 = pe_given_1(params.M, th, params.lam)
    return ErrorReport(
        pe_total=0.5 * (p0 + p1),
        pe_given_0=p0,
        pe_given_1=p1,
        per_state=((1, 1.0, 0.5 * (p0 + p1)),),
    )


def _pe_schedule_unchecked(
    params: SystemParams, schedule: IncrementSchedule, policy: ThresholdPolicy
) -> ErrorReport:
    M, lam = params.M, params.lam
    J = schedule.J
    rows = []
    sum0 = 0.0
    sum1 = 0.0
    for j in range(1, J + 1):
        w = 2.0 ** (-j)
        th = policy.at(j)
        p1 = pe_given_1(M + schedule.delta(j), th, lam)
        p0 = pe_given_0(0.0, th, lam)
        sum1 += w * p1
        sum0 += w * p0
        rows.append((j, w, 0.5 * (p0 + p1)))
    # States beyond J release exactly M under the tail threshold, so their
    # geometric weight collapses to a single exact term.
    w_tail = 2.0 ** (-J)
    th_tail = policy.at(J + 1)
    p1_tail = pe_given_1(M, th_tail, lam)
    p0_tail = pe_given_0(0.0, th_tail, lam)
    sum1 += w_tail * p1_tail
    sum0 += w_tail * p0_tail
    rows.append((J + 1, w_tail, 0.5 * (p0_tail + p1_tail)))
    return ErrorReport(
        pe_total=0.5 * (sum0 + sum1),
        pe_given_0=sum0,
        pe_given_1=sum1,
        per_state=tuple(rows),
    )


def pe_schedule(
    params: SystemParams, schedule: IncrementSchedule, policy: ThresholdPolicy
) -> ErrorReport:
    """State-averaged error probability of a feasible schedule.

    The miss probability is averaged over run-length states with weights
    2^{-j}; under a per-state policy the false-alarm probability is averaged
    with the threshold the receiver actually applies in each state.
    """
    feas = validate_schedule(schedule, params.B_M)
    if not feas.feasible:
        raise FeasibilityError(
            f"schedule violates the storage budget at prefix {feas.first_violation} "
            f"(prefix sums {feas.prefix_sums}, budget {params.B_M})"
        )
    return _pe_schedule_unchecked(params, schedule, policy)


def pe_bounds(params: SystemParams, policy: ThresholdPolicy) -> tuple[float, float]:
    """Sandwich the optimal error probability using the landmarks.

    Upper bound: the feasible surrogate Delta_i = a_{i+1}. Lower bound: the
    value at Delta_i = a_i, which overspends the budget and is therefore a
    value bound rather than a schedule; it skips feasibility validation by
    construction.
    """
    seq = boundary_sequence(params, policy)
    upper_sched = IncrementSchedule(tuple(seq.a[1:]))
    lower_sched = IncrementSchedule(tuple(seq.a[: seq.J]))
    upper = pe_schedule(params, upper_sched, policy).pe_total
    lower = _pe_schedule_unchecked(params, lower_sched, policy).pe_total
    return lower, upper


def increment_count_bound(params: SystemParams, policy: ThresholdPolicy) -> int:
    """Strict upper bound on the number of positive increments.

    min over m of (m + B_M / a_{J-m+1}), floored: any deeper schedule would
    need more budget than the landmarks allow.
    """
    seq = boundary_sequence(params, policy)
    J, a = seq.J, seq.a
    best = min(m + params.B_M / a[J - m] for m in range(1, J + 1))
    return int(math.floor(best))
