"""Inter-symbol interference machinery.

With hitting probabilities p_0..p_K, a released molecule may arrive up to K
slots late, so each slot's Poisson mean mixes the last K + 1 releases. This
module provides: the hypothesis means and their coefficient bookkeeping, the
sub-optimal schedules that compensate interference through a deflated
release recursion, the two-symbol state chain and its stationary law, the
interference-aware adaptive thresholds, an exact error evaluator built on a
joint Markov chain over recent releases, and the fixed-received-rate
baseline with its truncation bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    ErrorReport,
    IncrementSchedule,
    NumericError,
    ParameterError,
    SystemParams,
    ThresholdPolicy,
    ml_fixed_threshold,
    pe_given_0,
    pe_given_1,
)

# Weight below which the geometric state tail is collapsed into its limit.
TAIL_WEIGHT_CUTOFF = 1e-18
# Stationarity defect tolerated when verifying chain solutions.
CHAIN_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class IsiChain:
    """A finite bit-driven state chain with its stationary law.

    transition is row-stochastic with entries in {0, 1/2}; steady solves
    steady @ transition = steady and sums to one.
    """

    states: tuple
    transition: np.ndarray
    steady: np.ndarray


@dataclass(frozen=True)
class IsiValueTable:
    """Per-state interference means v and release amounts l.

    Row i describes transmitting from states[i]: v[i] is the interference
    contributed by earlier slots and l[i] the molecules released if the
    current bit is a one.
    """

    states: tuple
    v: tuple[float, ...]
    l: tuple[float, ...]

    def __post_init__(self) -> None:
        if any(x < 0 for x in self.v):
            raise ParameterError(f"interference means must be nonnegative: {self.v}")
        if any(x < 0 for x in self.l):
            raise ParameterError(f"release amounts must be nonnegative: {self.l}")


@dataclass(frozen=True)
class SignalWeights:
    """Hypothesis means and their coefficient decomposition.

    c[m] (hypothesis "0") and d[m] (hypothesis "1") collect the hitting
    probabilities that multiply the baseline M (m = 0) or the increment
    Delta_m (m >= 1), so w0 = lam + c[0] M + sum c[m] Delta_m and likewise
    for w1.
    """

    c: tuple[float, ...]
    d: tuple[float, ...]
    w0: float
    w1: float


def _run_indices(history) -> list[int]:
    # Run length of consecutive ones ending at each position; slots before
    # the window are treated as zeros.
    runs = []
    run = 0
    for b in history:
        if b not in (0, 1):
            raise ParameterError(f"history bits must be 0 or 1, got {b!r}")
        run = run + 1 if b == 1 else 0
        runs.append(run)
    return runs


def received_means(
    history, params: SystemParams, schedule: IncrementSchedule
) -> SignalWeights:
    """Poisson hypothesis means given the last transmitted bits.

    history lists bits oldest first; its final entry is the slot immediately
    before the current one. Each past one at lag k contributes
    p_k * (M + Delta_m) where m is the run-length index that slot
    transmitted from, and the current bit contributes with p_0.
    """
    K = params.K
    history = list(history)
    if len(history) < K:
        raise ParameterError(f"history of length {len(history)} is shorter than K={K}")
    runs = _run_indices(history)
    j_cur = (runs[-1] if history else 0) + 1

    width = j_cur + 1
    for k in range(1, K + 1):
        if history[-k] == 1:
            width = max(width, runs[-k] + 1)
    c = [0.0] * width
    for k in range(1, K + 1):
        if history[-k] == 1:
            p = params.hitting(k)
            c[0] += p
            c[runs[-k]] += p
    d = list(c)
    d[0] += params.hitting(0)
    d[j_cur] += params.hitting(0)

    M, lam = params.M, params.lam
    w0 = lam + c[0] * M + sum(c[m] * schedule.delta(m) for m in range(1, width))
    w1 = lam + d[0] * M + sum(d[m] * schedule.delta(m) for m in range(1, width))
    return SignalWeights(c=tuple(c), d=tuple(d), w0=w0, w1=w1)


def _require_memory(params: SystemParams, K: int, caller: str) -> None:
    for k in range(K + 1, len(params.hitting_probs)):
        if params.hitting_probs[k] != 0.0:
            raise ParameterError(
                f"{caller} handles memory {K} but p_{k} = {params.hitting_probs[k]} "
                f"is nonzero"
            )


def suboptimal_increments_1isi(
    params: SystemParams, noisi: IncrementSchedule
) -> IncrementSchedule:
    """One-symbol interference compensation of a no-interference schedule.

    Deflates each target release by the leakage of the previous one:
    l_1 = (M + D_1) / p_0 and l_i = (M + D_i - p_1 l_{i-1}) / p_0, where D_i
    is the no-interference increment; the returned increments are l_i - M.
    The construction targets p_0 l_i + v_i = M + D_i and may overspend the
    storage budget; feasibility is reported by validate_schedule, not
    enforced here.
    """
    _require_memory(params, 1, "suboptimal_increments_1isi")
    p0, p1 = params.hitting(0), params.hitting(1)
    M = params.M
    deltas = []
    l_prev = 0.0
    for i in range(1, noisi.J + 1):
        if i == 1:
            l_i = (M + noisi.delta(1)) / p0
        else:
            l_i = (M + noisi.delta(i) - p1 * l_prev) / p0
        deltas.append(l_i - M)
        l_prev = l_i
    return IncrementSchedule(tuple(deltas))


def suboptimal_increments_2isi(
    params: SystemParams, noisi: IncrementSchedule
) -> IncrementSchedule:
    """Two-symbol interference compensation of a no-interference schedule.

    Three-branch recursion: the first state sees only the averaged
    interference p_2 M / 2 of the slot two back; the second subtracts the
    previous release; deeper states subtract both lookbacks:
    l_i = (M + D_i - p_1 l_{i-1} - p_2 l_{i-2}) / p_0.
    """
    _require_memory(params, 2, "suboptimal_increments_2isi")
    p0, p1, p2 = params.hitting(0), params.hitting(1), params.hitting(2)
    M = params.M
    deltas = []
    l_prev, l_prev2 = 0.0, 0.0
    for i in range(1, noisi.J + 1):
        if i == 1:
            l_i = (M + noisi.delta(1) - p2 * M / 2.0) / p0
        elif i == 2:
            l_i = (M + noisi.delta(2) - p1 * l_prev) / p0
        else:
            l_i = (M + noisi.delta(i) - p1 * l_prev - p2 * l_prev2) / p0
        deltas.append(l_i - M)
        l_prev2, l_prev = l_prev, l_i
    return IncrementSchedule(tuple(deltas))


def _stationary(transition: np.ndarray) -> np.ndarray:
    """Stationary row vector of an irreducible row-stochastic matrix."""
    n = transition.shape[0]
    A = transition.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"stationary system is singular: {exc}") from exc
    defect = float(np.max(np.abs(pi @ transition - pi)))
    if defect > CHAIN_TOL:
        raise NumericError(f"stationary defect {defect} exceeds {CHAIN_TOL}")
    return pi


def two_symbol_chain(J_cap: int) -> IsiChain:
    """Paired run/gap chain for two-symbol interference.

    Odd state 2k-1: last bit was a zero that ended a run of k-1 ones. Even
    state 2k: currently k ones into a run. Every odd state restarts (half to
    the double-zero state, half to a fresh run); even state 2k advances to
    2k+1 or 2k+2. Truncation folds states beyond 2*J_cap onto the last pair,
    which preserves normalization exactly. The stationary law follows the
    halving pattern 1/4, 1/4, 1/8, 1/8, ...
    """
    if J_cap < 2:
        raise ParameterError(f"need J_cap >= 2, got {J_cap}")
    n = 2 * J_cap
    P = np.zeros((n, n))
    for k in range(1, J_cap + 1):
        odd = 2 * k - 1
        P[odd - 1, 0] = 0.5
        P[odd - 1, 1] = 0.5
        even = 2 * k
        if k < J_cap:
            P[even - 1, even] = 0.5
            P[even - 1, even + 1] = 0.5
        else:
            # Folded tail: a deeper run or its terminating zero behaves like
            # the last represented pair.
            P[even - 1, even - 2] = 0.5
            P[even - 1, even - 1] = 0.5
    steady = _stationary(P)
    return IsiChain(states=tuple(range(1, n + 1)), transition=P, steady=steady)


def isi_value_table(
    params: SystemParams, schedule: IncrementSchedule, K: int, cap: int | None = None
) -> IsiValueTable:
    """Interference means and release amounts per chain state.

    K = 1 rows follow the run-length states 0..cap; K = 2 rows follow the
    paired states of two_symbol_chain with l_m = M + Delta_m.
    """
    M = params.M
    p1, p2 = params.hitting(1), params.hitting(2)
    if cap is None:
        cap = schedule.J + 1

    def rel(m: int) -> float:
        return M + schedule.delta(m) if m >= 1 else 0.0

    if K == 1:
        states = tuple(range(0, cap + 1))
        l = tuple(rel(min(j + 1, cap)) for j in states)
        v = tuple(0.0 if j == 0 else p1 * rel(j) for j in states)
        return IsiValueTable(states=states, v=v, l=l)
    if K == 2:
        states = tuple(range(1, 2 * cap + 1))
        v = []
        l = []
        for s in states:
            if s % 2 == 1:
                k = (s + 1) // 2
                v.append(0.0 if k == 1 else p2 * rel(k - 1))
                l.append(rel(1))
            else:
                k = s // 2
                v.append(p1 * rel(k) + (p2 * rel(k - 1) if k >= 2 else 0.0))
                l.append(rel(min(k + 1, cap)))
        return IsiValueTable(states=states, v=tuple(v), l=tuple(l))
    raise ParameterError(f"memory {K} is unsupported; use 1 or 2")


def isi_adaptive_threshold(
    j: int, schedule: IncrementSchedule, params: SystemParams
) -> float:
    """Interference-aware ML threshold for run-length state j.

    Compares the current-slot signal p_0 (M + Delta_j) against the expected
    interference floor p_1 (M + Delta_{j-1}) + p_2 (M + Delta_{j-2}) + lam,
    with Delta read as zero when its index underflows.
    """
    if j < 1:
        raise ParameterError(f"state index must be >= 1, got {j}")
    M, lam = params.M, params.lam
    p0, p1, p2 = params.hitting(0), params.hitting(1), params.hitting(2)
    signal = p0 * (M + schedule.delta(j))
    floor = p1 * (M + schedule.delta(j - 1)) + p2 * (M + schedule.delta(j - 2)) + lam
    return signal / math.log1p(signal / floor)


def isi_adaptive_policy(
    params: SystemParams, schedule: IncrementSchedule
) -> ThresholdPolicy:
    """Per-state policy of interference-aware thresholds for states 1..J+1."""
    values = [
        isi_adaptive_threshold(j, schedule, params) for j in range(1, schedule.J + 2)
    ]
    return ThresholdPolicy.per_state(values)


def _release_index_states(K: int, cap: int) -> list[tuple[int, ...]]:
    """Reachable windows of the last K release indices, canonically ordered.

    Index 0 marks a silent slot; index m >= 1 marks a release of
    M + Delta_m. A release can only follow index 0 (as a fresh run, index 1)
    or index m (as min(m + 1, cap)).
    """
    start = (0,) * K
    seen = {start}
    frontier = [start]
    while frontier:
        state = frontier.pop()
        for nxt in (_advance(state, 0, cap), _advance(state, 1, cap)):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return sorted(seen)


def _advance(state: tuple[int, ...], bit: int, cap: int) -> tuple[int, ...]:
    if bit == 0:
        new = 0
    else:
        last = state[-1]
        new = 1 if last == 0 else min(last + 1, cap)
    return state[1:] + (new,)


def exact_pe_isi(
    params: SystemParams,
    schedule: IncrementSchedule,
    policy: ThresholdPolicy,
    K: int,
    run_cap: int | None = None,
) -> ErrorReport:
    """Exact error probability over the joint chain of recent releases.

    The chain state is the window of the last K release indices, with runs
    capped at run_cap (default J + 1). The cap is lossless: increments
    vanish beyond J and the policy holds a single tail threshold, so deeper
    states are indistinguishable from the capped one. The stationary law is
    solved exactly and both conditional error probabilities are averaged
    over it; the receiver is assumed to track the true state (the simulator
    measures the error-propagation correction).
    """
    if K not in (1, 2):
        raise ParameterError(f"memory {K} is unsupported; use 1 or 2")
    if K < params.K:
        raise ParameterError(
            f"memory {K} would drop the nonzero hitting tail of {params.hitting_probs}"
        )
    cap = schedule.J + 1 if run_cap is None else run_cap
    if cap < schedule.J + 1:
        raise ParameterError(
            f"run cap {cap} would truncate a schedule with J = {schedule.J}"
        )

    M, lam = params.M, params.lam

    def rel(m: int) -> float:
        return M + schedule.delta(m) if m >= 1 else 0.0

    states = _release_index_states(K, cap)
    index = {s: i for i, s in enumerate(states)}
    n = len(states)
    P = np.zeros((n, n))
    for s, i in index.items():
        for bit in (0, 1):
            P[i, index[_advance(s, bit, cap)]] += 0.5
    pi = _stationary(P)

    rows = []
    sum0 = 0.0
    sum1 = 0.0
    for i, s in enumerate(states):
        isi = sum(params.hitting(k) * rel(s[-k]) for k in range(1, K + 1))
        j_tx = 1 if s[-1] == 0 else min(s[-1] + 1, cap)
        th = policy.at(j_tx)
        p0_err = pe_given_0(isi, th, lam)
        p1_err = pe_given_1(params.hitting(0) * rel(j_tx) + isi, th, lam)
        sum0 += pi[i] * p0_err
        sum1 += pi[i] * p1_err
        rows.append((i + 1, float(pi[i]), 0.5 * (p0_err + p1_err)))
    return ErrorReport(
        pe_total=0.5 * (sum0 + sum1),
        pe_given_0=sum0,
        pe_given_1=sum1,
        per_state=tuple(rows),
    )


def strategy5_rates_1isi(j: int, params: SystemParams) -> float:
    """Release amount of the fixed-received-rate baseline in run state j.

    The alternating geometric partial sum M * sum_{k=0}^{j} (-p_1/p_0)^k:
    each release deflates by the leakage of the previous one so the receiver
    always sees the fixed rate p_0 M from a run of ones.
    """
    if j < 0:
        raise ParameterError(f"state index must be >= 0, got {j}")
    p0, p1 = params.hitting(0), params.hitting(1)
    if not p0 > p1 >= 0:
        raise ParameterError(f"need p_0 > p_1 >= 0, got p_0={p0}, p_1={p1}")
    r = p1 / p0
    return params.M * (1.0 - (-r) ** (j + 1)) / (1.0 + r)


def _strategy5_limit(params: SystemParams) -> float:
    p0, p1 = params.hitting(0), params.hitting(1)
    return params.M * p0 / (p0 + p1)


def _strategy5_threshold(params: SystemParams) -> float:
    # Every "1" is received at the fixed rate p_0 M, so the ML comparison is
    # between that rate and the noise floor.
    return ml_fixed_threshold(params.hitting(0) * params.M, params.lam)


def strategy5_exact_pe_1isi(params: SystemParams) -> ErrorReport:
    """Exact error probability of the one-symbol fixed-received-rate baseline.

    Ones always arrive at rate p_0 M. Zeros see leakage p_1 X_{m-1} when the
    previous run had length m; the geometric state weights make the series
    summable with a collapsed limit tail.
    """
    _require_memory(params, 1, "strategy5_exact_pe_1isi")
    lam = params.lam
    p1 = params.hitting(1)
    th = _strategy5_threshold(params)
    miss = pe_given_1(params.hitting(0) * params.M, th, lam)

    false_alarm = 0.5 * pe_given_0(0.0, th, lam)
    i = 0
    while True:
        w = 2.0 ** (-(i + 2))
        if w < TAIL_WEIGHT_CUTOFF:
            false_alarm += 2.0 * w * pe_given_0(p1 * _strategy5_limit(params), th, lam)
            break
        false_alarm += w * pe_given_0(p1 * strategy5_rates_1isi(i, params), th, lam)
        i += 1
    return ErrorReport(
        pe_total=0.5 * (false_alarm + miss),
        pe_given_0=false_alarm,
        pe_given_1=miss,
    )


def strategy5_pe_bounds_1isi(params: SystemParams, k: int) -> tuple[float, float]:
    """Truncation sandwich for the baseline's error probability.

    The release amounts alternate around their limit (even states above,
    odd below) and the false-alarm probability is increasing, so collapsing
    the tail onto an even state overestimates and truncating at an odd state
    underestimates. Both bounds tighten monotonically in k.
    """
    if k < 1:
        raise ParameterError(f"truncation index must be >= 1, got {k}")
    _require_memory(params, 1, "strategy5_pe_bounds_1isi")
    lam = params.lam
    p1 = params.hitting(1)
    th = _strategy5_threshold(params)
    base = 0.5 * pe_given_1(params.hitting(0) * params.M, th, lam)
    base += 0.25 * pe_given_0(0.0, th, lam)

    def term(i: int) -> float:
        return 2.0 ** (-(i + 3)) * pe_given_0(
            p1 * strategy5_rates_1isi(i, params), th, lam
        )

    upper = base + sum(term(i) for i in range(0, 2 * k))
    upper += 2.0 ** (-(2 * k + 2)) * pe_given_0(
        p1 * strategy5_rates_1isi(2 * k, params), th, lam
    )
    lower = base + sum(term(i) for i in range(0, 2 * k - 1))
    lower += 2.0 ** (-(2 * k + 1)) * pe_given_0(
        p1 * strategy5_rates_1isi(2 * k - 1, params), th, lam
    )
    return lower, upper


def strategy5_rates_online(previous_releases, params: SystemParams) -> float:
    """Clamped fixed-received-rate release given the last two slot releases.

    previous_releases lists molecule counts oldest first (the final entry is
    the slot immediately before the current one; zeros for silent slots).
    Solves p_0 X + p_1 x_{-1} + p_2 x_{-2} = p_0 M for X and clamps at zero,
    which only engages when the leakage exceeds p_0 M. No storage constraint
    applies to this baseline.
    """
    releases = tuple(float(x) for x in previous_releases)
    if len(releases) != 2:
        raise ParameterError(
            f"previous_releases must hold exactly two counts, got {len(releases)}"
        )
    p0 = params.hitting(0)
    p1, p2 = params.hitting(1), params.hitting(2)
    leak = p1 * releases[-1] + p2 * releases[-2]
    return max(0.0, params.M - leak / p0)
