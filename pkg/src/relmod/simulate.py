"""Seeded slot-level Monte Carlo simulation of the full link.

The simulator is the empirical oracle for every analytic number: it tracks
transmitter storage and run-length state, releases per schedule (or per the
fixed-received-rate rule), draws the Poisson observation from the
interference-summed mean, and decodes with the threshold of the receiver's
own decoded-state track, so error propagation is real rather than assumed
away. Identical (spec, params, n_slots, seed) inputs reproduce identical
reports bit for bit: bits are pregenerated as one uniform block and the
Poisson sampler consumes the remaining stream with a pinned algorithm.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .core import (
    FeasibilityError,
    IncrementSchedule,
    ParameterError,
    SystemParams,
    ThresholdPolicy,
    ml_fixed_threshold,
)
from .adaptive import optimize_strategy3, optimize_strategy4
from .isi import (
    isi_adaptive_policy,
    strategy5_rates_online,
    suboptimal_increments_1isi,
    suboptimal_increments_2isi,
)
from .noisi import solve_increments

# Slots excluded from error counting so the interference state reaches
# stationarity; short runs skip the warm-up entirely.
WARMUP_SLOTS = 100
# Mean below which Poisson sampling inverts the CDF directly.
INVERSION_MEAN_MAX = 30.0
# Storage slack (molecules) before a violation is flagged; wider than the
# schedule solver's budget tolerance so rounding never reads as a violation.
STORAGE_TOL = 1e-6
# Reproducibility contract: bit block from PCG64(seed), then sequential
# sampling via CDF inversion (mean < 30) or transformed rejection.
SAMPLER_VERSION = "pcg64-inv30-ptrs1"


class PoissonSampler:
    """Deterministic Poisson sampling from an owned uniform stream.

    Means below INVERSION_MEAN_MAX invert the CDF with the multiplicative
    recurrence; larger means use the transformed-rejection method with
    squeeze (one uniform pair per attempt). Both consume the generator
    strictly sequentially, which makes the draw reproducible across
    platforms for a fixed seed.
    """

    def __init__(self, rng: np.random.Generator):
        self._rng = rng

    def sample(self, mean: float) -> int:
        if not (mean > 0 and math.isfinite(mean)):
            raise ParameterError(f"Poisson mean must be positive, got {mean}")
        if mean < INVERSION_MEAN_MAX:
            return self._inversion(mean)
        return self._ptrs(mean)

    def _inversion(self, mean: float) -> int:
        u = self._rng.random()
        p = math.exp(-mean)
        s = p
        x = 0
        while u > s and x < 10_000:
            x += 1
            p *= mean / x
            s += p
        return x

    def _ptrs(self, mean: float) -> int:
        log_mu = math.log(mean)
        b = 0.931 + 2.53 * math.sqrt(mean)
        a = -0.059 + 0.02483 * b
        inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
        v_r = 0.9277 - 3.6224 / (b - 2.0)
        while True:
            u = self._rng.random() - 0.5
            v = self._rng.random()
            us = 0.5 - abs(u)
            k = math.floor((2.0 * a / us + b) * u + mean + 0.43)
            if us >= 0.07 and v <= v_r:
                return int(k)
            if k < 0 or (us < 0.013 and v > us):
                continue
            lhs = math.log(v * inv_alpha / (a / (us * us) + b))
            if lhs <= k * log_mu - mean - math.lgamma(k + 1.0):
                return int(k)


@dataclass(frozen=True)
class StrategySpec:
    """A named transmission strategy bound to its schedule and policy.

    S1 carries a zero schedule and a fixed policy; S5 ignores the schedule
    entirely and releases by the fixed-received-rate rule.
    """

    name: str
    schedule: IncrementSchedule
    policy: ThresholdPolicy
    memory: int = 0

    def __post_init__(self) -> None:
        if self.name not in ("S1", "S2", "S3", "S4", "S5", "S6"):
            raise ParameterError(f"unknown strategy name {self.name!r}")
        if self.memory not in (0, 1, 2):
            raise ParameterError(f"memory must be 0, 1 or 2, got {self.memory}")
        if self.name == "S1" and (self.schedule.J != 0 or self.policy.kind != "fixed"):
            raise ParameterError("S1 requires a zero schedule and a fixed policy")

    @property
    def fixed_rate(self) -> bool:
        return self.name == "S5"


@dataclass(frozen=True)
class SimReport:
    """Aggregated Monte Carlo outcome.

    per_state_errors maps the true transmit state to (sent, errors);
    feasibility_violations counts slots where the storage budget was broken
    (only possible when violations are explicitly allowed).
    """

    slots: int
    errors: int
    ber: float
    ci_half_width: float
    per_state_errors: dict = field(default_factory=dict)
    feasibility_violations: int = 0
    seed: int = 0


def make_strategy(name: str, params: SystemParams) -> StrategySpec:
    """Build the canonical StrategySpec for a strategy name.

    S2 solves the schedule under the fixed ML threshold; S3 and S4 run their
    optimizations; S6 derives the interference-compensating schedule from
    the fixed-threshold optimum (memory taken from params) and pairs it with
    the interference-aware thresholds; S5 uses the fixed-received-rate rule
    with the ML threshold for its constant rate.
    """
    name = name.upper()
    K = params.K
    fixed = ThresholdPolicy.fixed(ml_fixed_threshold(params.M, params.lam))
    if name == "S1":
        return StrategySpec("S1", IncrementSchedule(()), fixed, memory=K)
    if name == "S2":
        schedule, _ = solve_increments(params, fixed)
        return StrategySpec("S2", schedule, fixed, memory=K)
    if name == "S3":
        sol = optimize_strategy3(params)
        return StrategySpec("S3", sol.schedule, sol.policy, memory=K)
    if name == "S4":
        sol = optimize_strategy4(params)
        return StrategySpec("S4", sol.schedule, sol.policy, memory=K)
    if name == "S5":
        policy = ThresholdPolicy.fixed(
            ml_fixed_threshold(params.hitting(0) * params.M, params.lam)
        )
        return StrategySpec("S5", IncrementSchedule(()), policy, memory=max(K, 1))
    if name == "S6":
        base, _ = solve_increments(params, fixed)
        if K == 1:
            schedule = suboptimal_increments_1isi(params, base)
        elif K == 2:
            schedule = suboptimal_increments_2isi(params, base)
        else:
            raise ParameterError("S6 needs interference memory 1 or 2")
        policy = isi_adaptive_policy(params, schedule)
        return StrategySpec("S6", schedule, policy, memory=K)
    raise ParameterError(f"unknown strategy name {name!r}")


def _slot_rows(spec, params, n_slots, seed, genie, allow_infeasible):
    """Generate one (bit, state, released, mean, y, threshold, decoded,
    storage) row per slot; shared by simulate and replay_trace."""
    rng = np.random.Generator(np.random.PCG64(seed))
    bits = rng.random(n_slots) < 0.5
    sampler = PoissonSampler(rng)

    M, B_M, lam = params.M, params.B_M, params.lam
    schedule, policy = spec.schedule, spec.policy
    k_buf = max(params.K, 2 if spec.fixed_rate else 0, 1)
    releases = deque([0.0] * k_buf, maxlen=k_buf)
    recent = deque(maxlen=8)

    tx_run = 0
    rx_run = 0
    storage = B_M
    for i in range(n_slots):
        bit = int(bits[i])
        j_tx = tx_run + 1
        violated = False
        if spec.fixed_rate:
            rel = (
                strategy5_rates_online((releases[-2], releases[-1]), params)
                if bit
                else 0.0
            )
        elif bit:
            d = schedule.delta(j_tx)
            storage -= d
            if storage < -STORAGE_TOL or storage > B_M + STORAGE_TOL:
                violated = True
            rel = M + d
        else:
            rel = 0.0
            storage = B_M
        mean = lam + params.hitting(0) * rel
        for k in range(1, params.K + 1):
            mean += params.hitting(k) * releases[-k]
        y = sampler.sample(mean)
        j_rx = (tx_run if genie else rx_run) + 1
        th = policy.at(j_rx)
        decoded = int(y >= math.ceil(th))
        row = (bit, j_tx, rel, mean, y, th, decoded, storage)
        recent.append(row)
        if violated and not allow_infeasible:
            raise FeasibilityError(
                f"storage left [0, {B_M}] at slot {i} (level {storage}); "
                f"recent slots (bit, state, released, mean, y, threshold, "
                f"decoded, storage): {list(recent)}"
            )
        yield i, row, violated
        tx_run = tx_run + 1 if bit else 0
        rx_run = rx_run + 1 if decoded else 0
        releases.append(rel)


def simulate(
    spec: StrategySpec,
    params: SystemParams,
    n_slots: int,
    seed: int,
    genie: bool = False,
    allow_infeasible: bool = False,
) -> SimReport:
    """Run the link for n_slots equiprobable bits and report the BER.

    The receiver decodes with the threshold of its decoded-state track
    (genie=True switches to the true state, isolating error propagation).
    The first WARMUP_SLOTS slots are simulated but not counted when the run
    is long enough. A storage violation raises FeasibilityError with a slot
    trace unless allow_infeasible is set, in which case violating slots are
    counted in the report.
    """
    if n_slots < 1:
        raise ParameterError(f"need at least one slot, got {n_slots}")
    warmup = WARMUP_SLOTS if n_slots > WARMUP_SLOTS else 0
    cap = spec.schedule.J + 1
    errors = 0
    violations = 0
    per_state: dict[int, list[int]] = {}
    for i, row, violated in _slot_rows(
        spec, params, n_slots, seed, genie, allow_infeasible
    ):
        violations += int(violated)
        if i < warmup:
            continue
        bit, j_tx, _, _, _, _, decoded, _ = row
        err = int(decoded != bit)
        errors += err
        bucket = per_state.setdefault(min(j_tx, cap), [0, 0])
        bucket[0] += 1
        bucket[1] += err
    slots = n_slots - warmup
    ber = errors / slots
    ci = 1.96 * math.sqrt(ber * (1.0 - ber) / slots)
    return SimReport(
        slots=slots,
        errors=errors,
        ber=ber,
        ci_half_width=ci,
        per_state_errors={j: tuple(v) for j, v in sorted(per_state.items())},
        feasibility_violations=violations,
        seed=seed,
    )


def replay_trace(
    spec: StrategySpec,
    params: SystemParams,
    n_slots: int,
    seed: int,
    genie: bool = False,
    allow_infeasible: bool = False,
) -> list[tuple]:
    """Slot-by-slot event log of the identical dynamics as simulate.

    Returns one (bit, state, released, received mean, Y, threshold, decoded,
    storage level) tuple per slot, same seed semantics as simulate.
    """
    if n_slots < 1:
        raise ParameterError(f"need at least one slot, got {n_slots}")
    return [
        row
        for _, row, _ in _slot_rows(
            spec, params, n_slots, seed, genie, allow_infeasible
        )
    ]
