"""Shared numeric substrate: Poisson reception math and parameter validation.

Everything downstream (schedule solvers, adaptive receivers, ISI chains, the
simulator) works in terms of a Poisson observation Y with mean x + lambda,
decoded against a real-valued threshold. Received counts are integers, so
"y below threshold t" always means y <= ceil(t) - 1 and "decode one" means
y >= ceil(t). All tail sums are evaluated through the regularized incomplete
gamma function, which is exact for this purpose and stable for means far
beyond the overflow range of naive factorials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import gammaincc, gammaln

# Probability bookkeeping slack for report-level sanity checks.
PROB_SLACK = 1e-9
# Feasibility slack, relative to the storage budget, for prefix-sum checks.
FEAS_SLACK = 1e-9


class ParameterError(ValueError):
    """A parameter violates its documented domain."""


class FeasibilityError(ValueError):
    """A schedule violates the storage prefix-sum constraints."""


class NumericError(RuntimeError):
    """An iterative numeric procedure failed to converge or left its domain."""


def _as_float_tuple(values) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of the production- and storage-limited link.

    Parameters
    ----------
    beta : float
        Molecule production rate (molecules per second).
    T : float
        Slot duration (seconds).
    T_M : float
        Non-adaptive release duration (seconds), strictly inside (0, T).
    lam : float
        Background noise mean per slot (molecules).
    hitting_probs : sequence of float
        Per-slot hitting probabilities p_0..p_K. p_0 applies to the current
        slot; p_k weighs the release k slots in the past. K = 0 (a single
        p_0) disables inter-symbol interference.
    storage_override : float, optional
        Explicit storage budget. When omitted the budget is the production
        during the idle part of the slot, beta * (T - T_M). The override
        exists for capacity sweeps and may exceed beta * T.

    Notes
    -----
    M = beta * T is the baseline release per "1" bit. B_M bounds the sum of
    schedule increments within any run of consecutive ones.
    """

    beta: float = 2.0
    T: float = 25.0
    T_M: float = 4.0
    lam: float = 15.0
    hitting_probs: tuple[float, ...] = (1.0,)
    storage_override: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "hitting_probs", _as_float_tuple(self.hitting_probs))
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ParameterError(f"production rate must be positive, got {self.beta}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ParameterError(f"slot duration must be positive, got {self.T}")
        if not (0 < self.T_M < self.T):
            raise ParameterError(
                f"release duration must lie in (0, {self.T}), got {self.T_M}"
            )
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ParameterError(f"noise mean must be positive, got {self.lam}")
        probs = self.hitting_probs
        if not probs:
            raise ParameterError("hitting_probs must contain at least p_0")
        if probs[0] <= 0:
            raise ParameterError(f"p_0 must be positive, got {probs[0]}")
        if any(p < 0 for p in probs):
            raise ParameterError(f"hitting probabilities must be nonnegative: {probs}")
        if sum(probs) > 1.0 + 1e-12:
            raise ParameterError(f"hitting probabilities must sum to <= 1: {probs}")
        if self.storage_override is not None and self.storage_override < 0:
            raise ParameterError(
                f"storage budget must be nonnegative, got {self.storage_override}"
            )
        # Decoding threshold must sit below M + lam so that the error
        # probability is convex in the extra release (decreasing branch).
        if (
            ml_fixed_threshold(self.M, self.lam) >= self.M + self.lam
        ):  # pragma: no cover - mathematically unreachable
            raise ParameterError("threshold implied by (M, lam) is not below M + lam")

    @property
    def M(self) -> float:
        """Baseline molecules released per "1" bit: production of one slot."""
        return self.beta * self.T

    @property
    def B_M(self) -> float:
        """Storage budget bounding the increment prefix sums."""
        if self.storage_override is not None:
            return self.storage_override
        return self.beta * (self.T - self.T_M)

    @property
    def K(self) -> int:
        """Interference memory: number of past slots with nonzero weight."""
        return len(self.hitting_probs) - 1

    def hitting(self, k: int) -> float:
        """p_k, read as 0 beyond the stored memory."""
        if 0 <= k < len(self.hitting_probs):
            return self.hitting_probs[k]
        return 0.0

    def with_noise(self, lam: float) -> "SystemParams":
        return SystemParams(
            self.beta, self.T, self.T_M, lam, self.hitting_probs, self.storage_override
        )

    def with_storage(self, B_M: float) -> "SystemParams":
        return SystemParams(
            self.beta, self.T, self.T_M, self.lam, self.hitting_probs, B_M
        )


@dataclass(frozen=True)
class IncrementSchedule:
    """Extra molecules released per run-length state.

    deltas[j-1] is the increment added to the baseline M when transmitting a
    "1" from the state with j-1 consecutive previous ones. Entries beyond J
    are implicitly zero.
    """

    deltas: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "deltas", _as_float_tuple(self.deltas))

    @property
    def J(self) -> int:
        return len(self.deltas)

    def delta(self, j: int) -> float:
        """Increment for state index j (1-based); zero outside 1..J."""
        if 1 <= j <= len(self.deltas):
            return self.deltas[j - 1]
        return 0.0

    @property
    def total(self) -> float:
        return float(sum(self.deltas))


@dataclass(frozen=True)
class ThresholdPolicy:
    """Decoding threshold, either one fixed value or one value per state.

    A per-state policy stores J thresholds for run-length states 1..J plus a
    tail value applied to every deeper state, so the receiver only ever needs
    J + 1 stored numbers.
    """

    kind: str
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _as_float_tuple(self.values))
        if self.kind not in ("fixed", "per-state"):
            raise ParameterError(f"unknown policy kind {self.kind!r}")
        if self.kind == "fixed" and len(self.values) != 1:
            raise ParameterError("fixed policy takes exactly one threshold")
        if not self.values:
            raise ParameterError("per-state policy needs at least a tail threshold")
        if any(not (v > 0 and math.isfinite(v)) for v in self.values):
            raise ParameterError(f"thresholds must be positive and finite: {self.values}")

    @classmethod
    def fixed(cls, value: float) -> "ThresholdPolicy":
        return cls("fixed", (value,))

    @classmethod
    def per_state(cls, values) -> "ThresholdPolicy":
        return cls("per-state", tuple(values))

    def at(self, j: int) -> float:
        """Threshold applied in run-length state j (1-based)."""
        if j < 1:
            raise ParameterError(f"state index must be >= 1, got {j}")
        if self.kind == "fixed":
            return self.values[0]
        return self.values[min(j, len(self.values)) - 1]


@dataclass(frozen=True)
class ErrorReport:
    """Error probability decomposition.

    per_state rows are (state index, state probability, conditional error);
    bounds, when present, sandwich pe_total.
    """

    pe_total: float
    pe_given_0: float
    pe_given_1: float
    per_state: tuple = ()
    bounds: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        for name, p in (
            ("pe_total", self.pe_total),
            ("pe_given_0", self.pe_given_0),
            ("pe_given_1", self.pe_given_1),
        ):
            if not (-PROB_SLACK <= p <= 1 + PROB_SLACK):
                raise NumericError(f"{name}={p} is not a probability")
        if abs(self.pe_total - 0.5 * (self.pe_given_0 + self.pe_given_1)) > PROB_SLACK:
            raise NumericError("pe_total must average the conditional errors")


@dataclass(frozen=True)
class FeasibilityReport:
    """Prefix-sum storage check: slack per prefix and the first violation."""

    feasible: bool
    prefix_sums: tuple[float, ...]
    slack: tuple[float, ...]
    first_violation: int | None = None


def poisson_pmf(k: int, mean: float) -> float:
    """Poisson probability mass exp(-mean) * mean**k / k!.

    Evaluated in log space so that counts up to ~1e4 and means far above the
    factorial overflow point stay finite.
    """
    if not math.isfinite(mean) or mean <= 0:
        raise ParameterError(f"mean must be positive and finite, got {mean}")
    if k != int(k) or k < 0:
        raise ParameterError(f"count must be a nonnegative integer, got {k}")
    k = int(k)
    return math.exp(k * math.log(mean) - mean - float(gammaln(k + 1)))


def _cut(threshold: float) -> int:
    # Smallest integer count decoded as "1".
    return int(math.ceil(threshold))


def _check_channel_args(x: float, threshold: float, lam: float) -> None:
    if not (math.isfinite(x) and x >= 0):
        raise ParameterError(f"released molecules must be nonnegative, got {x}")
    if not (math.isfinite(lam) and lam > 0):
        raise ParameterError(f"noise mean must be positive, got {lam}")
    if not (math.isfinite(threshold) and threshold > 0):
        raise ParameterError(f"threshold must be positive, got {threshold}")


def pe_given_1(x: float, threshold: float, lam: float) -> float:
    """Probability a "1" carried by signal mean x is decoded as "0".

    This is P(Y <= ceil(threshold) - 1) for Y ~ Poisson(x + lam), i.e. the
    regularized upper incomplete gamma function Q(n, x + lam) with
    n = ceil(threshold). Monotone non-increasing and convex in x on the
    branch x + lam above the threshold.
    """
    _check_channel_args(x, threshold, lam)
    n = _cut(threshold)
    if n <= 0:
        return 0.0
    return float(gammaincc(n, x + lam))


def pe_given_0(x: float, threshold: float, lam: float) -> float:
    """Probability a "0" with interference mean x is decoded as "1"."""
    return 1.0 - pe_given_1(x, threshold, lam)


def dpe1(x: float, threshold: float, lam: float) -> float:
    """Exact derivative of pe_given_1 with respect to x: always negative.

    d/dx Q(n, x + lam) = -pmf(n - 1, x + lam) with n = ceil(threshold).
    """
    _check_channel_args(x, threshold, lam)
    n = _cut(threshold)
    return -poisson_pmf(n - 1, x + lam)


def ml_fixed_threshold(M: float, lam: float) -> float:
    """Maximum-likelihood decoding threshold M / ln(1 + M/lam).

    Lies strictly between lam and M whenever M > lam * (e - 1); equals M
    exactly at that boundary.
    """
    if not (math.isfinite(M) and M > 0):
        raise ParameterError(f"molecule count must be positive, got {M}")
    if not (math.isfinite(lam) and lam > 0):
        raise ParameterError(f"noise mean must be positive, got {lam}")
    return M / math.log1p(M / lam)


def validate_schedule(schedule: IncrementSchedule, B_M: float) -> FeasibilityReport:
    """Check every increment prefix sum against the storage budget.

    Diagnostic only: reports per-prefix slack and the first violating prefix
    (1-based) instead of raising.
    """
    tol = FEAS_SLACK * max(1.0, abs(B_M))
    prefix = []
    running = 0.0
    for d in schedule.deltas:
        running += d
        prefix.append(running)
    slack = tuple(B_M - s for s in prefix)
    first = None
    for i, s in enumerate(prefix, start=1):
        if s < -tol or s > B_M + tol:
            first = i
            break
    return FeasibilityReport(
        feasible=first is None,
        prefix_sums=tuple(prefix),
        slack=slack,
        first_violation=first,
    )
