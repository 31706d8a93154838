"""Reproducible experiment runner: sweeps, comparison tables, figure data.

Every dataset is a list of rows over a fixed column set so the CLI can emit
CSV or JSON without per-command schemas:

    sweep, lam, strategy, pe, pe_lower, pe_upper, ber, ci, J, n_bound, status

``sweep`` is the x-axis value (noise level, storage budget, or bound
truncation depth), ``lam`` the noise level the row was computed at, ``pe``
the analytic error probability, ``pe_lower``/``pe_upper`` analytic bounds
when defined, ``ber``/``ci`` the Monte Carlo estimate and its 95% binomial
half width when requested, ``J`` the schedule length, ``n_bound`` the upper
bound on positive increments, and ``status`` either ``ok``, a storage
violation count, or the error that made the row unavailable. Unavailable
cells are empty strings. On an interference channel, S1 and S6 are
evaluated exactly on that channel while S2-S4 remain interference-free
reference curves (no interference-aware optimal schedule is in scope), so
the interference strategies are read against both.

Configs are flat key=value text; every key has a default reproducing the
reference parameter set, so ``figure fig4`` .. ``figure fig8`` run with no
input. Outputs are deterministic for a fixed config: analytic columns are
pure, Monte Carlo rows derive their seed as config seed + MC row index.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

from .adaptive import optimize_strategy3, optimize_strategy4
from .core import (
    FeasibilityError,
    IncrementSchedule,
    NumericError,
    ParameterError,
    SystemParams,
    ThresholdPolicy,
    ml_fixed_threshold,
)
from .isi import (
    exact_pe_isi,
    strategy5_exact_pe_1isi,
    strategy5_pe_bounds_1isi,
)
from .noisi import (
    increment_count_bound,
    pe_bounds,
    pe_schedule,
    pe_strategy1,
    solve_increments,
)
from .simulate import make_strategy, simulate

COLUMNS = (
    "sweep",
    "lam",
    "strategy",
    "pe",
    "pe_lower",
    "pe_upper",
    "ber",
    "ci",
    "J",
    "n_bound",
    "status",
)

STRATEGY_NAMES = ("S1", "S2", "S3", "S4", "S5", "S6")
SWEEP_AXES = ("lam", "B_M", "k")
FIGURE_NAMES = ("fig4", "fig5", "fig6", "fig7", "fig8")
# Minimum Monte Carlo run length when BER columns are requested.
MC_SLOTS_MIN = 10_000
# Expected pe orderings (a at most b) checked by compare().
EXPECTED_CHAIN = (
    ("S4", "S3"),
    ("S3", "S2"),
    ("S2", "S1"),
    ("S1", "S5"),
    ("S6", "S1"),
    ("S4", "S6"),
)

DEFAULTS = {
    "beta": "2",
    "T": "25",
    "T_M": "4",
    "lam": "15",
    "hitting": "1",
    "storage_override": "none",
    "strategies": "S1,S2,S3,S4",
    "sweep": "lam",
    "grid": "3,5,7,9,11,13,15",
    "mc_slots": "0",
    "mc_strategies": "",
    "seed": "20240",
    "bound_k": "3",
    "genie": "0",
    "allow_infeasible": "0",
    "deltas": "",
    "policy": "fixed",
    "threshold": "none",
    "out": "none",
    "format": "csv",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; see DEFAULTS for the key set."""

    params: SystemParams
    strategies: tuple = ("S1", "S2", "S3", "S4")
    sweep: str = "lam"
    grid: tuple = (3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0)
    mc_slots: int = 0
    mc_strategies: tuple = ()
    seed: int = 20240
    bound_k: int = 3
    genie: bool = False
    allow_infeasible: bool = False
    deltas: tuple = ()
    policy: str = "fixed"
    threshold: float | None = None
    out: str | None = None
    fmt: str = "csv"

    def __post_init__(self) -> None:
        for name in self.strategies:
            if name not in STRATEGY_NAMES:
                raise ParameterError(f"unknown strategy name {name!r}")
        if self.sweep not in SWEEP_AXES:
            raise ParameterError(f"sweep axis must be one of {SWEEP_AXES}")
        if not self.grid:
            raise ParameterError("sweep grid must be non-empty")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ParameterError("sweep grid must be strictly increasing")
        if self.mc_slots and self.mc_slots < MC_SLOTS_MIN:
            raise ParameterError(
                f"mc_slots must be 0 or at least {MC_SLOTS_MIN}, got {self.mc_slots}"
            )
        if self.fmt not in ("csv", "json"):
            raise ParameterError(f"format must be csv or json, got {self.fmt!r}")
        if self.policy not in ("fixed", "per_state"):
            raise ParameterError(f"policy must be fixed or per_state, got {self.policy!r}")

    def wants_mc(self, strategy: str) -> bool:
        if self.mc_slots == 0:
            return False
        return not self.mc_strategies or strategy in self.mc_strategies


def parse_config(text: str) -> dict:
    """Parse flat key=value lines (blank lines and # comments skipped)."""
    raw: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ParameterError(f"config line {lineno} is not key=value: {line!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key not in DEFAULTS:
            raise ParameterError(f"unknown config key {key!r}")
        raw[key] = value.strip()
    return raw


def _floats(value: str) -> tuple:
    if not value:
        return ()
    return tuple(float(v) for v in value.split(","))


def _names(value: str) -> tuple:
    if not value:
        return ()
    return tuple(v.strip().upper() for v in value.split(",") if v.strip())


def build_config(overrides: dict | None = None) -> ExperimentConfig:
    """Materialize an ExperimentConfig from DEFAULTS plus overrides."""
    raw = dict(DEFAULTS)
    for key, value in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ParameterError(f"unknown config key {key!r}")
        raw[key] = str(value).strip()
    override = raw["storage_override"]
    params = SystemParams(
        beta=float(raw["beta"]),
        T=float(raw["T"]),
        T_M=float(raw["T_M"]),
        lam=float(raw["lam"]),
        hitting_probs=_floats(raw["hitting"]),
        storage_override=None if override == "none" else float(override),
    )
    threshold = raw["threshold"]
    out = raw["out"]
    return ExperimentConfig(
        params=params,
        strategies=_names(raw["strategies"]),
        sweep=raw["sweep"],
        grid=_floats(raw["grid"]),
        mc_slots=int(raw["mc_slots"]),
        mc_strategies=_names(raw["mc_strategies"]),
        seed=int(raw["seed"]),
        bound_k=int(raw["bound_k"]),
        genie=raw["genie"] not in ("0", "false", ""),
        allow_infeasible=raw["allow_infeasible"] not in ("0", "false", ""),
        deltas=_floats(raw["deltas"]),
        policy=raw["policy"],
        threshold=None if threshold == "none" else float(threshold),
        out=None if out == "none" else out,
        fmt=raw["format"],
    )


def config_hash(raw: dict) -> str:
    """Short provenance hash of the effective flat config.

    Presentation keys (destination, serialization) are excluded so the same
    experiment hashes identically wherever its output lands.
    """
    effective = dict(DEFAULTS)
    effective.update({k: str(v) for k, v in raw.items()})
    canon = "\n".join(
        f"{k}={effective[k]}"
        for k in sorted(effective)
        if k not in ("out", "format")
    )
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _no_interference(params: SystemParams) -> SystemParams:
    if params.K == 0:
        return params
    return replace(params, hitting_probs=(1.0,))


def _blank_row(sweep_value: float, lam: float, strategy: str) -> dict:
    row = {name: "" for name in COLUMNS}
    row["sweep"] = sweep_value
    row["lam"] = lam
    row["strategy"] = strategy
    row["status"] = "ok"
    return row


def _analytic_fill(row: dict, strategy: str, params: SystemParams, bound_k: int) -> None:
    """Fill the analytic columns for one strategy at one sweep point."""
    base = _no_interference(params)
    fixed = ThresholdPolicy.fixed(ml_fixed_threshold(base.M, base.lam))
    # The count bound is an interference-free construct; fill it only there.
    n_bound = increment_count_bound(base, fixed) if params.K == 0 else ""
    if strategy == "S1":
        if params.K == 0:
            row["pe"] = pe_strategy1(base).pe_total
        else:
            row["pe"] = exact_pe_isi(
                params, IncrementSchedule(()), fixed, params.K
            ).pe_total
        row["J"] = 0
        row["n_bound"] = n_bound
    elif strategy == "S2":
        schedule, _ = solve_increments(base, fixed)
        row["pe"] = pe_schedule(base, schedule, fixed).pe_total
        lower, upper = pe_bounds(base, fixed)
        row["pe_lower"], row["pe_upper"] = lower, upper
        row["J"] = schedule.J
        row["n_bound"] = n_bound
    elif strategy == "S3":
        sol = optimize_strategy3(base)
        row["pe"] = sol.pe.pe_total
        row["J"] = sol.schedule.J
        row["n_bound"] = n_bound
    elif strategy == "S4":
        sol = optimize_strategy4(base)
        row["pe"] = sol.pe.pe_total
        row["J"] = sol.schedule.J
        row["n_bound"] = n_bound
    elif strategy == "S5":
        if params.K == 1:
            row["pe"] = strategy5_exact_pe_1isi(params).pe_total
            lower, upper = strategy5_pe_bounds_1isi(params, bound_k)
            row["pe_lower"], row["pe_upper"] = lower, upper
        row["J"] = 0
    elif strategy == "S6":
        spec = make_strategy("S6", params)
        row["pe"] = exact_pe_isi(params, spec.schedule, spec.policy, params.K).pe_total
        row["J"] = spec.schedule.J
    else:
        raise ParameterError(f"unknown strategy name {strategy!r}")


def _mc_fill(row: dict, strategy: str, params: SystemParams, config, seed: int) -> None:
    spec = make_strategy(strategy, params)
    # Sub-optimal interference schedules overdraw storage by construction;
    # the sweep runner overrides the hard failure and reports the count.
    allow = config.allow_infeasible or strategy == "S6"
    report = simulate(
        spec, params, config.mc_slots, seed, genie=config.genie, allow_infeasible=allow
    )
    row["ber"] = report.ber
    row["ci"] = report.ci_half_width
    if report.feasibility_violations:
        row["status"] = f"storage_violations={report.feasibility_violations}"


def _point_params(config: ExperimentConfig, value: float) -> SystemParams:
    if config.sweep == "lam":
        return config.params.with_noise(value)
    if config.sweep == "B_M":
        return config.params.with_storage(value)
    return config.params


def run_sweep(config: ExperimentConfig) -> list:
    """One row per (sweep value, strategy); solver failures flag the row."""
    rows = []
    mc_index = 0
    for value in config.grid:
        params = _point_params(config, value)
        for strategy in config.strategies:
            row = _blank_row(value, params.lam, strategy)
            try:
                if config.sweep == "k":
                    if strategy != "S5":
                        raise ParameterError("k-truncation sweep applies to S5 only")
                    lower, upper = strategy5_pe_bounds_1isi(params, int(value))
                    row["pe_lower"], row["pe_upper"] = lower, upper
                else:
                    _analytic_fill(row, strategy, params, config.bound_k)
                if config.sweep != "k" and config.wants_mc(strategy):
                    _mc_fill(row, strategy, params, config, config.seed + mc_index)
                    mc_index += 1
            except (ParameterError, FeasibilityError, NumericError) as exc:
                row["status"] = f"error:{type(exc).__name__}:{exc}"
            rows.append(row)
    return rows


def compare(config: ExperimentConfig) -> list:
    """Strategy-ordering table with pairwise pe ratios per sweep point.

    Each row carries pe_<name> for every configured strategy, the ratios for
    the expected-ordering pairs that are present, and a violations cell
    listing the pairs whose observed order contradicts the expectation
    (``none`` otherwise). S5 with two-symbol memory has no analytic pe, so
    its Monte Carlo estimate stands in when available.
    """
    pairs = [
        (a, b)
        for a, b in EXPECTED_CHAIN
        if a in config.strategies and b in config.strategies
    ]
    columns = (
        ["sweep", "lam"]
        + [f"pe_{s}" for s in config.strategies]
        + [f"ratio_{a}_{b}" for a, b in pairs]
        + ["violations"]
    )
    sweep_rows = run_sweep(config)
    rows = []
    for value in config.grid:
        params = _point_params(config, value)
        row = {name: "" for name in columns}
        row["sweep"], row["lam"] = value, params.lam
        pe = {}
        for srow in sweep_rows:
            if srow["sweep"] != value:
                continue
            point = srow["pe"] if srow["pe"] != "" else srow["ber"]
            if point != "":
                pe[srow["strategy"]] = point
                row[f"pe_{srow['strategy']}"] = point
        violations = []
        for a, b in pairs:
            if a in pe and b in pe:
                row[f"ratio_{a}_{b}"] = pe[a] / pe[b]
                if pe[a] > pe[b]:
                    violations.append(f"{a}>{b}")
        row["violations"] = ";".join(violations) if violations else "none"
        rows.append(row)
    return columns, rows


def figure_config(name: str, overrides: dict | None = None) -> tuple:
    """Effective (raw config dict, ExperimentConfig) for a figure preset."""
    if name not in FIGURE_NAMES:
        raise ParameterError(f"unknown figure {name!r}; choose from {FIGURE_NAMES}")
    presets = {
        "fig4": {
            "sweep": "lam",
            "grid": "3,5,7,9,11,13,15",
            "strategies": "S1,S2,S3,S4",
        },
        "fig5": {
            "sweep": "B_M",
            "grid": "10,15,20,25,30,35,40,45,50,55,60,65,70,75,80",
            "lam": "15",
            "strategies": "S1,S2,S3,S4",
        },
        "fig6": {
            "sweep": "B_M",
            "grid": "5,10,15,20,25,30,35,40,45,50,55,60,65,70,75,80",
            "strategies": "S2",
        },
        "fig7": {
            "sweep": "lam",
            "grid": "3,5,7,9,11,13,15",
            "strategies": "S1,S4,S5,S6",
            "hitting": "0.9,0.1",
            "mc_slots": "200000",
            "mc_strategies": "S5",
        },
        "fig8": {
            "sweep": "lam",
            "grid": "3,5,7,9,11,13,15",
            "strategies": "S1,S4,S5,S6",
            "hitting": "0.8,0.15,0.05",
            "mc_slots": "200000",
            "mc_strategies": "S5",
        },
    }
    raw = dict(presets[name])
    raw.update(overrides or {})
    return raw, build_config(raw)


def figure_dataset(name: str, overrides: dict | None = None) -> tuple:
    """Rows for one figure preset; fig6 stacks a B_M sweep per noise level."""
    raw, config = figure_config(name, overrides)
    if name == "fig6":
        rows = []
        for lam in (3.0, 7.0, 11.0, 15.0):
            rows.extend(run_sweep(replace(config, params=config.params.with_noise(lam))))
        return raw, list(COLUMNS), rows
    return raw, list(COLUMNS), run_sweep(config)


def format_cell(value) -> str:
    """Canonical %.12g cell rendering shared by CSV and JSON outputs."""
    if value == "":
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".12g")


def csv_lines(columns, rows, version: str, cfg_hash: str) -> list:
    """Delimited dataset with the versioned provenance header comment."""
    lines = [f"# relmod {version} config={cfg_hash}", ",".join(columns)]
    for row in rows:
        lines.append(",".join(format_cell(row[c]) for c in columns))
    return lines
