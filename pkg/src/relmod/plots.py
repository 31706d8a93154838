"""Render figure datasets to PNG files next to their delimited output.

The datasets are already plot-ready; this module only draws them. Cells are
the row dicts produced by experiments.figure_dataset. The error-rate
figures are semilog plots per strategy; the bound figure plots the
increment-count bound per noise level. Rendering never changes a number.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .core import ParameterError

STRATEGY_STYLE = {
    "S1": ("tab:blue", "o"),
    "S2": ("tab:orange", "s"),
    "S3": ("tab:green", "^"),
    "S4": ("tab:red", "v"),
    "S5": ("tab:purple", "D"),
    "S6": ("tab:brown", "x"),
}

AXIS_LABEL = {"lam": "noise level", "B_M": "storage budget", "k": "truncation depth"}


def _series(rows, strategy, x_key, y_key):
    xs, ys = [], []
    for row in rows:
        if row["strategy"] == strategy and row[y_key] != "":
            xs.append(float(row[x_key]))
            ys.append(float(row[y_key]))
    return xs, ys


def _render_error_rates(rows, sweep_axis, ax):
    strategies = []
    for row in rows:
        if row["strategy"] not in strategies:
            strategies.append(row["strategy"])
    for strategy in strategies:
        color, marker = STRATEGY_STYLE.get(strategy, ("gray", "."))
        xs, ys = _series(rows, strategy, "sweep", "pe")
        if xs:
            ax.semilogy(xs, ys, color=color, marker=marker, label=strategy)
        xLo, lo = _series(rows, strategy, "sweep", "pe_lower")
        xHi, hi = _series(rows, strategy, "sweep", "pe_upper")
        if xLo and xLo == xHi:
            ax.fill_between(xLo, lo, hi, color=color, alpha=0.2, label=f"{strategy} bounds")
        xb, ber = _series(rows, strategy, "sweep", "ber")
        if xb:
            _, ci = _series(rows, strategy, "sweep", "ci")
            ax.errorbar(
                xb,
                ber,
                yerr=ci,
                fmt=marker,
                color=color,
                linestyle="none",
                markerfacecolor="none",
                label=f"{strategy} MC",
            )
    ax.set_xlabel(AXIS_LABEL.get(sweep_axis, sweep_axis))
    ax.set_ylabel("error probability")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()


def _render_bound(rows, ax):
    lams = []
    for row in rows:
        if row["lam"] not in lams:
            lams.append(row["lam"])
    for lam in lams:
        xs = [float(r["sweep"]) for r in rows if r["lam"] == lam and r["n_bound"] != ""]
        ys = [float(r["n_bound"]) for r in rows if r["lam"] == lam and r["n_bound"] != ""]
        ax.step(xs, ys, where="post", marker=".", label=f"noise {lam:g}")
    ax.set_xlabel(AXIS_LABEL["B_M"])
    ax.set_ylabel("bound on positive increments")
    ax.grid(True, alpha=0.3)
    ax.legend()


def render_figure(name: str, rows, sweep_axis: str, path: str) -> str:
    """Draw one figure dataset to a PNG file and return the path."""
    if not rows:
        raise ParameterError(f"no rows to render for {name}")
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    try:
        if name == "fig6":
            _render_bound(rows, ax)
        else:
            _render_error_rates(rows, sweep_axis, ax)
        ax.set_title(name)
        fig.tight_layout()
        fig.savefig(path, dpi=150)
    finally:
        plt.close(fig)
    return path
