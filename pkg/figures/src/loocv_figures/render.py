"""Render the calibration-study figures.

One image per figure kind, one panel per (n, beta_delta) cell:

* joint          - scatter of the estimate against its target with the
                   match diagonal
* moments        - relative mean and skewness curves against data size
* relative_error - quantile boxes of per-trial error / SD(target)
* se_ratio       - quantile boxes of per-trial naive SE / SD(error)
* pit            - PIT histograms with the uniformity envelope

Every plotted number comes from trials.csv / summary.json; images are
deterministic (fixed canvas, no timestamps).
"""

from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "loocv-figures"  # deterministic SVG ids

import matplotlib.pyplot as plt
from matplotlib.figure import Figure

from .spec import SUMMARY_FIELDS, TRIAL_COLUMNS, FigureSpec, load_summary, load_trials

PANEL_SIZE = (3.2, 2.6)
DIAGONAL_COLOR = "tab:green"
BAND_COLOR = "gold"
BAND_ALPHA = 0.45

__all__ = ["render"]


def _facets(spec: FigureSpec, present_n, present_beta, present_mu):
    n_values = list(spec.n_values) if spec.n_values is not None else [int(v) for v in present_n]
    beta_values = list(spec.beta_values) if spec.beta_values is not None else list(present_beta)
    if spec.mu_out is not None:
        mu = spec.mu_out
    else:
        mu = present_mu[0] if present_mu else 0.0
    return n_values, beta_values, mu


def _panel_grid(n_values, beta_values) -> tuple[Figure, np.ndarray]:
    rows, cols = len(beta_values), len(n_values)
    fig, axes = plt.subplots(
        rows,
        cols,
        figsize=(PANEL_SIZE[0] * cols, PANEL_SIZE[1] * rows),
        squeeze=False,
    )
    return fig, axes


def _no_data(ax) -> None:
    ax.text(0.5, 0.5, "no data", ha="center", va="center", transform=ax.transAxes, color="gray")
    ax.set_xticks([])
    ax.set_yticks([])


def _quantile_box(ax, values, color="tab:blue") -> None:
    q = np.percentile(values, [1, 25, 50, 75, 99])
    ax.add_patch(plt.Rectangle((0.35, q[1]), 0.3, max(q[3] - q[1], 1e-12), color=color, alpha=0.6))
    ax.vlines(0.5, q[0], q[4], color=color, lw=1.0)
    ax.hlines(q[2], 0.3, 0.7, color="black", lw=1.5)
    ax.hlines(float(np.mean(values)), 0.3, 0.7, color="gold", lw=1.5)
    ax.set_xlim(0.0, 1.0)
    ax.set_xticks([])


def _render_joint(spec: FigureSpec) -> Figure:
    data = load_trials(spec.trials_csv, TRIAL_COLUMNS["joint"])
    n_values, beta_values, mu = _facets(
        spec, data.facet_values("n"), data.facet_values("beta_delta"), data.facet_values("mu_out")
    )
    fig, axes = _panel_grid(n_values, beta_values)
    for i, beta in enumerate(beta_values):
        for j, n in enumerate(n_values):
            ax = axes[i, j]
            xs = data.select(n, beta, mu, "elpdhat")
            ys = data.select(n, beta, mu, "elpd_target")
            if not xs:
                _no_data(ax)
            else:
                ax.scatter(xs, ys, s=3, alpha=0.4, lw=0)
                lo = min(min(xs), min(ys))
                hi = max(max(xs), max(ys))
                ax.plot([lo, hi], [lo, hi], color=DIAGONAL_COLOR, lw=1.0)
            ax.set_title(f"n={n}, effect={beta:g}", fontsize=8)
    fig.supxlabel("estimate")
    fig.supylabel("target")
    fig.tight_layout()
    return fig


def _render_moments(spec: FigureSpec) -> Figure:
    cells = load_summary(spec.summary_json, SUMMARY_FIELDS["moments"])
    beta_values = sorted({c["beta_delta"] for c in cells}) if spec.beta_values is None else list(spec.beta_values)
    quantities = ("elpdhat", "elpd", "error")
    fig, axes = plt.subplots(2, 3, figsize=(PANEL_SIZE[0] * 3, PANEL_SIZE[1] * 2), squeeze=False)
    for col, name in enumerate(quantities):
        for beta in beta_values:
            sub = sorted((c for c in cells if c["beta_delta"] == beta), key=lambda c: c["n"])
            if not sub:
                continue
            ns = [c["n"] for c in sub]
            rel = [
                c[f"{name}_mean"] / c[f"{name}_sd"] if c[f"{name}_sd"] else float("nan") for c in sub
            ]
            skew = [c[f"{name}_skew"] for c in sub]
            axes[0, col].plot(ns, rel, marker="o", ms=3, label=f"effect={beta:g}")
            axes[1, col].plot(ns, skew, marker="o", ms=3)
        for row, ylab in ((0, "mean / sd"), (1, "skewness")):
            axes[row, col].set_xscale("log", base=2)
            axes[row, col].set_xlabel("n")
            axes[row, col].set_ylabel(ylab)
        axes[0, col].set_title(name, fontsize=9)
    if any(axes[0, 0].get_legend_handles_labels()[0] for _ in (0,)):
        axes[0, 0].legend(fontsize=7)
    fig.tight_layout()
    return fig


def _render_ratio_boxes(spec: FigureSpec, kind: str) -> Figure:
    value_col, sd_field = ("error", "elpd_sd") if kind == "relative_error" else ("se_hat", "error_sd")
    data = load_trials(spec.trials_csv, TRIAL_COLUMNS[kind])
    cells = load_summary(spec.summary_json, SUMMARY_FIELDS[kind])
    sd_by_cell = {(c["n"], c["beta_delta"], c["mu_out"]): c[sd_field] for c in cells}
    n_values, beta_values, mu = _facets(
        spec, data.facet_values("n"), data.facet_values("beta_delta"), data.facet_values("mu_out")
    )
    fig, axes = _panel_grid(n_values, beta_values)
    for i, beta in enumerate(beta_values):
        for j, n in enumerate(n_values):
            ax = axes[i, j]
            values = data.select(n, beta, mu, value_col)
            sd = sd_by_cell.get((n, beta, mu))
            if not values or not sd:
                _no_data(ax)
            else:
                _quantile_box(ax, np.asarray(values) / sd)
                ref = 0.0 if kind == "relative_error" else 1.0
                ax.axhline(ref, color="red", lw=0.8)
            ax.set_title(f"n={n}, effect={beta:g}", fontsize=8)
    label = "error / sd(target)" if kind == "relative_error" else "naive SE / sd(error)"
    fig.supylabel(label)
    fig.tight_layout()
    return fig


def _render_pit(spec: FigureSpec) -> Figure:
    cells = load_summary(spec.summary_json, SUMMARY_FIELDS["pit"])
    by_cell = {(c["n"], c["beta_delta"], c["mu_out"]): c for c in cells}
    present_n = sorted({c["n"] for c in cells})
    present_beta = sorted({c["beta_delta"] for c in cells})
    present_mu = sorted({c["mu_out"] for c in cells})
    n_values, beta_values, mu = _facets(spec, present_n, present_beta, present_mu)
    fig, axes = _panel_grid(n_values, beta_values)
    for i, beta in enumerate(beta_values):
        for j, n in enumerate(n_values):
            ax = axes[i, j]
            cell = by_cell.get((n, beta, mu))
            if cell is None:
                _no_data(ax)
                ax.set_title(f"n={n}, effect={beta:g}", fontsize=8)
                continue
            counts = cell["pit_normal_counts"]
            bins = len(counts)
            edges = np.arange(bins + 1) / bins
            ax.axhspan(cell["pit_band_lo"], cell["pit_band_hi"], color=BAND_COLOR, alpha=BAND_ALPHA)
            ax.bar(edges[:-1], counts, width=1.0 / bins, align="edge", color="tab:blue")
            ax.step(
                edges,
                list(cell["pit_bb_counts"]) + [cell["pit_bb_counts"][-1]],
                where="post",
                color="tab:red",
                lw=1.0,
            )
            ax.set_xlim(0.0, 1.0)
            ax.set_title(f"n={n}, effect={beta:g}", fontsize=8)
    fig.supxlabel("PIT (bars: normal, steps: Bayesian bootstrap)")
    fig.supylabel("count")
    fig.tight_layout()
    return fig


_RENDERERS = {
    "joint": _render_joint,
    "moments": _render_moments,
    "relative_error": lambda spec: _render_ratio_boxes(spec, "relative_error"),
    "se_ratio": lambda spec: _render_ratio_boxes(spec, "se_ratio"),
    "pit": _render_pit,
}


def render(spec: FigureSpec) -> Figure:
    """Draw the figure and write it to ``spec.output_path``.

    Returns the figure object (with its panel grid) for inspection; SVG
    output carries no creation date so byte output is reproducible.
    """
    fig = _RENDERERS[spec.kind](spec)
    metadata = {"Date": None} if spec.output_path.endswith(".svg") else None
    fig.savefig(spec.output_path, dpi=100, metadata=metadata)
    plt.close(fig)
    return fig
