"""Figures rendered alongside the delimited reports.

Every experiment report maps to one PNG: a histogram of observed
matricization ranks against the theoretical bound, plus a residual
distribution panel for gap experiments.  Uses the Agg backend so rendering
works headless; figures are derived from report data only and never feed
back into it.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from tensorcircuits.experiments import ExperimentReport

__all__ = ["render_report_figure"]


def render_report_figure(report: ExperimentReport, path) -> None:
    """Render an experiment report to an image file."""
    residuals = [
        r.residual for r in report.records if r.residual is not None and r.residual > 0
    ]
    n_panels = 2 if residuals else 1
    fig, axes = plt.subplots(1, n_panels, figsize=(5.0 * n_panels, 3.6))
    if n_panels == 1:
        axes = [axes]

    ranks = [r.observed_rank for r in report.records]
    bound = report.records[0].bound
    lo, hi = min(ranks + [bound]), max(ranks + [bound])
    bins = np.arange(lo - 0.5, hi + 1.5)
    axes[0].hist(ranks, bins=bins, color="steelblue", edgecolor="white")
    axes[0].axvline(bound, color="crimson", linestyle="--", label=f"bound = {bound}")
    axes[0].set_xlabel("observed matricization rank")
    axes[0].set_ylabel("trials")
    axes[0].legend(frameon=False)

    if residuals:
        axes[1].hist(
            np.log10(residuals), bins=20, color="darkseagreen", edgecolor="white"
        )
        axes[1].set_xlabel("log10 residual from the rank-limited matrix set")
        axes[1].set_ylabel("trials")

    fig.suptitle(
        f"{report.config.kind}: {report.trials} trials, "
        f"{report.failures} failures"
    )
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
