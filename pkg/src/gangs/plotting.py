"""Figures for run reports, written as SVG through matplotlib's Agg backend.

Colour conventions follow the usual toy-GAN plots: the classifier surface runs
from red (fake, 0) to blue (real, 1), real data is black, generated data green.
SVG output is made reproducible by fixing the hash salt and dropping the date.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.linewidth": 0.6,
    "lines.linewidth": 1.2,
    "svg.hashsalt": "gangs",
    "svg.fonttype": "none",
}

SURFACE_CMAP = "RdBu"
REAL_COLOR = "black"
FAKE_COLOR = "#2ca02c"


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def convergence_figure(report, path) -> Path:
    """u_BRs and both security payoffs against PNM iteration."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        it = [r["iteration"] for r in report.series]
        ax.plot(it, report.u_brs_series, color="k", label="payoff for tests ($u_{BRs}$)")
        sec = report.security_series
        ax.plot(it, [s[0] for s in sec], color="tab:green", label=r"$\mu_G$ vs new classifier")
        ax.plot(it, [s[1] for s in sec], color="tab:blue", label=r"$\mu_C$ vs new generator")
        ax.axhline(0.0, color="0.6", linewidth=0.6, linestyle=":")
        ax.set_xlabel("PNM iteration")
        ax.set_ylabel("payoff")
        if report.series:
            ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def scatter_figure(report, path, max_points: int = 1000) -> Path:
    """Classifier surface underlay with real and generated samples on top."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 4.0))
        box = report.surface_box
        ax.imshow(report.surface, origin="lower", cmap=SURFACE_CMAP, vmin=0.0, vmax=1.0,
                  extent=(box.lo[0], box.hi[0], box.lo[1], box.hi[1]), aspect="auto",
                  interpolation="nearest")
        real = report.real_samples[:max_points]
        fake = report.fake_samples[:max_points]
        if len(real):
            ax.scatter(real[:, 0], real[:, 1], s=2, c=REAL_COLOR, linewidths=0, label="real")
        if len(fake):
            ax.scatter(fake[:, 0], fake[:, 1], s=2, c=FAKE_COLOR, linewidths=0, label="generated")
        ax.set_xlim(box.lo[0], box.hi[0])
        ax.set_ylim(box.lo[1], box.hi[1])
        fig.tight_layout()
        return _save(fig, path)
