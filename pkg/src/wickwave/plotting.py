"""Static one-page SVG summaries with reproducible bytes."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed salt and no timestamp so reruns produce identical files
matplotlib.rcParams["svg.hashsalt"] = "wickwave"
matplotlib.rcParams["svg.fonttype"] = "none"


def write_svg(path, plot: dict, title: str, checks=()) -> None:
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    x = plot.get("x", [])
    for label, ys in plot.get("series", {}).items():
        ax.plot(x[: len(ys)], ys, marker="o", ms=3, lw=1, label=label)
    if plot.get("logx"):
        ax.set_xscale("log")
    if plot.get("logy"):
        ax.set_yscale("log")
    ax.set_xlabel(plot.get("xlabel", ""))
    ax.set_ylabel(plot.get("ylabel", ""))
    ax.set_title(title)
    if plot.get("series"):
        ax.legend(fontsize=7)
    lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.criterion}: {c.value:.4g} ({c.threshold})" for c in checks]
    if lines:
        fig.text(0.01, 0.01, "\n".join(lines), fontsize=6, family="monospace", va="bottom")
        fig.subplots_adjust(bottom=0.12 + 0.035 * len(lines))
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
