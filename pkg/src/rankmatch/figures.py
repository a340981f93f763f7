"""Figure rendering for experiment result bundles.

One figure per experiment, written next to the result file.  Everything
draws from a ResultBundle, so figures can be re-rendered from a saved
bundle without re-running the experiment.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def aadr_figure(bundle, path) -> Path:
    """Per-step rank deviation curve with standard errors and the baseline."""
    steps = bundle.results["steps"]
    aadr = bundle.results["aadr"]
    se = bundle.results["se"]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.errorbar(steps, aadr, yerr=se, fmt="o-", markersize=3, capsize=2,
                label="at-arrival deviation")
    ax.axhline(bundle.summary["baseline"], color="gray", linestyle="--",
               linewidth=1, label=f"random baseline {bundle.summary['baseline']:.2f}")
    ax.set_xlabel("arrival step")
    ax.set_ylabel("mean |true rank - predicted rank|")
    ax.set_title(bundle.experiment)
    ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, Path(path))


def deviation_histogram_figure(bundle, path) -> Path:
    """Histogram of per-candidate rank deviations for the delayed experiment."""
    values = bundle.results["histogram_values"]
    counts = bundle.results["histogram_counts"]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.bar(values, counts, width=0.9)
    ax.axvline(bundle.summary["mean"], color="black", linestyle="-",
               linewidth=1, label=f"mean {bundle.summary['mean']:.2f}")
    ax.axvline(bundle.summary["baseline"], color="gray", linestyle="--",
               linewidth=1, label=f"random baseline {bundle.summary['baseline']:.2f}")
    ax.set_xlabel("|true rank - predicted rank|")
    ax.set_ylabel("candidates")
    ax.set_title(f"{bundle.experiment} ({bundle.summary['combined']})")
    ax.legend()
    return _save(fig, Path(path))


def bench_figure(bundle, path) -> Path:
    """Log-log runtime scaling of the naive and sparse grouped solvers."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    rows = bundle.results["bench"]
    for solver in ("naive", "sparse"):
        solver_rows = sorted((r for r in rows if r["solver"] == solver),
                             key=lambda r: r["size"])
        ax.plot([r["size"] for r in solver_rows],
                [r["median_ms"] for r in solver_rows],
                "o-", label=solver)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("group capacity n")
    ax.set_ylabel("median solve time (ms)")
    ax.set_title("grouped matching: naive vs sparsified")
    ax.legend()
    ax.grid(alpha=0.3, which="both")
    return _save(fig, Path(path))


def hire_figure(bundle, path) -> Path:
    """Distribution of hires per stream against the top_m target."""
    hires = np.asarray(bundle.results["hires"])
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    bins = np.arange(hires.min() - 0.5, hires.max() + 1.5)
    ax.hist(hires, bins=bins)
    ax.axvline(bundle.summary["top_m"], color="gray", linestyle="--",
               linewidth=1, label=f"top_m = {bundle.summary['top_m']}")
    ax.axvline(bundle.summary["mean_hires"], color="black", linewidth=1,
               label=f"mean {bundle.summary['mean_hires']:.1f}")
    ax.set_xlabel("hires per stream")
    ax.set_ylabel("streams")
    ax.set_title("hiring rule")
    ax.legend()
    return _save(fig, Path(path))


def rank_scatter_figure(bundle, path) -> Path:
    """True vs predicted final rank for a one-shot CSV ranking."""
    rows = bundle.results["candidates"]
    truth = [r["true_rank"] for r in rows]
    final = [r["final_rank"] for r in rows]
    arrival = [r["at_arrival_rank"] for r in rows]
    n = len(rows)
    fig, ax = plt.subplots(figsize=(4.8, 4.8))
    ax.plot([1, n], [1, n], color="gray", linewidth=1, zorder=0)
    ax.scatter(truth, arrival, s=14, alpha=0.6, label="at arrival")
    ax.scatter(truth, final, s=14, alpha=0.8, label="final")
    ax.set_xlabel("true rank")
    ax.set_ylabel("predicted rank")
    ax.set_title(f"ranking report (n = {n})")
    ax.legend()
    return _save(fig, Path(path))


_FIGURES = {
    "exp1": [("aadr", aadr_figure)],
    "exp2": [("aadr", aadr_figure)],
    "exp-delayed": [("histogram", deviation_histogram_figure)],
    "exp-sparse": [("bench", bench_figure)],
    "hire": [("hires", hire_figure)],
    "rank": [("ranks", rank_scatter_figure)],
}


def render_figures(bundle, out_path) -> list[Path]:
    """Render the bundle's figures next to its result file.

    For a result written to ``dir/name.ext`` the figures land at
    ``dir/name_<kind>.png``.
    """
    out = Path(out_path)
    written = []
    for kind, renderer in _FIGURES[bundle.experiment]:
        written.append(renderer(bundle, out.with_name(f"{out.stem}_{kind}.png")))
    return written
