"""Figure rendering for experiment results.

Renders PNG figures next to the delimited output: convergence curves,
a per-algorithm comparison chart, and (when an exhaustive enumeration
was run) a load-vs-time scatter. Uses the Agg backend so it works
headless; figures are a view of the CSV data, never an input to it.
"""

from __future__ import annotations

from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .harness import ComparisonTable, CorrelationReport, ExperimentResult  # noqa: E402


def plot_convergence(result: ExperimentResult, path: Union[str, Path]) -> Path:
    """Best objective so far per generation, one line per run."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    names = []
    for log in result.logs:
        if log.algorithm not in names:
            names.append(log.algorithm)
    for record, log in zip(result.records, result.logs):
        xs = [g.generation for g in log.records]
        ys = [float(g.best_so_far) for g in log.records]
        c = colors[names.index(log.algorithm) % len(colors)]
        label = log.algorithm if record.rep == 0 else None
        if len(xs) == 1:
            ax.axhline(ys[0], color=c, linestyle=":", linewidth=1.0, label=label)
        else:
            ax.plot(xs, ys, color=c, linewidth=1.0, alpha=0.7, label=label)
    ax.set_xlabel("generation")
    ax.set_ylabel("best objective (cycles)")
    ax.set_title("convergence")
    ax.legend(loc="upper right", fontsize="small")
    ax.grid(True, linewidth=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_comparison(result: ExperimentResult, path: Union[str, Path]) -> Path:
    """Mean objective per algorithm with best/worst whiskers."""
    path = Path(path)
    table = ComparisonTable.from_records(result.records)
    names = [r.algorithm for r in table.rows]
    means = [r.mean for r in table.rows]
    low = [r.mean - r.best for r in table.rows]
    high = [r.worst - r.mean for r in table.rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(names)), means, yerr=[low, high], capsize=4,
           color="tab:blue", alpha=0.8)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylabel("objective (cycles)")
    ax.set_title("algorithm comparison (mean, best..worst)")
    ax.grid(True, axis="y", linewidth=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_correlation(report: CorrelationReport, path: Union[str, Path]) -> Path:
    """Analytic peak load vs simulated time over a full enumeration."""
    path = Path(path)
    finite = [r for r in report.records if float(r.objective) != float("inf")]
    xs = [r.makespan for r in finite]
    ys = [float(r.objective) for r in finite]
    cs = [r.imbalance for r in finite]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    sc = ax.scatter(xs, ys, c=cs, s=8, cmap="viridis", alpha=0.7)
    fig.colorbar(sc, ax=ax, label="imbalance (cycles)")
    ax.set_xlabel("peak processor load (cycles)")
    ax.set_ylabel("simulated objective (cycles)")
    ax.set_title(f"load vs time, r = {report.pearson_makespan:.3f}")
    ax.grid(True, linewidth=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_figures(result: ExperimentResult, out_dir: Union[str, Path]) -> list[Path]:
    """Render every figure that applies to this result."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if result.logs:
        written.append(plot_convergence(result, out / "convergence.png"))
        written.append(plot_comparison(result, out / "comparison.png"))
    if result.correlation is not None:
        written.append(plot_correlation(result.correlation, out / "correlation.png"))
    return written
