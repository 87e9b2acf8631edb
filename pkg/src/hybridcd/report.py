"""Figure rendering for experiment results.

Writes one PNG per metric: recovery rate against sample size, one line per
method, log-scaled x axis. Uses the Agg backend so rendering works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .bench import BenchResults

STYLE = {
    "hybrid": {"color": "#1f6f8b", "marker": "o"},
    "hybrid_oracle": {"color": "#99582a", "marker": "s"},
    "pc_baseline": {"color": "#6a4c93", "marker": "^"},
}


def _curve(results: BenchResults, method: str, metric: str):
    ns, ys = [], []
    for c in results.cells:
        if c.method == method:
            value = getattr(c, metric)
            if value is not None:
                ns.append(c.n)
                ys.append(value)
    return ns, ys


def _render_metric(results: BenchResults, metric: str, title: str, path: Path) -> bool:
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    drew = False
    for method in results.config.methods:
        ns, ys = _curve(results, method, metric)
        if not ns:
            continue
        style = STYLE.get(method, {})
        ax.plot(ns, ys, label=method, linewidth=1.8, markersize=5.5, **style)
        drew = True
    if not drew:
        plt.close(fig)
        return False
    ax.set_xscale("log")
    ax.set_ylim(-0.03, 1.03)
    ax.set_xlabel("sample size")
    ax.set_ylabel(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return True


def render_figures(results: BenchResults, out_dir: str | Path, stem: str = "benchmark") -> list[Path]:
    """Write accuracy-vs-n figures; returns the paths actually created."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for metric, title in (
        ("dag_accuracy", "exact structure recovery rate"),
        ("skeleton_accuracy", "skeleton recovery rate"),
    ):
        path = out_dir / f"{stem}_{metric}.png"
        if _render_metric(results, metric, title, path):
            written.append(path)
    return written
