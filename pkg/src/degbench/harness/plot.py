"""Deterministic SVG line charts from sweep CSVs."""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from degbench.harness.sweep import SweepError, read_csv  # noqa: E402

MARGIN = 0.05


def axis_range(values) -> tuple[float, float]:
    """Data min/max widened by 5% of the span (or of the magnitude when flat)."""
    lo, hi = min(values), max(values)
    span = hi - lo
    if span == 0:
        span = abs(lo) if lo != 0 else 1.0
    return lo - MARGIN * span, hi + MARGIN * span


def load_series(csv_path, metric: str, x_key: str = "param"):
    header, rows = read_csv(csv_path)
    if not rows:
        raise SweepError(f"{csv_path}: no data rows")
    for key in (metric, x_key, "model"):
        if key not in header:
            raise SweepError(f"{csv_path}: column {key!r} missing (have {header})")
    panels: dict[str, dict[str, list[tuple[float, float]]]] = defaultdict(lambda: defaultdict(list))
    for r in rows:
        y = float(r[metric])
        panels[r.get("degradation", "")][r["model"]].append((float(r[x_key]), y))
    return panels


def emit_plot(csv_path: str | Path, out_path: str | Path, metric: str = "top1") -> list[dict]:
    """Write an SVG with one panel per degradation and one series per model.

    Returns the axis limits actually used, one dict per panel.
    """
    x_key = "eps" if "eps" in read_csv(csv_path)[0] else "param"
    panels = load_series(csv_path, metric, x_key)
    names = sorted(panels)
    plt.rcParams["svg.hashsalt"] = "degbench"
    fig, axes = plt.subplots(len(names), 1, figsize=(6, 3.2 * len(names)), squeeze=False)
    limits = []
    for ax, deg in zip(axes[:, 0], names):
        series = panels[deg]
        xs = [p[0] for s in series.values() for p in s]
        ys = [p[1] for s in series.values() for p in s if p[1] == p[1] and abs(p[1]) != float("inf")]
        for model in sorted(series):
            pts = sorted(series[model])
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=model)
        xlim, ylim = axis_range(xs), axis_range(ys or [0.0])
        ax.set_xlim(*xlim)
        ax.set_ylim(*ylim)
        ax.set_xlabel(x_key if not deg else f"{deg} {x_key}")
        ax.set_ylabel(metric)
        ax.legend(fontsize="small")
        limits.append({"panel": deg, "xlim": xlim, "ylim": ylim})
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return limits
