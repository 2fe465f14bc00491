"""Plain-text summary of the CSVs in a run directory."""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path

from degbench.harness.sweep import SweepError, read_csv


def _summarize_sweep(rows, metric: str) -> list[str]:
    groups = defaultdict(list)
    for r in rows:
        groups[(r["model"], r["degradation"])].append((float(r["param"]), float(r[metric])))
    out = []
    for (model, deg), pts in sorted(groups.items()):
        pts.sort()
        worst = min(pts, key=lambda p: p[1])
        out.append(f"  {model:28s} {deg:14s} first {pts[0][1]:.3f} @ {pts[0][0]:g}"
                   f"  last {pts[-1][1]:.3f} @ {pts[-1][0]:g}  min {worst[1]:.3f} @ {worst[0]:g}")
    return out


def _summarize_fgsm(rows) -> list[str]:
    return [f"  {r['model']:28s} eps {float(r['eps']):<6g} top1 {float(r['top1']):.3f}  psnr {r['mean_psnr']}"
            for r in rows]


def report(run_dir: str | Path) -> str:
    run_dir = Path(run_dir)
    csvs = sorted(run_dir.glob("*.csv"))
    if not csvs:
        raise SweepError(f"no CSV files in {run_dir}")
    lines = [f"run directory: {run_dir}"]
    for path in csvs:
        header, rows = read_csv(path)
        lines.append(f"\n{path.name} ({len(rows)} rows)")
        if "eps" in header:
            lines += _summarize_fgsm(rows)
        elif "ssim" in header:
            lines += _summarize_sweep(rows, "ssim")
        elif "top1" in header:
            lines += _summarize_sweep(rows, "top1")
    return "\n".join(lines) + "\n"
