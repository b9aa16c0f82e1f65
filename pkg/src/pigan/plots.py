"""Static SVG line plots of the per-figure CSV files (matplotlib, Agg backend)."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path


def _rows(path: Path) -> list[dict]:
    with open(path) as fh:
        return list(csv.DictReader(fh))


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "pigan"  # stable element ids
    return plt


def plot_run(out: Path) -> list[Path]:
    """Render every recognised CSV in ``out``; returns the SVG paths written."""
    out = Path(out)
    plt = _pyplot()
    written = []

    w1 = out / "fig4_w1_trace.csv"
    if w1.exists():
        series = defaultdict(lambda: defaultdict(list))
        for r in _rows(w1):
            series[r["seed"]][int(r["step"])].append(float(r["w1_gen_train"]))
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for seed, pts in sorted(series.items()):
            steps = sorted(pts)
            ax.plot(steps, [sum(pts[s]) / len(pts[s]) for s in steps], label=f"seed {seed}")
        ax.set_xlabel("training step")
        ax.set_ylabel("W1(generated, training)")
        ax.legend()
        written.append(_save(fig, out / "fig4_w1_trace.svg", plt))

    for spec in sorted(out.glob("*_spectra.csv")):
        rows = _rows(spec)
        if not rows:
            continue
        last = max(int(r["step"]) for r in rows)
        fields = sorted({r["field"] for r in rows})
        fig, axes = plt.subplots(1, len(fields), figsize=(4 * len(fields), 3.5), squeeze=False)
        for ax, name in zip(axes[0], fields):
            sel = [r for r in rows if r["field"] == name and int(r["step"]) == last and r["seed"] == rows[0]["seed"]]
            idx = [int(r["index"]) for r in sel]
            for col, style in (("generated", "o-"), ("training", "s--"), ("reference", "k-")):
                ax.semilogy(idx, [max(float(r[col]), 1e-16) for r in sel], style, label=col, ms=3)
            ax.set_title(f"{name}, step {last}")
            ax.set_xlabel("index")
            ax.legend()
        written.append(_save(fig, spec.with_suffix(".svg"), plt))

    for ms in sorted(out.glob("*_mean_std.csv")):
        rows = _rows(ms)
        if not rows:
            continue
        last = max(int(r["step"]) for r in rows)
        fields = sorted({r["field"] for r in rows})
        fig, axes = plt.subplots(1, len(fields), figsize=(4 * len(fields), 3.5), squeeze=False)
        for ax, name in zip(axes[0], fields):
            sel = [r for r in rows if r["field"] == name and int(r["step"]) == last and r["seed"] == rows[0]["seed"]]
            x = [float(r["x"]) for r in sel]
            ax.plot(x, [float(r["mean"]) for r in sel], "r-", label="mean")
            ax.plot(x, [float(r["reference_mean"]) for r in sel], "k--", label="reference mean")
            ax.plot(x, [float(r["std"]) for r in sel], "b-", label="std")
            ax.plot(x, [float(r["reference_std"]) for r in sel], "k:", label="reference std")
            ax.set_title(f"{name}, step {last}")
            ax.set_xlabel("x")
            ax.legend(fontsize="small")
        written.append(_save(fig, ms.with_suffix(".svg"), plt))
    return written


def _save(fig, path: Path, plt) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
