"""Figure rendering for benchmark CSVs.

Given rows produced by the bench harness, writes PNG figures next to the
CSV (or into a chosen directory): speedup against the unobserved fraction,
speedup against model size, and a runtime/overhead breakdown.  The CSV
stays the machine-readable boundary; figures are a convenience view.
"""

from __future__ import annotations

import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bench import read_csv


def _grouped(rows, key):
    groups = defaultdict(list)
    for r in rows:
        groups[key(r)].append(r)
    return groups


def _mean_std(rows, field):
    vals = np.array([float(r[field]) for r in rows])
    return float(vals.mean()), float(vals.std(ddof=1)) if len(vals) > 1 else 0.0


def _new_axes(xlabel, ylabel, title):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.35)
    return fig, ax


def _speedup_vs_fraction(rows, path):
    missing = [r for r in rows if r["scenario"] == "missing"]
    if len({r["param"] for r in missing}) < 2:
        return None
    groups = _grouped(missing, lambda r: float(r["param"]))
    xs = sorted(groups)
    means, stds = zip(*(_mean_std(groups[x], "speedup") for x in xs))
    fig, ax = _new_axes(
        "unobserved fraction f", "speedup", "Speedup from specialization vs. evidence"
    )
    ax.errorbar(xs, means, yerr=stds, marker="o", capsize=3)
    ax.axhline(1.0, color="gray", lw=0.8, ls="--")
    ax.set_ylim(bottom=0)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _speedup_vs_size(rows, path):
    sizes = _grouped(rows, lambda r: int(r["rv_count"]))
    if len(sizes) < 2:
        return None
    xs = sorted(sizes)
    means, stds = zip(*(_mean_std(sizes[x], "speedup") for x in xs))
    fig, ax = _new_axes("model size (ground RVs)", "speedup", "Speedup vs. model size")
    ax.errorbar(xs, means, yerr=stds, marker="s", capsize=3)
    ax.set_xscale("log")
    ax.axhline(1.0, color="gray", lw=0.8, ls="--")
    ax.set_ylim(bottom=0)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _runtimes(rows, path):
    groups = _grouped(rows, lambda r: (r["scenario"], r["param"], int(r["rv_count"])))
    labels, orig, spec_total, spec_only = [], [], [], []
    for key in sorted(groups):
        g = groups[key]
        labels.append(f"{key[0]}:{key[1]}\n{key[2]} RVs")
        orig.append(np.mean([float(r["t_sample_orig"]) for r in g]))
        spec_total.append(
            np.mean([float(r["t_spec"]) + float(r["t_sample_spec"]) for r in g])
        )
        spec_only.append(np.mean([float(r["t_spec"]) for r in g]))
    x = np.arange(len(labels))
    fig, ax = _new_axes("", "seconds (10k-sample run)", "Sampling runtime with and without specialization")
    width = 0.38
    ax.bar(x - width / 2, orig, width, label="no specialization")
    ax.bar(x + width / 2, spec_total, width, label="specialized (incl. t_spec)")
    ax.bar(x + width / 2, spec_only, width, color="black", alpha=0.6, label="t_spec share")
    ax.set_xticks(x, labels, fontsize=7)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_report(csv_path: str, out_dir: str | None = None) -> list[str]:
    """Render figures for a bench CSV; returns the paths written."""
    rows = read_csv(csv_path)
    if not rows:
        return []
    stem = os.path.splitext(os.path.basename(csv_path))[0]
    base = out_dir or os.path.dirname(os.path.abspath(csv_path))
    os.makedirs(base, exist_ok=True)
    written = []
    for fn, name in (
        (_speedup_vs_fraction, "speedup_vs_evidence"),
        (_speedup_vs_size, "speedup_vs_size"),
        (_runtimes, "runtimes"),
    ):
        path = os.path.join(base, f"{stem}_{name}.png")
        if fn(rows, path):
            written.append(path)
    return written
