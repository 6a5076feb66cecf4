"""Static SVG figures for run reports (matplotlib, Agg backend).

Files are reproducible byte for byte: the SVG hash salt is fixed and the
date metadata is dropped.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["make_plots"]

_RC = {"svg.hashsalt": "latticefibers", "svg.fonttype": "none"}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _ok(report):
    return [r for r in report.results if r["status"] == "ok"]


def _band_plot(report, out: Path) -> list:
    rows = _ok(report)
    if not rows:
        return []
    idx = range(len(rows))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(idx, [r["data"]["band_min"] for r in rows], "o-", label="E_min")
    ax.plot(idx, [r["data"]["band_max"] for r in rows], "s-", label="E_max")
    ax.set_xlabel("k index")
    ax.set_ylabel("energy")
    ax.legend()
    return [_save(fig, out / "band_edges.svg")]


def _ladder_plot(report, out: Path) -> list:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    drawn = False
    for r in _ok(report):
        d = r["data"]
        lad = d if report.mode == "convergence" else d.get("ladder")
        if lad is None:
            continue
        totals = [a + b for a, b in lad["counts"]]
        label = "k=(" + ", ".join(f"{x:.3g}" for x in r["k"]) + ")"
        ax.plot(lad["radii"], totals, "o-", label=label)
        drawn = True
    if not drawn:
        plt.close(fig)
        return []
    ax.set_xlabel("radius R (margin shrinks along the ladder)")
    ax.set_ylabel("discrete eigenvalues")
    ax.legend(fontsize="small")
    return [_save(fig, out / "counts_vs_radius.svg")]


def _spectrum_plot(report, out: Path) -> list:
    series = {}
    for r in _ok(report):
        key = (tuple(r["k"]), r["delta"])
        series.setdefault(key, []).append((r["radius"], r["data"]["n_below"] + r["data"]["n_above"]))
    if not series:
        return []
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for (k, dl), pts in series.items():
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-",
                label="k=(" + ", ".join(f"{x:.3g}" for x in k) + f"), delta={dl:g}")
    ax.set_xlabel("radius R")
    ax.set_ylabel("discrete eigenvalues")
    ax.legend(fontsize="x-small")
    return [_save(fig, out / "counts_vs_radius.svg")]


def _bs_plot(report, out: Path) -> list:
    rows = _ok(report)
    if not rows:
        return []
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for r in rows:
        zs = [z["z"] for z in r["data"]["rows"]]
        ax.plot(zs, [z["count"] for z in r["data"]["rows"]], "o-",
                label="k=(" + ", ".join(f"{x:.3g}" for x in r["k"]) + ")")
    ax.set_xlabel("z")
    ax.set_ylabel("eigenvalues past z")
    ax.legend(fontsize="small")
    return [_save(fig, out / "bs_counts.svg")]


def _scan_plot(report, out: Path) -> list:
    rows = _ok(report)
    if not rows:
        return []
    fig, ax = plt.subplots(figsize=(6, 3.5))
    idx = list(range(len(rows)))
    ax.plot(idx, [r["data"]["n_below"] for r in rows], "o-", label="n_below")
    ax.plot(idx, [r["data"]["n_above"] for r in rows], "s-", label="n_above")
    flagged = [i for i, r in zip(idx, rows) if r["data"]["boundary"]]
    for i in flagged:
        ax.axvline(i, color="0.7", lw=0.8)
    ax.set_xlabel("k index (grey: A(k)=0)")
    ax.set_ylabel("count")
    ax.legend()
    return [_save(fig, out / "scan_counts.svg")]


_PLOTS = {
    "band": _band_plot,
    "spectrum": _spectrum_plot,
    "scan": _scan_plot,
    "dichotomy": _ladder_plot,
    "convergence": _ladder_plot,
    "bs-count": _bs_plot,
}


def make_plots(report, out_dir) -> list:
    """Draw the figures for ``report.mode``; returns the written paths."""
    fn = _PLOTS.get(report.mode)
    if fn is None:
        return []
    with plt.rc_context(_RC):
        return fn(report, Path(out_dir))
