"""Static SVG renderings computed from the emitted CSVs only."""

from __future__ import annotations

import io
from collections import defaultdict

from .output import read_csv, write_atomic


def _figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "v2xrb"
    return plt


def _save(plt, fig, svg_path):
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return write_atomic(svg_path, buf.getvalue())


def render_curves(csv_path, svg_path):
    header, rows = read_csv(csv_path)
    c = [float(r[0]) for r in rows]
    plt = _figure()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(c, [float(r[1]) for r in rows], label="w_v (speed)")
    ax.plot(c, [float(r[2]) for r in rows], label="w_d (distance)")
    ax.set_xlabel("context")
    ax.set_ylabel("weight")
    ax.legend()
    return _save(plt, fig, svg_path)


def render_heatmap(csv_path, svg_path):
    header, rows = read_csv(csv_path)
    n_bins = max(int(r[0]) for r in rows) + 1
    n_arm = max(int(r[1]) for r in rows)
    grid = [[0.0] * n_bins for _ in range(n_arm)]
    for r in rows:
        grid[int(r[1]) - 1][int(r[0])] = float(r[3])
    plt = _figure()
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(grid, origin="lower", aspect="auto", extent=(0, n_bins, 0, 1))
    fig.colorbar(im, ax=ax, label="reward sum")
    ax.set_xlabel("distance context bin")
    ax.set_ylabel("arm weight")
    return _save(plt, fig, svg_path)


def render_converge(csv_paths: dict, svg_path):
    plt = _figure()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    optimal = None
    for label, path in csv_paths.items():
        header, rows = read_csv(path)
        ax.plot([int(r[0]) for r in rows], [float(r[1]) for r in rows], lw=0.6, label=label)
        optimal = [float(r[2]) for r in rows], [int(r[0]) for r in rows]
    if optimal:
        ax.plot(optimal[1], optimal[0], "k--", label="optimal")
    ax.set_xlabel("round")
    ax.set_ylabel("chosen distance weight")
    ax.legend()
    return _save(plt, fig, svg_path)


def render_tau(csv_path, svg_path):
    header, rows = read_csv(csv_path)
    series = defaultdict(list)
    for r in rows:
        series[float(r[1])].append((int(r[0]), float(r[2])))
    plt = _figure()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for ar, pts in sorted(series.items(), reverse=True):
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"AR = {ar:g}")
    ax.set_xlabel("competing vehicles in carrier-sense range")
    ax.set_ylabel("transmission probability")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    return _save(plt, fig, svg_path)
