"""Figure rendering for the CLI report paths.

Every helper writes a PNG next to the corresponding table and returns the
path.  The Agg backend is forced so the CLI works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def save_bloch_path(path, events, out_png):
    """3D Bloch-sphere rendering of a trajectory path with jump markers."""
    fig = plt.figure(figsize=(6, 6))
    ax = fig.add_subplot(projection="3d")
    u = np.linspace(0, 2 * np.pi, 40)
    v = np.linspace(0, np.pi, 20)
    ax.plot_wireframe(np.outer(np.cos(u), np.sin(v)),
                      np.outer(np.sin(u), np.sin(v)),
                      np.outer(np.ones_like(u), np.cos(v)),
                      color="0.85", linewidth=0.4)
    pts = path.points
    ax.plot(pts[:, 0], pts[:, 1], pts[:, 2], color="C0", linewidth=1.2)
    ax.scatter(*pts[0], color="C2", s=40, label="start")
    ax.scatter(*pts[-1], color="C3", s=40, label="end")
    if events:
        idx = np.searchsorted(path.times, [e.time for e in events])
        idx = np.clip(idx, 0, len(pts) - 1)
        ax.scatter(pts[idx, 0], pts[idx, 1], pts[idx, 2], color="C1", s=25,
                   marker="x", label="jump")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_zlabel("z")
    ax.set_box_aspect((1, 1, 1))
    ax.legend(loc="upper left", fontsize=8)
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return out_png


def save_trace_distance(times, distances, out_png):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(times, distances, marker="o", markersize=3, linewidth=1.0)
    ax.set_xlabel("time")
    ax.set_ylabel("trace distance")
    ax.set_title("ensemble average vs master equation")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return out_png


def save_report_fit(alphas, corrections, candidates, out_png):
    """Correction vs alpha scatter with the candidate scaling curves.

    ``candidates`` maps a legend label to a callable correction(alpha).
    """
    alphas = np.asarray(alphas, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(alphas, corrections, "ko", markersize=4, label="measured")
    grid = np.linspace(alphas.min(), alphas.max(), 200)
    for label, fn in candidates.items():
        ax.plot(grid, [fn(a) for a in grid], linewidth=1.0, label=label)
    ax.set_xlabel("alpha")
    ax.set_ylabel("geometric phase correction")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return out_png


def save_phase_histogram(values, out_png, label="geometric phase"):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(np.asarray(values, dtype=float), bins=36, range=(-np.pi, np.pi),
            color="C0", edgecolor="white")
    ax.set_xlabel(f"{label} (rad)")
    ax.set_ylabel("count")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
    return out_png
