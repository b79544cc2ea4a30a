"""Matplotlib figure rendering for the report path.

Figures are derived from the delimited outputs (trace and map CSVs), never
the other way around: the CSVs stay the primary artifact and remain usable
with any plotting tool.  Rendering uses the Agg backend and fixed styling so
repeated runs produce identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .kinematics import JOINT_NAMES

_DPI = 110


def _save(fig, path: Path) -> None:
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def plot_axis_trace(trace, axis: str, title: str, path: Path) -> None:
    """Desired vs. actual on the driven axis plus the tracking error."""
    col = JOINT_NAMES.index(axis)
    unit = "m" if axis in ("x", "y", "z") else "rad"
    err_scale = 1000.0 if unit == "m" else 1.0
    err_unit = "mm" if unit == "m" else "rad"
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    ax0.plot(trace.t, trace.desired[:, col], label="desired", lw=1.2)
    ax0.plot(trace.t, trace.actual[:, col], label="actual", lw=0.9)
    ax0.axvline(trace.motion_end, color="gray", lw=0.7, ls="--")
    ax0.set_ylabel(f"{axis} ({unit})")
    ax0.legend(loc="best", fontsize=8)
    ax0.set_title(title)
    err = (trace.actual[:, col] - trace.desired[:, col]) * err_scale
    ax1.plot(trace.t, err, lw=0.9, color="tab:red")
    ax1.axvline(trace.motion_end, color="gray", lw=0.7, ls="--")
    ax1.set_xlabel("t (s)")
    ax1.set_ylabel(f"error ({err_unit})")
    fig.tight_layout()
    _save(fig, path)


def plot_coupling(trace, title: str, path: Path) -> None:
    """Off-axis wander of the differential pair (z during y motion and vice versa)."""
    fig, ax = plt.subplots(figsize=(7, 3))
    for axis in ("y", "z"):
        col = JOINT_NAMES.index(axis)
        dev = (trace.actual[:, col] - trace.desired[:, col]) * 1000.0
        ax.plot(trace.t, dev, lw=0.9, label=f"{axis} deviation")
    ax.axvline(trace.motion_end, color="gray", lw=0.7, ls="--")
    ax.set_xlabel("t (s)")
    ax.set_ylabel("deviation (mm)")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def plot_path_xy(trace, title: str, path: Path) -> None:
    """Desired vs. actual path projected on the X-Y plane."""
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    ax.plot(trace.desired[:, 0], trace.desired[:, 1], lw=1.2, label="desired")
    ax.plot(trace.actual[:, 0], trace.actual[:, 1], lw=0.8, label="actual")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_aspect("equal")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def plot_position_error(trace, title: str, path: Path) -> None:
    """Euclidean position error over time (mm)."""
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.plot(trace.t, trace.position_error() * 1000.0, lw=0.9, color="tab:red")
    ax.axvline(trace.motion_end, color="gray", lw=0.7, ls="--")
    ax.set_xlabel("t (s)")
    ax.set_ylabel("position error (mm)")
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def plot_map_slice(map_csv: Path, title: str, path: Path) -> None:
    """Manipulability heatmap of the mid-z slice with boundary cells marked."""
    data = np.loadtxt(map_csv, delimiter=",", skiprows=1)
    xs = np.unique(data[:, 0])
    ys = np.unique(data[:, 1])
    zs = np.unique(data[:, 2])
    z_mid = zs[len(zs) // 2]
    sel = data[:, 2] == z_mid
    rows = data[sel]
    manip = np.full((len(xs), len(ys)), np.nan)
    bx, by = [], []
    ix = np.searchsorted(xs, rows[:, 0])
    iy = np.searchsorted(ys, rows[:, 1])
    for k in range(len(rows)):
        manip[ix[k], iy[k]] = rows[k, 3] if rows[k, 5] else np.nan
        if rows[k, 6]:
            bx.append(rows[k, 0])
            by.append(rows[k, 1])
    fig, ax = plt.subplots(figsize=(6, 5))
    extent = (xs[0], xs[-1], ys[0], ys[-1])
    im = ax.imshow(manip.T, origin="lower", extent=extent, aspect="equal", cmap="viridis")
    if bx:
        ax.scatter(bx, by, s=6, c="red", marker="s", label="boundary")
        ax.legend(loc="best", fontsize=8)
    fig.colorbar(im, ax=ax, label="manipulability")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title(f"{title} (z = {z_mid:.3g} m)")
    fig.tight_layout()
    _save(fig, path)


def plot_speed_table(report: dict, title: str, path: Path) -> None:
    """Commanded vs. achieved speed bars per axis."""
    rows = report.get("speed_table", [])
    if not rows:
        return
    axes = [r["axis"] for r in rows]
    idx = np.arange(len(rows))
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.bar(idx - 0.2, [r["commanded"] for r in rows], width=0.4, label="commanded")
    ax.bar(idx + 0.2, [r["achieved"] for r in rows], width=0.4, label="achieved")
    for i, r in enumerate(rows):
        ax.text(i, max(r["commanded"], r["achieved"]) + 0.02, f"{r['percent_error']}%",
                ha="center", fontsize=8)
    ax.set_xticks(idx, axes)
    ax.set_ylabel("speed (m/s or rad/s)")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)
