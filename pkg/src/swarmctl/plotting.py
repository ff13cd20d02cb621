"""SVG figures.  Output is byte-stable: fixed hash salt, no date metadata."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402

K_COLORS = {1: "#1b9e77", 2: "#d95f02", 3: "#7570b3", 4: "#e7298a"}
_RC = {"svg.hashsalt": "swarmctl", "svg.fonttype": "path", "font.size": 9}


def _save(fig, path: str | Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def trajectory_svg(path: str | Path, xs, ys, ks, waypoints, grid_n: int = 300,
                   annotation: str = "", delta: float | None = None) -> None:
    """Channel outline, waypoints and the swarm track coloured by active transducer."""
    xs, ys, ks = np.asarray(xs, float), np.asarray(ys, float), np.asarray(ks, int)
    wp = np.asarray(waypoints, float).reshape(-1, 2)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.5, 5.5))
        ax.add_patch(plt.Rectangle((0, 0), grid_n - 1, grid_n - 1, fill=False, lw=1.2, ec="black"))
        if len(wp):
            ax.plot(wp[:, 0], wp[:, 1], ls=":", lw=0.8, color="grey", zorder=1)
            ax.scatter(wp[:, 0], wp[:, 1], s=10, marker="x", color="black", lw=0.8, zorder=3,
                       label="waypoints")
            if delta:
                r = float(np.sqrt(delta))
                for x, y in wp:
                    ax.add_patch(plt.Circle((x, y), r, fill=False, lw=0.3, ec="grey"))
        if len(xs) > 1:
            seg = np.stack([np.column_stack([xs[:-1], ys[:-1]]), np.column_stack([xs[1:], ys[1:]])], axis=1)
            colors = [K_COLORS.get(int(k), "black") for k in ks[:-1]]
            ax.add_collection(LineCollection(seg, colors=colors, linewidths=1.0, zorder=2))
        if len(xs):
            ax.plot(xs[0], ys[0], "o", ms=4, color="black", zorder=4)
        for k, c in K_COLORS.items():
            ax.plot([], [], color=c, lw=2, label=f"PZT {k}")
        ax.set_xlim(-5, grid_n + 4)
        ax.set_ylim(-5, grid_n + 4)
        ax.set_aspect("equal")
        ax.set_xlabel("x (cells)")
        ax.set_ylabel("y (cells)")
        ax.legend(loc="upper right", fontsize=7, frameon=False, ncol=5,
                  bbox_to_anchor=(1.0, 1.08), handlelength=1.2, columnspacing=0.8)
        if annotation:
            ax.text(0.02, 0.02, annotation, transform=ax.transAxes, fontsize=8,
                    bbox={"fc": "white", "ec": "grey", "lw": 0.5})
        _save(fig, path)


def error_curve_svg(path: str | Path, err_local, err_global, smooth: int = 25) -> None:
    """Local and global prediction error per control step, with a running mean."""
    el, eg = np.asarray(err_local, float), np.asarray(err_global, float)
    n = np.arange(len(el))
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 3.2))
        ax.plot(n, eg, lw=0.4, color="#d95f02", alpha=0.35)
        ax.plot(n, el, lw=0.4, color="#1b9e77", alpha=0.35)
        if len(el) >= smooth:
            kern = np.ones(smooth) / smooth
            m = n[smooth - 1:]
            ax.plot(m, np.convolve(eg, kern, "valid"), lw=1.4, color="#d95f02", label="global")
            ax.plot(m, np.convolve(el, kern, "valid"), lw=1.4, color="#1b9e77", label="local")
        else:
            ax.plot([], [], color="#d95f02", label="global")
            ax.plot([], [], color="#1b9e77", label="local")
        ax.set_xlabel("control step")
        ax.set_ylabel("prediction error (cells/s)")
        ax.set_xlim(0, max(1, len(el) - 1))
        ax.set_ylim(bottom=0)
        ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)


def resonance_svg(path: str | Path, records: np.ndarray, resonances=None) -> None:
    """Mean speed against drive frequency per transducer at the top voltage."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 3.2))
        vmax = float(np.max(records["v_pp"]))
        for k, c in K_COLORS.items():
            sel = records[(records["k"] == k) & (records["v_pp"] == vmax)]
            if len(sel) == 0:
                continue
            f = np.unique(sel["f_mhz"])
            sp = np.hypot(sel["dx_dt"], sel["dy_dt"])
            means = [float(np.mean(sp[sel["f_mhz"] == fi])) for fi in f]
            ax.plot(f, means, color=c, lw=1.0, marker=".", ms=3, label=f"PZT {k}")
            if resonances is not None:
                ax.axvline(resonances[k - 1], color=c, lw=0.6, ls="--")
        ax.set_xlabel("frequency (MHz)")
        ax.set_ylabel(f"mean speed at {vmax:g} V (cells/s)")
        ax.legend(frameon=False, fontsize=7)
        fig.tight_layout()
        _save(fig, path)


def field_svg(path: str | Path, values: np.ndarray, stride: int = 20) -> None:
    """Quiver plot of each transducer's fitted velocity field."""
    n = values.shape[0]
    idx = np.arange(stride // 2, n, stride)
    gx, gy = np.meshgrid(idx, idx)
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(2, 2, figsize=(6.5, 6.5), sharex=True, sharey=True)
        for k, ax in zip((1, 2, 3, 4), axes.ravel()):
            u = values[gy, gx, 0, k - 1]
            v = values[gy, gx, 1, k - 1]
            ax.quiver(gx, gy, u, v, color=K_COLORS[k], angles="xy", scale_units="xy",
                      scale=max(float(np.max(np.hypot(u, v))), 1e-9) / stride)
            ax.set_title(f"PZT {k}")
            ax.set_aspect("equal")
            ax.set_xlim(0, n - 1)
            ax.set_ylim(0, n - 1)
        fig.tight_layout()
        _save(fig, path)
