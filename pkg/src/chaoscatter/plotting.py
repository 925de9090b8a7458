"""Figure rendering for the CLI reports. Everything writes PNG files via the
Agg backend; no window is ever opened."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

BRANCH_STYLE = {
    ("unstable", -1): ("tab:red", "-"),
    ("unstable", 1): ("tab:orange", "-"),
    ("stable", -1): ("tab:blue", "-"),
    ("stable", 1): ("tab:cyan", "-"),
}


def _save(fig, path):
    fig.savefig(path, dpi=110, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_tangles(panels, path, line_c=None):
    """panels: {L: [ManifoldCurve, ...]} drawn in (tanh q, p)."""
    Ls = sorted(panels)
    fig, axes = plt.subplots(1, len(Ls), figsize=(4.2 * len(Ls), 4), squeeze=False)
    for ax, L in zip(axes[0], Ls):
        for c in panels[L]:
            col, ls = BRANCH_STYLE.get(c.branch, ("k", "-"))
            ax.plot(c.z, c.p, ls, color=col, lw=0.5)
        if line_c is not None and L in line_c:
            q, p = line_c[L]
            ax.plot(np.tanh(q), p, "k-", lw=1.2)
        ax.set_xlim(-1, 1)
        ax.set_title(f"L = {L:.2f}")
        ax.set_xlabel("tanh q")
    axes[0][0].set_ylabel("p")
    return _save(fig, path)


def plot_scatter_1d(chi, p_out, path, delta_L=None, tree=None):
    n = 2 if delta_L is not None else 1
    fig, axes = plt.subplots(n, 1, figsize=(8, 3 * n), sharex=True, squeeze=False)
    ax = axes[0][0]
    ax.plot(chi, p_out, ".", ms=1.5, color="k")
    ax.axhline(0, color="0.6", lw=0.5)
    ax.set_ylabel("p_out")
    if tree is not None:
        for node in tree.walk():
            if node.depth:
                y = -0.3 * node.depth
                ax.plot([node.lo, node.hi], [y, y], "-", color=f"C{node.depth}", lw=2)
    if delta_L is not None:
        axes[1][0].plot(chi, delta_L, ".", ms=1.5, color="k")
        axes[1][0].set_ylabel("delta_L")
    axes[-1][0].set_xlabel("chi_in")
    return _save(fig, path)


def plot_torus(chi, psi, p_out, delta_L, path):
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    ext = (chi[0], chi[-1], psi[0], psi[-1])
    for ax, f, name, cmap in ((axes[0], p_out, "p_out", "RdBu_r"),
                              (axes[1], delta_L, "delta_L", "viridis")):
        im = ax.imshow(f.T, origin="lower", aspect="auto", extent=ext, cmap=cmap,
                       interpolation="nearest")
        fig.colorbar(im, ax=ax, label=name)
        ax.set_xlabel("chi_in")
        ax.set_ylabel("psi_in")
    return _save(fig, path)


def plot_histogram(h, path, ridges=None, curves=None):
    fig, ax = plt.subplots(figsize=(6.5, 5.5))
    ext = (h.p_axis.lo, h.p_axis.hi, h.L_axis.lo, h.L_axis.hi)
    ax.imshow(np.log1p(h.counts.T), origin="lower", aspect="auto", extent=ext,
              cmap="gray_r", interpolation="nearest")
    if ridges is not None and ridges.mask.any():
        cc = ridges.cell_centers()
        ax.plot(cc[:, 0], cc[:, 1], "s", ms=1.5, color="tab:red", alpha=0.7)
    for c in curves or ():
        ax.plot(c.points[:, 0], c.points[:, 1], "-", color="tab:blue", lw=0.7)
    ax.set_xlabel("p_out")
    ax.set_ylabel("delta_L")
    return _save(fig, path)


def plot_normalform(panels, path):
    """panels: list of (title, curves, caustics, p_grid, L_grid, counts)."""
    fig, axes = plt.subplots(1, len(panels), figsize=(4.2 * len(panels), 4), squeeze=False)
    for ax, (title, curves, caustics, P, Lg, counts) in zip(axes[0], panels):
        ax.pcolormesh(P, Lg, counts, cmap="Pastel1", vmin=0, vmax=8, shading="nearest")
        for c in curves:
            ax.plot(c.points[:, 0], c.points[:, 1], "k-", lw=0.8)
        for name, xy in caustics.items():
            ax.plot(xy[:, 0], xy[:, 1], "--", lw=0.6)
        ax.set_title(title)
        ax.set_xlabel("p_out")
    axes[0][0].set_ylabel("delta_L")
    return _save(fig, path)
