"""Figures written to files (Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update({"figure.dpi": 110, "font.size": 9, "axes.grid": False, "savefig.bbox": "tight"})


def _save(fig, path):
    fig.savefig(path)
    plt.close(fig)
    return path


def density_slice(density, path, h=1.0, title="action density", index=(0, 0)):
    """Heat map of a site density on the (x0, x1) plane at fixed (x2, x3)."""
    d = np.asarray(density)
    if d.ndim == 4:
        d = d[:, :, index[0], index[1]]
    n0, n1 = d.shape
    fig, ax = plt.subplots(figsize=(4, 3.4))
    im = ax.imshow(d.T, origin="lower", extent=(0, n0 * h, 0, n1 * h), cmap="magma")
    fig.colorbar(im, ax=ax)
    ax.set_xlabel("$x_0$")
    ax.set_ylabel("$x_1$")
    ax.set_title(title)
    return _save(fig, path)


def convergence(trace, path):
    """Objective and residual norms against iteration."""
    it = [r["iteration"] for r in trace]
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.semilogy(it, [max(r["objective"], 1e-300) for r in trace], label="objective")
    for key in ("r1", "r2", "r3"):
        vals = [max(r[key], 1e-300) for r in trace]
        ax.semilogy(it, vals, lw=0.8, label=key)
    ax.set_xlabel("iteration")
    ax.legend(frameon=False)
    return _save(fig, path)


def ball_mass_profiles(profiles, path):
    """Ball mass against radius, one curve per (label, radii, masses)."""
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    for label, radii, masses in profiles:
        ax.plot(radii, masses, "o-", ms=3, label=label)
    ax.axhline(8 * np.pi**2, color="0.5", ls="--", lw=0.8)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("ball radius")
    ax.set_ylabel("mass")
    ax.legend(frameon=False)
    return _save(fig, path)


def cutoff_excess(radii, excess, path, reference=None):
    fig, ax = plt.subplots(figsize=(4, 3.2))
    ax.loglog(radii, excess, "o-", ms=4, label="excess")
    if reference is not None:
        ax.axhline(reference, color="0.5", ls="--", lw=0.8, label="annulus action")
    ax.set_xlabel("r")
    ax.legend(frameon=False)
    return _save(fig, path)


def ratio_histogram(ratios, constant, path, label="ratio"):
    fig, ax = plt.subplots(figsize=(4, 3))
    ax.hist(ratios, bins=40, color="0.4")
    ax.axvline(constant, color="C3", lw=1)
    ax.set_xlabel(label)
    return _save(fig, path)
