# Part of the pivotal adversarial training library (pivot)
#
# It is licensed under a liberal MIT/X11 style license;
# see the file "LICENSE" in this directory for details.

"""SVG figures for run reports.

Figures are convenience output only; the CSV files next to them are the
record.  matplotlib is imported on first use with the Agg backend, so
nothing here needs a display."""

from __future__ import annotations

import logging

import numpy as np

log = logging.getLogger(__name__)

DASHED = dict(linestyle="--", color="0.4", linewidth=1.0)


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(str(path), format="svg")
    _pyplot().close(fig)
    log.debug("wrote %s", path)


def plot_training_curves(metrics, path, h_z=None, loss_f_floor=None):
    """L_f, L_r and E_lambda against iteration, one panel each.

    Dashed lines mark the floor L_f can reach, H(Z) for L_r, and
    floor - lam * H(Z) for E_lambda, whichever are known."""
    plt = _pyplot()
    it = metrics.column("iteration")
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.5))
    panels = [("loss_f", "$L_f$", loss_f_floor),
              ("loss_r", "$L_r$", h_z),
              ("e_lambda", r"$L_f - \lambda L_r$",
               None if h_z is None or loss_f_floor is None
               else loss_f_floor - metrics.lam * h_z)]
    for ax, (column, label, reference) in zip(axes, panels):
        ax.plot(it, metrics.column(column), linewidth=1.2)
        if reference is not None:
            ax.axhline(reference, **DASHED)
        ax.set_xlabel("iteration")
        ax.set_title(label)
    _save(fig, path)


def plot_densities(densities, path, title=None):
    """One step curve per nuisance value."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for d in densities:
        widths = np.diff(d.bin_edges)
        ax.step(d.bin_edges[:-1], d.bin_masses / widths, where="post",
                label="z = %g" % d.z_value)
    ax.set_xlabel("classifier score")
    ax.set_ylabel("density")
    ax.legend()
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_ams(scans, path):
    """AMS against threshold; scans is a list of (label, AmsScanResult)."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, scan in scans:
        ax.plot(scan.thresholds, scan.ams_values, label=label)
    ax.set_xlabel("threshold on classifier score")
    ax.set_ylabel("AMS")
    ax.legend()
    _save(fig, path)


def plot_decision_surface(xs, ys, grid, path, samples=None):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(4.5, 4))
    filled = ax.contourf(xs, ys, grid, levels=np.linspace(0.0, 1.0, 11),
                         cmap="RdBu_r")
    fig.colorbar(filled, ax=ax)
    if samples is not None:
        # a few hundred points are enough to show the classes
        for label, marker in ((0, "o"), (1, "^")):
            pts = samples.with_label(label).x[:200]
            ax.scatter(pts[:, 0], pts[:, 1], s=4, marker=marker, alpha=0.5)
    ax.set_xlabel("$x_1$")
    ax.set_ylabel("$x_2$")
    _save(fig, path)


def plot_sweep(rows, path):
    """Mean best AMS against lambda, with one-stddev error bars."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    rows = [r for r in rows
            if not r["nominal"] and r["best_ams_mean"] is not None]
    lams = [r["lam"] for r in rows]
    ax.errorbar(range(len(lams)), [r["best_ams_mean"] for r in rows],
                yerr=[r["best_ams_std"] for r in rows], marker="o", capsize=3)
    ax.set_xticks(range(len(lams)))
    ax.set_xticklabels(["%g" % lam for lam in lams])
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel("best AMS")
    _save(fig, path)
