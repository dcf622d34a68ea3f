"""Figures written next to the delimited outputs of the CLI.

matplotlib is imported lazily with the Agg backend, so the numerical modules
never pull it in.
"""

from __future__ import annotations

import math

import numpy as np

GOLDEN = (math.sqrt(5) - 1.0) / 2.0

_RC = {
    "font.size": 9,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update(_RC)
    return plt


def new_figure(width: float = 5.0, height: float | None = None):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(width, height or width * GOLDEN))
    return fig, ax


def save(fig, path) -> None:
    fig.tight_layout()
    # no timestamp/version metadata so reruns give identical files
    fig.savefig(path, dpi=150, metadata={"Software": None})
    _plt().close(fig)


def plot_phase(cells, path) -> None:
    """Verdict fraction per (window, b) cell; windows on |E|/sqrt(d)."""
    bs = sorted({c.b for c in cells})
    wins = sorted({(c.window_lo, c.window_hi) for c in cells})
    grid = np.full((len(bs), len(wins)), np.nan)
    for c in cells:
        grid[bs.index(c.b), wins.index((c.window_lo, c.window_hi))] = c.verdict_fraction
    fig, ax = new_figure(5.0, 1.2 + 0.45 * len(bs))
    im = ax.imshow(grid, origin="lower", aspect="auto", cmap="coolwarm_r", vmin=0, vmax=1)
    ax.set_xticks(range(len(wins)))
    ax.set_xticklabels([f"[{lo:g}, {hi:g})" for lo, hi in wins])
    ax.set_yticks(range(len(bs)))
    ax.set_yticklabels([f"{b:g}" for b in bs])
    ax.set_xlabel(r"$|E|/\sqrt{d}$ window")
    ax.set_ylabel(r"$b = d/\log N$")
    fig.colorbar(im, ax=ax, label="delocalized fraction")
    save(fig, path)


def plot_trace(trace, path) -> None:
    from .local_law import phi_threshold

    fig, ax = new_figure()
    ax.plot(trace.grid, trace.lambda_path, lw=1.2, color="k", label=r"$\Lambda(z_k)$")
    for t, ls in ((7, "--"), (8, ":")):
        ax.axhline(phi_threshold(trace.N, t), ls=ls, color="C3", lw=0.8, label=rf"$(\log N)^{{-1/{t}}}$")
    if 0 <= trace.k_star < len(trace.grid) - 1:
        ax.axvline(trace.grid[trace.k_star], color="0.6", lw=0.8, label=r"$K_*$")
    ax.set_xscale("log")
    ax.invert_xaxis()
    ax.set_xlabel(r"$\mathrm{Im}\,z$")
    ax.set_ylabel(r"$\Lambda$")
    ax.legend(frameon=False)
    save(fig, path)


def plot_spectrum(report, path, bound: float | None = None) -> None:
    fig, ax = new_figure()
    x = report.scaled()
    keep = np.ones(x.size, dtype=bool)
    if report.outlier_index is not None:
        keep[report.outlier_index] = False
    ax.scatter(x[keep], report.q_values[keep], s=3, color="k", lw=0)
    if bound is not None:
        ax.axhline(bound, color="C3", lw=0.8, ls="--", label=r"$N^{-1+\kappa}$")
        ax.legend(frameon=False)
    ax.set_yscale("log")
    ax.set_xlabel(r"$\lambda/\sqrt{d}$")
    ax.set_ylabel(r"$q(u)$")
    save(fig, path)


def plot_tails(rows, path) -> None:
    fig, ax = new_figure()
    labels = [f"N={r['N']} b={r['b']:g} e={r['epsilon']:g}" for r in rows]
    idx = np.arange(len(rows))
    for key, col, mk in (("bound_lower", "C0", "o"), ("emp_lower", "C0", "x"),
                         ("bound_upper", "C3", "o"), ("emp_upper", "C3", "x")):
        vals = np.array([r[key] for r in rows], dtype=float)
        vals = np.where(vals > 0, vals, np.nan)
        ax.scatter(idx, vals, color=col, marker=mk, s=14, label=key)
    ax.set_yscale("log")
    ax.set_xticks(idx)
    ax.set_xticklabels(labels, rotation=70, ha="right", fontsize=6)
    ax.set_ylabel("probability")
    ax.legend(frameon=False, ncol=2)
    save(fig, path)


def plot_stieltjes(rows, path) -> None:
    fig, ax = new_figure()
    alphas = sorted({r["alpha"] for r in rows})
    ims = sorted({r["z_im"] for r in rows})
    eta = ims[0]
    for a in alphas:
        sel = [r for r in rows if r["alpha"] == a and r["z_im"] == eta]
        ax.plot([r["z_re"] for r in sel], [r["density"] for r in sel], lw=1, label=rf"$\alpha={a:g}$")
    ax.set_xlabel(r"$E$")
    ax.set_ylabel(rf"$\pi^{{-1}}\,\mathrm{{Im}}\,m_\alpha(E+i\,{eta:g})$")
    ax.legend(frameon=False)
    save(fig, path)
