"""Render experiment results to PNG files next to their CSV outputs."""

from __future__ import annotations

import numpy as np


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def render_sweep(result, path) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for m in result.methods:
        ax.plot(result.eps_grid, result.means[m], marker="o", label=m.upper())
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("perturbation size")
    ax.set_ylabel("average maximal diameter")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_wrapping(stats, path) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    layers = np.arange(1, stats.k + 1)
    for m, ratios in stats.plain_ratio.items():
        ax.plot(layers, ratios, marker="o", label=f"{m.upper()} width ratio")
    ax.axhline(stats.predicted_ratio, color="k", linestyle="--",
               label=r"$\sqrt{2n/\pi}$")
    ax.axhline(1.0, color="gray", linestyle=":", linewidth=0.8)
    ax.set_yscale("log")
    ax.set_xlabel("layer")
    ax.set_ylabel("consecutive width ratio")
    ax.set_title(f"n={stats.n}, {stats.trials} trials")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_lemma(stats_list, path) -> None:
    plt = _plt()
    fig, axes = plt.subplots(1, 2, figsize=(8.0, 3.6))
    ns = [s.n for s in stats_list]
    axes[0].errorbar(ns, [s.E_hat for s in stats_list],
                     yerr=[3 * s.se_E for s in stats_list],
                     fmt="o", label="Monte Carlo (3 s.e.)")
    axes[0].plot(ns, [s.E_closed for s in stats_list], "x--", label="closed form")
    axes[0].set_xscale("log")
    axes[0].set_xlabel("n")
    axes[0].set_ylabel("E(R)")
    axes[0].legend()
    with_v = [s for s in stats_list if s.V_closed is not None]
    axes[1].errorbar([s.n for s in with_v], [s.V_hat for s in with_v],
                     yerr=[3 * s.se_V for s in with_v],
                     fmt="o", label="Monte Carlo (3 s.e.)")
    axes[1].plot([s.n for s in with_v], [s.V_closed for s in with_v],
                 "x--", label="closed form")
    axes[1].set_xscale("log")
    axes[1].set_xlabel("n")
    axes[1].set_ylabel("V(R)")
    axes[1].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
