"""Optional static plot artifacts. Requires matplotlib (extra ``plots``)."""

from __future__ import annotations

import os


def _pyplot():
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        return plt
    except ImportError:
        return None


def plot_eigen_spectra(summaries: dict, out_dir: str) -> list[str]:
    """Normalized eigenvalue spectra per scenario, one semilog figure."""
    plt = _pyplot()
    if plt is None:
        return []
    fig, ax = plt.subplots(figsize=(6, 4))
    for sid, summary in summaries.items():
        ax.semilogy(range(1, len(summary.normalized_eigenvalues) + 1),
                    summary.normalized_eigenvalues, marker=".", label=sid)
    ax.set_xlabel("eigenvalue index")
    ax.set_ylabel("normalized eigenvalue")
    ax.set_title("Clutter covariance spectra")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    path = os.path.join(out_dir, "eigen_spectra.png")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]


def plot_scan_curve(xs, ys_by_label: dict, xlabel: str, ylabel: str,
                    name: str, out_dir: str, logx: bool = False) -> list[str]:
    plt = _pyplot()
    if plt is None:
        return []
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, ys in ys_by_label.items():
        ax.plot(xs, ys, marker="o", label=label)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    ax.grid(True, alpha=0.3)
    path = os.path.join(out_dir, f"{name}.png")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]
