"""Report figures, rendered off-screen to files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIGSIZE = (6.0, 3.8)


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def plot_kernel_profiles(kset, x1, path, j: int = 0, max_curves: int = 12) -> Path:
    """``|k_j(x1)|`` for a subset of the kernel set's frequency points."""
    x1 = np.asarray(x1, dtype=float)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    step = max(1, len(kset.entries) // max_curves)
    for e in kset.entries[::step]:
        vals = np.linalg.norm(e.eval(x1, j).reshape(len(x1), -1), axis=1)
        label = f"xi'={np.round(e.fp.xi_prime, 2).tolist()}, lam={e.fp.lam:.3g}"
        ax.semilogy(x1, np.maximum(vals, 1e-300), lw=1.0, label=label)
    ax.set_xlabel("x1")
    ax.set_ylabel(f"|k_{j + 1}|")
    ax.set_ylim(bottom=1e-16)
    ax.legend(fontsize=6, ncol=2)
    return _save(fig, path)


def plot_ratio_report(rep, path) -> Path:
    """Sample ratios with the acceptance band of the report's mode."""
    r = rep.ratios
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.semilogy(np.arange(len(r)), r, "o", ms=3)
    if rep.mode == "absolute":
        ax.axhline(rep.bound, color="k", ls="--", lw=0.8)
        ax.axhline(1.0 / rep.bound, color="k", ls="--", lw=0.8)
    elif rep.mode == "upper" and np.isfinite(rep.bound):
        ax.axhline(rep.bound, color="k", ls="--", lw=0.8)
    elif rep.mode == "spread" and r.size:
        ax.axhline(r.min() * rep.bound, color="k", ls=":", lw=0.8)
    kind = "negative control" if rep.negative_control else "check"
    ax.set_title(f"{rep.claim_id} ({kind}): {rep.verdict}", fontsize=9)
    ax.set_xlabel("sample")
    ax.set_ylabel("lhs / rhs")
    return _save(fig, path)


def plot_ls_scan(report, path) -> Path:
    sv = np.array([s[2] for s in report.samples])
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.semilogy(np.arange(len(sv)), np.maximum(sv, 1e-18), ".", ms=4)
    ax.set_xlabel("frequency point")
    ax.set_ylabel("min singular value")
    ax.set_title("LS scan: " + ("satisfied" if report.satisfied else "violated"), fontsize=9)
    return _save(fig, path)


def plot_field(field, path, component: int = 0) -> Path:
    """Modulus of a field: curve for 1D, image of the first two axes otherwise."""
    vals = np.abs(field.values)
    if field.has_components:
        vals = vals[..., component]
    fig, ax = plt.subplots(figsize=FIGSIZE)
    if vals.ndim == 1:
        ax.plot(field.axes[0].points(), vals)
        ax.set_xlabel(field.axes[0].role)
    else:
        while vals.ndim > 2:
            vals = vals[..., 0]
        x0, x1 = field.axes[0].points(), field.axes[1].points()
        im = ax.pcolormesh(x1, x0, vals, shading="auto")
        fig.colorbar(im, ax=ax)
        ax.set_xlabel(field.axes[1].role)
        ax.set_ylabel(field.axes[0].role)
    return _save(fig, path)
