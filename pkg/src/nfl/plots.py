"""Figure rendering for the CLI report path.

Every experiment that writes delimited output also renders a small set of
PNG figures next to it.  Rendering is headless (Agg) and timestamp-free so
reports stay reproducible; replay comparisons are defined over the numeric
artifacts, not the figures.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = {"dpi": 120, "metadata": {"Software": None}}


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return os.path.basename(path)


def plot_snapshots(traj, out_dir, count: int = 6, name: str = "profiles.png"):
    """A handful of field snapshots across the run."""
    fig, ax = plt.subplots(figsize=(7, 3.2))
    idx = np.unique(np.linspace(0, len(traj.snapshots) - 1, count).astype(int))
    for i in idx:
        s = traj.snapshots[i]
        ax.plot(s.x, s.values, lw=1.0, label=f"t={s.time:g}")
    ax.set_xlabel("x")
    ax.set_ylabel("u")
    ax.legend(fontsize=7, ncol=2)
    return _finish(fig, os.path.join(out_dir, name))


def plot_trace(trace, out_dir, name: str = "front_trace.png"):
    fig, ax = plt.subplots(figsize=(7, 3.2))
    for lam in trace.levels:
        ax.plot(trace.times, trace.right[lam], lw=1.0, label=f"right @ {lam:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("interface location")
    ax.legend(fontsize=7)
    return _finish(fig, os.path.join(out_dir, name))


def plot_wave(profile, out_dir, name: str = "wave_profile.png"):
    fig, axes = plt.subplots(1, 2, figsize=(8, 3))
    axes[0].plot(profile.x, profile.values, lw=1.2)
    axes[0].set_xlabel("x")
    axes[0].set_ylabel("profile")
    axes[0].set_title(f"speed {profile.speed:.5f}", fontsize=9)
    pos = profile.values > 1e-14
    axes[1].semilogy(profile.x[pos], profile.values[pos], lw=1.0)
    axes[1].set_xlabel("x")
    axes[1].set_ylabel("profile (log)")
    axes[1].set_title(f"tail rate {profile.decay_rate:.4f}", fontsize=9)
    return _finish(fig, os.path.join(out_dir, name))


def plot_envelope(times, positions, env, out_dir, name: str = "envelope.png"):
    fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    lo, hi = env.domain
    dense = np.linspace(lo, hi, 4000)
    axes[0].plot(times, positions, lw=0.8, label="front trace")
    axes[0].plot(dense, env.value(dense), lw=1.2, label="C1 envelope")
    axes[0].set_ylabel("position")
    axes[0].legend(fontsize=8)
    axes[1].plot(dense, env.derivative(dense), lw=0.8)
    axes[1].axhline(env.params.slope_min, color="k", ls="--", lw=0.7)
    axes[1].set_xlabel("t")
    axes[1].set_ylabel("envelope slope")
    return _finish(fig, os.path.join(out_dir, name))


def plot_residual_heatmap(t, z, residual, out_dir,
                          name: str = "squeeze_residual.png"):
    fig, ax = plt.subplots(figsize=(7, 3.2))
    m = ax.pcolormesh(z, t, residual, shading="auto", cmap="RdBu_r")
    fig.colorbar(m, ax=ax, label="residual")
    ax.set_xlabel("frame abscissa")
    ax.set_ylabel("t")
    return _finish(fig, os.path.join(out_dir, name))


def plot_ux_comparison(x, ux, fd, out_dir, name: str = "slope_comparison.png"):
    fig, axes = plt.subplots(1, 2, figsize=(8, 3))
    axes[0].plot(x, fd, lw=1.2, label="centered difference")
    axes[0].plot(x, ux, lw=0.8, ls="--", label="history integral")
    axes[0].set_xlabel("x")
    axes[0].set_ylabel("u_x")
    axes[0].legend(fontsize=8)
    mask = np.abs(fd) > 1e-4
    axes[1].semilogy(x[mask], np.abs(ux - fd)[mask], lw=0.8)
    axes[1].set_xlabel("x")
    axes[1].set_ylabel("|difference|")
    return _finish(fig, os.path.join(out_dir, name))


def plot_gamma_ratio(reports, out_dir, name: str = "ratio_decay.png"):
    fig, ax = plt.subplots(figsize=(6, 3.2))
    for rep in reports:
        ax.plot(rep["x"], rep["deviation"], lw=1.0,
                label=f"rate {rep['rate']:g}")
    ax.set_yscale("log")
    ax.set_xlabel("x")
    ax.set_ylabel("|ratio - 1|")
    ax.legend(fontsize=8)
    return _finish(fig, os.path.join(out_dir, name))
