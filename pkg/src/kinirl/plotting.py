"""Figures written next to the CLI's CSV outputs (non-interactive backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_training(report, path, window: int = 10):
    it = np.arange(1, len(report) + 1)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 3.8))
    ax1.plot(it, report.l1_svf_gap, color="0.75", lw=1, label="per iteration")
    ax1.plot(it, report.smoothed_gap(window), color="C0", lw=2, label=f"moving mean ({window})")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("|mu_E - mu_D|_1")
    ax1.legend(frameon=False)
    ax2.plot(it, report.expert_reward, color="C2", label="expert")
    ax2.plot(it, report.policy_reward, color="C3", alpha=0.8, label="sampled policy")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("trajectory reward")
    ax2.legend(frameon=False)
    _save(fig, path)


def plot_plan(cost, traj, path, goal=None):
    fig, ax = plt.subplots(figsize=(5, 5))
    im = ax.imshow(cost, cmap="magma", origin="upper")
    fig.colorbar(im, ax=ax, fraction=0.046, label="learned cost")
    ax.plot(traj.cells[:, 1], traj.cells[:, 0], color="deepskyblue", lw=2, marker=".", ms=4)
    ax.plot(traj.cells[0, 1], traj.cells[0, 0], "o", color="lime", label="start")
    if goal is not None:
        ax.plot(goal[1], goal[0], "*", color="white", ms=12, label="goal")
    ax.legend(loc="lower right", fontsize=8)
    ax.set_xlabel("col")
    ax.set_ylabel("row")
    _save(fig, path)


def plot_eval(hd_m, path):
    hd_m = np.asarray(hd_m, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(np.arange(len(hd_m)), hd_m, color="C0")
    ax.axhline(hd_m.mean(), color="C3", ls="--", label=f"mean {hd_m.mean():.3f} m")
    ax.set_xlabel("sample")
    ax.set_ylabel("average Hausdorff distance (m)")
    ax.legend(frameon=False)
    _save(fig, path)


def plot_bench(rows, path):
    """``rows``: iterable of (engine, stage, seconds)."""
    rows = list(rows)
    engines = list(dict.fromkeys(r[0] for r in rows))
    stages = list(dict.fromkeys(r[1] for r in rows))
    times = {(e, s): t for e, s, t in rows}
    x = np.arange(len(stages))
    width = 0.8 / max(len(engines), 1)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for k, eng in enumerate(engines):
        ax.bar(x + k * width, [times.get((eng, s), np.nan) for s in stages], width, label=eng)
    ax.set_xticks(x + width * (len(engines) - 1) / 2, stages)
    ax.set_ylabel("wall time (s)")
    ax.set_yscale("log")
    ax.legend(frameon=False)
    _save(fig, path)
