"""Chart emission: ablation panels, run cost curves, heatmaps, cycle replays."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .domain import Agent
from .env import WorldSpec
from .loop import RunLog
from .spatial import SpatialCostField

LEVEL_STYLES = {
    "space+time": {"color": "tab:orange", "ls": "-"},
    "space": {"color": "tab:blue", "ls": "--"},
    "time": {"color": "tab:red", "ls": "-."},
    "none": {"color": "black", "ls": ":"},
}


def _save(fig, out_base: Path) -> list[Path]:
    paths = []
    for ext in ("svg", "png"):
        p = out_base.with_suffix(f".{ext}")
        fig.savefig(p, bbox_inches="tight", dpi=130)
        paths.append(p)
    plt.close(fig)
    return paths


def ablation_chart(results: dict, out_base) -> list[Path]:
    """One panel per archetype, one line per adaptation level, IQR bands."""
    archetypes = results["protocol"]["archetypes"]
    levels = results["protocol"]["levels"]
    cutoff = results["protocol"].get("lam_cutoff")
    fig, axes = plt.subplots(1, len(archetypes), figsize=(4.2 * len(archetypes), 3.4),
                             sharey=False)
    if len(archetypes) == 1:
        axes = [axes]
    for ax, arch in zip(axes, archetypes):
        for level in levels:
            cell = results["cells"][f"{arch}|{level}"]
            xs = np.arange(1, len(cell["median"]) + 1)
            style = LEVEL_STYLES.get(level, {})
            ax.plot(xs, cell["median"], label=level, **style)
            ax.fill_between(xs, cell["q1"], cell["q3"], alpha=0.15,
                            color=style.get("color"))
        if cutoff:
            ax.axvline(cutoff + 0.5, color="red", lw=0.8)
        ax.set_title(arch.replace("_", " "))
        ax.set_xlabel("cycle")
    axes[0].set_ylabel("plan cost")
    axes[-1].legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, Path(out_base))


def run_cost_chart(log: RunLog, out_base) -> list[Path]:
    xs, realized, planned = [], [], []
    for rec in log.cycles:
        if "realized" not in rec:
            continue
        xs.append(rec["cycle"] + 1)
        realized.append(rec["realized"]["cost"])
        planned.append(rec["planned_cost_lam0"])
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(xs, realized, "-o", ms=3, label="realized cost")
    ax.plot(xs, planned, "--", label="planned cost (no diversity)")
    ax.set_xlabel("cycle")
    ax.set_ylabel("cost")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, Path(out_base))


def field_heatmap(field_json: dict, out_base, title: str = "") -> list[Path]:
    field = SpatialCostField.from_jsonable(field_json)
    fig, ax = plt.subplots(figsize=(3.6, 3.4))
    x0, y0, x1, y1 = field.spec.bounds
    im = ax.imshow(field.mean, origin="lower", extent=(x0, x1, y0, y1),
                   vmin=0, vmax=1, cmap="viridis")
    ax.set_title(title or f"task {field.task_id} spatial cost")
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    return _save(fig, Path(out_base))


def draw_world(ax, world: WorldSpec) -> None:
    x0, y0, x1, y1 = world.bounds
    ax.set_xlim(x0, x1)
    ax.set_ylim(y0, y1)
    ax.set_aspect("equal")
    for (ax0, ay0), (bx, by) in world.walls:
        ax.plot([ax0, bx], [ay0, by], color="black", lw=3)
    for t, (ox, oy) in enumerate(world.objects):
        ax.plot(ox, oy, "o", color="tab:red", ms=8)
        ax.annotate(str(t), (ox, oy), textcoords="offset points", xytext=(5, 5))
    for agent, color in ((Agent.HUMAN, "goldenrod"), (Agent.ROBOT, "tab:blue")):
        hx, hy = world.homes[agent]
        ax.add_patch(plt.Rectangle((hx - 0.04, hy - 0.04), 0.08, 0.08,
                                   color=color, alpha=0.5))


def replay_cycle(world: WorldSpec, cycle_record: dict, out_base) -> list[Path]:
    """Render one logged cycle: world plus the executed trajectories."""
    fig, ax = plt.subplots(figsize=(4.2, 4))
    draw_world(ax, world)
    obs = cycle_record.get("observation", {})
    plan = cycle_record.get("plan", {})
    for traj_map, color in ((cycle_record.get("human_paths", {}), "goldenrod"),
                            (cycle_record.get("robot_paths", {}), "tab:blue")):
        for t, pts in traj_map.items():
            arr = np.asarray(pts)
            ax.plot(arr[:, 0], arr[:, 1], color=color, lw=1.2, alpha=0.8)
    title = f"cycle {cycle_record.get('cycle', '?')}"
    if "realized" in cycle_record:
        title += f"  cost={cycle_record['realized']['cost']}"
    ax.set_title(title, fontsize=9)
    fig.tight_layout()
    return _save(fig, Path(out_base))
