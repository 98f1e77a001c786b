"""On-disk layout: ``<out>/<experiment>/<task>/<method>/seed<k>/``.

Per seed: ``metrics.jsonl`` (one record per epoch), ``heatmaps/epoch_XXX.csv``,
``heatmap_total.csv`` and ``final.ckpt``.  Per method: ``metrics.jsonl`` with
seed-aggregated records.  Every metrics line carries ``schema: 1``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..agent import save_checkpoint
from ..gridworld import task_spec
from .training import RunArtifacts

SCHEMA = 1


def metrics_line(record: dict) -> str:
    return json.dumps({"schema": SCHEMA, **record}, sort_keys=True)


def write_jsonl(path: Path, records) -> None:
    with open(path, "w") as f:
        for r in records:
            f.write(metrics_line(r) + "\n")


def read_jsonl(path) -> list:
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


def write_matrix_csv(path: Path, m: np.ndarray) -> None:
    np.savetxt(path, m, fmt="%d", delimiter=",")


def method_dir(out, experiment: str, task: str, method: str) -> Path:
    return Path(out) / experiment / task / method


def prepare_dir(path: Path, overwrite: bool) -> Path:
    if path.exists() and any(path.iterdir()) and not overwrite:
        raise FileExistsError(f"{path} already holds results; pass --overwrite to replace them")
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_artifacts(art: RunArtifacts, out, experiment: str, overwrite: bool = False) -> Path:
    cfg = art.config
    task = cfg.env.task.value
    mdir = prepare_dir(method_dir(out, experiment, task, cfg.name), overwrite)
    for run in art.runs:
        sdir = mdir / f"seed{run.seed}"
        (sdir / "heatmaps").mkdir(parents=True, exist_ok=True)
        write_jsonl(sdir / "metrics.jsonl", [r.as_dict() for r in run.records])
        for e, heat in enumerate(run.heatmaps):
            write_matrix_csv(sdir / "heatmaps" / f"epoch_{e:03d}.csv", heat)
        write_matrix_csv(sdir / "heatmap_total.csv", np.sum(run.heatmaps, axis=0))
        if cfg.checkpoint and run.net is not None:
            save_checkpoint(sdir / "final.ckpt", run.net, task, run.env_steps, task_spec(task).n_channels)
    write_jsonl(mdir / "metrics.jsonl", art.curve())
    summary = {
        "method": cfg.name,
        "task": task,
        "seeds": list(cfg.seeds),
        "final_solve_rates": art.final_solve_rates(),
        "final_solve_rate_mean": float(np.mean(art.final_solve_rates())),
        "validation_digest": art.validation_digest,
    }
    with open(mdir / "summary.json", "w") as f:
        json.dump({"schema": SCHEMA, **summary}, f, sort_keys=True, indent=1)
    return mdir
