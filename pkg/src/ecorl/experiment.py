"""Experiment files: a YAML mapping expanded into validated RunConfig variants.

Top-level keys are ``name``, ``output_dir``, ``parallelism``, ``seed`` and
``variants``; any environment or run key at top level is a default shared by
all variants.  Unknown keys are rejected.  A file with no ``variants`` list
describes a single variant named ``default``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import yaml

from .gridworld import ConfigurationError, EnvConfig, ObjectKind, ShapingSchedule
from .harness import RunConfig

ENV_KEYS = (
    "task",
    "grid_size",
    "dynamism_p",
    "shaping",
    "reward_mode",
    "episodic",
    "horizon",
    "nonepisodic_respawn",
    "predator_penalty",
    "regen_delay",
    "counts",
)
RUN_KEYS = (
    "epochs",
    "steps_per_collect",
    "grad_steps_per_collect",
    "epoch_steps",
    "n_validation",
    "eval_horizon",
    "seeds",
    "rnd_enabled",
    "rnd_scale",
    "learning_rate",
    "gamma",
    "batch_size",
    "buffer_capacity",
    "target_sync",
    "checkpoint",
)
VARIANT_KEYS = ("name", "eval_env") + ENV_KEYS + RUN_KEYS
TOP_KEYS = ("name", "output_dir", "parallelism", "seed", "variants")
SHAPING_KEYS = tuple(f.name for f in dataclasses.fields(ShapingSchedule))
SWEEPABLE = ("dynamism_p", "learning_rate", "gamma", "rnd_scale", "horizon", "grid_size")


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    variants: tuple
    output_dir: str = "runs"
    parallelism: int = 1
    seed: int = 0

    def __post_init__(self):
        names = [v.name for v in self.variants]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"variant names must be unique, got {names}")
        if not self.variants:
            raise ConfigurationError("experiment has no variants")
        if self.parallelism < 1:
            raise ConfigurationError("parallelism must be >= 1")


def _reject_unknown(d: dict, allowed, where: str):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigurationError(f"unknown key(s) {extra} in {where}; allowed: {', '.join(allowed)}")


def _shaping(value):
    if value in (None, False):
        return None
    if value is True:
        return ShapingSchedule()
    if not isinstance(value, dict):
        raise ConfigurationError("shaping must be true/false or a mapping")
    _reject_unknown(value, SHAPING_KEYS, "shaping")
    return ShapingSchedule(**value)


def _counts(value):
    if value is None:
        return None
    if not isinstance(value, dict):
        raise ConfigurationError("counts must map object names to integers")
    by_label = {k.label: k for k in ObjectKind}
    out = {}
    for name, n in value.items():
        if name not in by_label:
            raise ConfigurationError(f"unknown object {name!r} in counts; valid: {', '.join(by_label)}")
        out[by_label[name]] = int(n)
    return out


def env_from_dict(d: dict, where: str = "env") -> EnvConfig:
    _reject_unknown(d, ENV_KEYS, where)
    if "task" not in d:
        raise ConfigurationError(f"{where}: missing required key 'task'")
    kw = dict(d)
    if "shaping" in kw:
        kw["shaping"] = _shaping(kw["shaping"])
    if "counts" in kw:
        kw["counts"] = _counts(kw["counts"])
    if "dynamism_p" in kw:
        try:
            kw["dynamism_p"] = float(kw["dynamism_p"])
        except (TypeError, ValueError):
            raise ConfigurationError(f"dynamism_p must be a number, got {kw['dynamism_p']!r}") from None
    return EnvConfig(**kw)


def variant_from_dict(d: dict, where: str) -> RunConfig:
    _reject_unknown(d, VARIANT_KEYS, where)
    env = env_from_dict({k: d[k] for k in ENV_KEYS if k in d}, where)
    run_kw = {k: d[k] for k in RUN_KEYS if k in d}
    if "seeds" in run_kw:
        s = run_kw["seeds"]
        run_kw["seeds"] = tuple(range(s)) if isinstance(s, int) else tuple(s)
    eval_env = None
    if d.get("eval_env") is not None:
        eval_env = env_from_dict({"task": env.task.value, **d["eval_env"]}, f"{where}.eval_env")
    return RunConfig(env=env, eval_env=eval_env, name=str(d.get("name", "default")), **run_kw)


def spec_from_dict(doc: dict) -> ExperimentSpec:
    if not isinstance(doc, dict):
        raise ConfigurationError("configuration must be a mapping")
    _reject_unknown(doc, TOP_KEYS + ENV_KEYS + RUN_KEYS + ("eval_env",), "top level")
    shared = {k: v for k, v in doc.items() if k not in TOP_KEYS}
    raw = doc.get("variants") or [{"name": "default"}]
    variants = []
    for i, v in enumerate(raw):
        if not isinstance(v, dict):
            raise ConfigurationError(f"variants[{i}] must be a mapping")
        variants.append(variant_from_dict({**shared, **v}, f"variants[{i}]"))
    return ExperimentSpec(
        name=str(doc.get("name", "experiment")),
        variants=tuple(variants),
        output_dir=str(doc.get("output_dir", "runs")),
        parallelism=int(doc.get("parallelism", 1)),
        seed=int(doc.get("seed", 0)),
    )


def parse_config(path) -> ExperimentSpec:
    path = Path(path)
    with open(path) as f:  # missing file -> OSError
        doc = yaml.safe_load(f)
    return spec_from_dict(doc if doc is not None else {})


def parse_config_text(text: str) -> ExperimentSpec:
    return spec_from_dict(yaml.safe_load(text) or {})


def env_to_dict(env: EnvConfig) -> dict:
    return {
        "task": env.task.value,
        "grid_size": env.grid_size,
        "dynamism_p": env.dynamism_p,
        "shaping": None if env.shaping is None else dataclasses.asdict(env.shaping),
        "reward_mode": env.reward_mode.value,
        "episodic": env.episodic,
        "horizon": env.horizon,
        "nonepisodic_respawn": env.nonepisodic_respawn,
        "predator_penalty": env.predator_penalty,
        "regen_delay": env.regen_delay,
        "counts": None if env.counts is None else {k.label: v for k, v in env.counts.items()},
    }


def variant_to_dict(v: RunConfig) -> dict:
    d = {"name": v.name, **env_to_dict(v.env)}
    ev = env_to_dict(v.eval_env)
    del ev["task"]
    d["eval_env"] = ev
    for k in RUN_KEYS:
        val = getattr(v, k)
        d[k] = list(val) if isinstance(val, tuple) else val
    return d


def spec_to_dict(spec: ExperimentSpec) -> dict:
    return {
        "name": spec.name,
        "output_dir": spec.output_dir,
        "parallelism": spec.parallelism,
        "seed": spec.seed,
        "variants": [variant_to_dict(v) for v in spec.variants],
    }


def serialize(spec: ExperimentSpec) -> str:
    return yaml.safe_dump(spec_to_dict(spec), sort_keys=False)


def expand_sweep(spec: ExperimentSpec, key: str, values) -> ExperimentSpec:
    """Cross every variant with a grid of values for one scalar key."""
    if key not in SWEEPABLE:
        raise ConfigurationError(f"cannot sweep {key!r}; sweepable keys: {', '.join(SWEEPABLE)}")
    out = []
    for v in spec.variants:
        base = variant_to_dict(v)
        for val in values:
            d = dict(base, **{key: val})
            d["name"] = f"{v.name}-{key}{val}"
            if key in ENV_KEYS:
                d.pop("eval_env")  # re-derive from the swept env
            out.append(variant_from_dict(d, d["name"]))
    return dataclasses.replace(spec, variants=tuple(out))

