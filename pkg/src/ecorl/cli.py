"""Command-line entry point.

Exit status: 0 success, 1 a run or verification failed, 2 invalid
configuration or usage, 3 I/O problem (missing file, refusal to overwrite,
unreadable checkpoint).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import mdpcore
from .agent import CheckpointError, load_checkpoint
from .experiment import ExperimentSpec, env_from_dict, env_to_dict, expand_sweep, parse_config, serialize
from .gridworld import ConfigurationError, EnvConfig, ShapingSchedule, Task, TrajectoryWriter, encode_flat, reset, step, task_spec
from .harness import (
    RunArtifacts,
    ValidationSet,
    evaluate,
    hitting_time,
    marginal_state_entropy,
    train_seed,
    visitation_heatmap,
    welch_z,
    write_artifacts,
)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("ecorl")


def _guard(path: Path, overwrite: bool) -> Path:
    if path.exists() and not overwrite:
        raise FileExistsError(f"{path} exists; pass --overwrite to replace it")
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path: Path, header, rows, overwrite: bool) -> Path:
    with open(_guard(path, overwrite), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)
    return path


def _base_env(args) -> EnvConfig:
    """Environment from --config (first variant) with --task / --dynamism-p overrides."""
    d = env_to_dict(parse_config(args.config).variants[0].env) if args.config else {"task": Task.FACTORY.value}
    if args.task:
        d["task"] = args.task
    if getattr(args, "dynamism_p", None) is not None:
        d["dynamism_p"] = args.dynamism_p
    return env_from_dict(d)


def _out(args, spec: ExperimentSpec | None = None) -> Path:
    if args.out:
        return Path(args.out)
    return Path(spec.output_dir if spec else "runs")


# train / sweep


def _train_job(job):
    cfg, seed, experiment_seed = job
    validation = ValidationSet(cfg.eval_env, cfg.n_validation, cfg.eval_horizon)
    return train_seed(cfg, seed, validation, experiment_seed)


def run_spec(spec: ExperimentSpec, out: Path, overwrite: bool, experiment_seed: int) -> list:
    from .plotting import plot_curves, plot_heatmap

    # refuse before spending compute
    for v in spec.variants:
        d = out / spec.name / v.env.task.value / v.name
        if d.exists() and any(d.iterdir()) and not overwrite:
            raise FileExistsError(f"{d} already holds results; pass --overwrite to replace them")
    jobs = [(v, s, experiment_seed) for v in spec.variants for s in v.seeds]
    if spec.parallelism > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(spec.parallelism) as pool:
            results = list(pool.map(_train_job, jobs))
    else:
        results = []
        for job in jobs:
            log.info("training %s seed %d", job[0].name, job[1])
            results.append(_train_job(job))

    summaries, curves = [], {}
    k = 0
    for v in spec.variants:
        runs = results[k : k + len(v.seeds)]
        k += len(v.seeds)
        digest = ValidationSet(v.eval_env, v.n_validation, v.eval_horizon).digest()
        art = RunArtifacts(v, runs, digest)
        mdir = write_artifacts(art, out, spec.name, overwrite)
        for run in runs:
            plot_heatmap(np.sum(run.heatmaps, axis=0), mdir / f"seed{run.seed}" / "heatmap_total.png", f"{v.name} seed {run.seed}")
        curves.setdefault(v.env.task.value, {})[v.name] = art.curve()
        summaries.append((v, art))
        rates = art.final_solve_rates()
        print(f"{v.name}\t{v.env.task.value}\tfinal solve rate {np.mean(rates):.3f} +- {np.std(rates):.3f}")
    for task, by_method in curves.items():
        tdir = out / spec.name / task
        rows = [
            (name, r["epoch"], r["env_steps"], r["solve_rate_mean"], r["solve_rate_std"])
            for name, recs in by_method.items()
            for r in recs
        ]
        _write_csv(tdir / "learning_curves.csv", ("method", "epoch", "env_steps", "solve_rate_mean", "solve_rate_std"), rows, True)
        plot_curves(by_method, tdir / "learning_curves.png")
    with open(out / spec.name / "experiment.yaml", "w") as f:
        f.write(serialize(spec))
    return summaries


def cmd_train(args) -> int:
    if not args.config:
        raise ConfigurationError("train needs --config")
    spec = parse_config(args.config)
    if args.epochs is not None:
        spec = dataclasses.replace(spec, variants=tuple(dataclasses.replace(v, epochs=args.epochs) for v in spec.variants))
    seed = spec.seed if args.seed is None else args.seed
    run_spec(spec, _out(args, spec), args.overwrite, seed)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if not args.config:
        raise ConfigurationError("sweep needs --config")
    spec = expand_sweep(parse_config(args.config), args.param, [_number(v) for v in args.values])
    if args.dry_run:
        sys.stdout.write(serialize(spec))
        return EXIT_OK
    seed = spec.seed if args.seed is None else args.seed
    run_spec(spec, _out(args, spec), args.overwrite, seed)
    return EXIT_OK


def _number(s: str):
    try:
        return int(s)
    except ValueError:
        return float(s)


# eval


def cmd_eval(args) -> int:
    net, header = load_checkpoint(args.checkpoint)
    env = parse_config(args.config).variants[0].eval_env if args.config else EnvConfig(header["task"]).evaluation_version()
    if env.task.value != header["task"]:
        raise ConfigurationError(f"checkpoint was trained on {header['task']}, config evaluates {env.task.value}")
    validation = ValidationSet(env, args.n_validation, args.horizon)
    rate = evaluate(net, validation)
    result = {"checkpoint": str(args.checkpoint), "task": header["task"], "global_step": header["global_step"], "solve_rate": rate}
    print(json.dumps(result, sort_keys=True))
    if args.out:
        with open(_guard(Path(args.out) / "eval.json", args.overwrite), "w") as f:
            json.dump(result, f, sort_keys=True, indent=1)
    return EXIT_OK


# metrics


def _condition(env: EnvConfig, cond: str) -> EnvConfig:
    if cond == "static":
        return dataclasses.replace(env, dynamism_p=0.0, shaping=None)
    if cond == "shaped":
        return dataclasses.replace(env, dynamism_p=0.0, shaping=ShapingSchedule())
    if cond.startswith("dynamic"):
        p = float(cond.split(":", 1)[1]) if ":" in cond else 0.1
        return dataclasses.replace(env, dynamism_p=p, shaping=None)
    raise ConfigurationError(f"unknown condition {cond!r}; use static, shaped or dynamic:<p>")


def cmd_hitting_time(args) -> int:
    from .plotting import plot_bars

    env = _base_env(args)
    seed = args.seed or 0
    out = _out(args) / args.experiment / env.task.value
    results = {}
    for cond in args.conditions:
        res = hitting_time(_condition(env, cond), args.runs, args.cap, seed)
        results[cond] = res
        print(f"{cond}\tmean {res.mean:.1f}\tstd {res.std:.1f}\tcensored {res.censored}/{args.runs}")
    rows = [(c, r.mean, r.std, r.censored, args.runs) for c, r in results.items()]
    _write_csv(out / "hitting_time.csv", ("condition", "mean", "std", "censored", "n_runs"), rows, args.overwrite)
    _write_csv(
        out / "hitting_time_runs.csv",
        ("condition", "run", "steps"),
        [(c, i, t) for c, r in results.items() for i, t in enumerate(r.times)],
        args.overwrite,
    )
    conds = list(results)
    for a, b in zip(conds, conds[1:]):
        if len(results[a].times) > 1 and len(results[b].times) > 1:
            print(f"z({a} < {b}) = {welch_z(results[a].times, results[b].times):.2f}")
    plot_bars(conds, [results[c].mean for c in conds], [results[c].std for c in conds], out / "hitting_time.png", "steps to first reward")
    return EXIT_OK


def cmd_entropy(args) -> int:
    from .plotting import plot_bars

    env = _base_env(args)
    base = args.seed or 0
    out = _out(args) / args.experiment / env.task.value
    rows = []
    for p in args.p:
        cfg = dataclasses.replace(env, dynamism_p=float(p), shaping=None)
        for s in range(args.seeds):
            h = marginal_state_entropy(cfg, None, args.steps, seed=base + s)
            rows.append((p, base + s, h))
            log.info("p=%s seed=%d entropy=%.3f", p, base + s, h)
    _write_csv(out / "entropy_runs.csv", ("dynamism_p", "seed", "entropy_nats"), rows, args.overwrite)
    summary = []
    for p in args.p:
        vals = np.array([h for q, _, h in rows if q == p])
        summary.append((p, vals.mean(), vals.std()))
        print(f"p={p}\tentropy {vals.mean():.3f} +- {vals.std():.3f}")
    _write_csv(out / "entropy.csv", ("dynamism_p", "mean", "std"), summary, args.overwrite)
    plot_bars([str(p) for p, _, _ in summary], [m for _, m, _ in summary], [s for _, _, s in summary], out / "entropy.png", "marginal state entropy (nats)")
    return EXIT_OK


def cmd_heatmap(args) -> int:
    from .plotting import plot_heatmap

    env = _base_env(args)
    if args.episodic:
        env = dataclasses.replace(env, episodic=True)
    spec = task_spec(env.task)
    rng = np.random.default_rng(args.seed or 0)
    net = None
    if args.checkpoint:
        net, header = load_checkpoint(args.checkpoint)
        if header["task"] != env.task.value:
            raise ConfigurationError(f"checkpoint task {header['task']} differs from {env.task.value}")
    out = _out(args) / args.experiment / env.task.value
    state = reset(env, seed=int(rng.integers(2**31 - 1)))
    writer = None
    if args.trajectory:
        tf = open(_guard(out / "trajectory.jsonl", args.overwrite), "w")
        writer = TrajectoryWriter(tf)
    positions, ep_len = [], 0
    for _ in range(args.steps):
        if net is None or rng.random() < args.epsilon:
            a = int(rng.integers(6))
        else:
            a = int(np.argmax(net.forward(encode_flat(state, spec))[0]))
        state, outcome = step(state, a, env, observe=False)
        if writer:
            writer.write(state, a, outcome)
        positions.append(state.agent_pos)
        ep_len += 1
        if env.episodic and (outcome.task_completed or ep_len >= env.horizon):
            state = reset(env, seed=int(rng.integers(2**31 - 1)), shaping_clock=state.shaping_clock)
            ep_len = 0
    if writer:
        tf.close()
    heat = visitation_heatmap(positions, env.grid_size)
    path = _guard(out / "heatmap.csv", args.overwrite)
    np.savetxt(path, heat, fmt="%d", delimiter=",")
    plot_heatmap(heat, out / "heatmap.png", f"{env.task.value} {'episodic' if env.episodic else 'non-episodic'}")
    print(f"wrote {path}")
    return EXIT_OK


# theory


def cmd_theory_verify(args) -> int:
    rng = np.random.default_rng(args.seed or 0)
    starts = min(args.starts_per_kernel, args.trials)
    kernels = -(-args.trials // starts)
    res = mdpcore.fuzz_dynamism_theorem(kernels, starts, rng, n_states=args.n_states, n_actions=args.n_actions)
    n = args.trials
    out = _out(args) / args.experiment
    rows = [
        (int(res.trial_id[i]), res.n_states, repr(float(res.epsilon_mass[i])), repr(float(res.linf_before[i])),
         repr(float(res.linf_after[i])), "true" if res.passed[i] else "false")
        for i in range(n)
    ]
    _write_csv(out / "theory_verify.csv", ("trial_id", "n_states", "epsilon_mass", "linf_before", "linf_after", "pass"), rows, args.overwrite)
    n_fail = int((~res.passed[:n]).sum())
    n_bad_assumption = int((~res.assumptions_ok[:n]).sum())

    checks = []
    chain = mdpcore.build_subtask_chain(3, 2, 2, gamma=0.99)
    stage = mdpcore.build_subtask_chain(1, 2, 2, gamma=0.99)
    m_full, m_stage = mdpcore.chain_goal_mismatch(chain), mdpcore.chain_goal_mismatch(stage)
    checks.append(("chain_mismatch_full", m_full))
    checks.append(("chain_mismatch_stages_sum", 3 * m_stage))
    checks.append(("chain_ratio", m_full / (3 * m_stage)))
    checks.append(("iteration_bound(0.9,4,6,10,2)", mdpcore.iteration_bound(0.9, 4, 6, 10, 2)))
    inp = mdpcore.ShapingBoundInputs(delta=1.0, n=1.0, k=1, epsilon=10.0, gamma=0.9, n_states=4, n_actions=6)
    checks.append(("shaping_bound(delta=1,n=1,k=1)", mdpcore.shaping_bound(inp)))
    _write_csv(out / "theory_bounds.csv", ("quantity", "value"), [(k, repr(float(v))) for k, v in checks], args.overwrite)
    _plot_theory(res, n, out / "theory_verify.png")

    print(f"dynamism theorem: {n - n_fail}/{n} triples pass ({n_bad_assumption} violate the assumptions)")
    for k, v in checks:
        print(f"{k}\t{v:.6g}")
    return EXIT_OK if n_fail == 0 and n_bad_assumption == 0 and checks[2][1] >= 2.0 else EXIT_FAILED


def _plot_theory(res, n, path):
    from .plotting import plt

    fig, ax = plt.subplots(figsize=(4, 4))
    ax.scatter(res.linf_before[:n], res.linf_after[:n], s=2, alpha=0.4)
    lim = float(max(res.linf_before[:n].max(), res.linf_after[:n].max())) if n else 1.0
    ax.plot([0, lim], [0, lim], "k--", lw=0.8)
    ax.set_xlabel("L-inf to uniform, original row")
    ax.set_ylabel("L-inf to uniform, perturbed row")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="experiment seed")
    common.add_argument("--out", default=None, help="output root directory")
    common.add_argument("--config", default=None, help="YAML experiment file")
    common.add_argument("--overwrite", action="store_true", help="replace existing outputs")
    common.add_argument("-v", "--verbose", action="store_true")

    env_flags = argparse.ArgumentParser(add_help=False)
    env_flags.add_argument("--task", choices=[t.value for t in Task], default=None)
    env_flags.add_argument("--dynamism-p", type=float, default=None)
    env_flags.add_argument("--experiment", default=None, help="experiment directory name")

    p = argparse.ArgumentParser(prog="ecorl", description="Reset-free RL gridworld laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", parents=[common], help="train every variant of an experiment file")
    t.add_argument("--epochs", type=int, default=None, help="override epochs for all variants")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sweep", parents=[common], help="cross the experiment with a grid over one key")
    s.add_argument("--param", required=True)
    s.add_argument("--values", nargs="+", required=True)
    s.add_argument("--dry-run", action="store_true", help="print the expanded experiment and exit")
    s.set_defaults(func=cmd_sweep)

    e = sub.add_parser("eval", parents=[common], help="solve rate of a checkpoint on the validation set")
    e.add_argument("checkpoint")
    e.add_argument("--n-validation", type=int, default=100)
    e.add_argument("--horizon", type=int, default=100)
    e.set_defaults(func=cmd_eval)

    h = sub.add_parser("hitting-time", parents=[common, env_flags], help="first-reward hitting time of a random policy")
    h.add_argument("--runs", type=int, default=200)
    h.add_argument("--cap", type=int, default=10_000)
    h.add_argument("--conditions", nargs="+", default=["shaped", "dynamic:0.1", "static"])
    h.set_defaults(func=cmd_hitting_time, experiment_default="hitting-time")

    en = sub.add_parser("entropy", parents=[common, env_flags], help="marginal state entropy across dynamism levels")
    en.add_argument("--p", nargs="+", type=float, default=[0.0, 0.01, 0.05, 0.1, 0.5])
    en.add_argument("--steps", type=int, default=100_000)
    en.add_argument("--seeds", type=int, default=10)
    en.set_defaults(func=cmd_entropy, experiment_default="entropy")

    hm = sub.add_parser("heatmap", parents=[common, env_flags], help="agent visitation heatmap of a policy")
    hm.add_argument("--checkpoint", default=None, help="greedy policy from a checkpoint (default: uniform random)")
    hm.add_argument("--epsilon", type=float, default=0.0)
    hm.add_argument("--steps", type=int, default=10_000)
    hm.add_argument("--episodic", action="store_true")
    hm.add_argument("--trajectory", action="store_true", help="also dump trajectory.jsonl")
    hm.set_defaults(func=cmd_heatmap, experiment_default="heatmap")

    th = sub.add_parser("theory", help="exact small-MDP checks")
    tsub = th.add_subparsers(dest="theory_command", required=True)
    v = tsub.add_parser("verify", parents=[common], help="fuzz the dynamism theorem and evaluate the bounds")
    v.add_argument("--trials", type=int, default=1000)
    v.add_argument("--starts-per-kernel", type=int, default=100)
    v.add_argument("--n-states", type=int, default=4)
    v.add_argument("--n-actions", type=int, default=2)
    v.add_argument("--experiment", default=None)
    v.set_defaults(func=cmd_theory_verify, experiment_default="theory")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "experiment", "unset") is None:
        args.experiment = args.experiment_default
    try:
        return args.func(args)
    except (ConfigurationError, mdpcore.MDPError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (CheckpointError, FileExistsError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except mdpcore.NumericalError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
