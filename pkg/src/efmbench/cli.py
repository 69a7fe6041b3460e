"""Operator entry points: dataset generation, policy evaluation, dataset
statistics, episode replay, and task-card listing.

Exit codes: 0 success, 2 configuration/usage error, 3 generation
shortfall, 4 protocol failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SHORTFALL = 3
EXIT_PROTOCOL = 4

TABLE_II_COUNTS = {
    "toy_find": 160,
    "toy_match": 140,
    "cup_hang": 180,
    "cup_place": 120,
    "box_push": 150,
    "light_plug": 300,
    "bread_brush": 200,
    "nail_knock": 150,
    "cable_match": 150,
    "charger_plug": 300,
}


def _data_root(args) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    return Path(os.environ.get("EFM_DATA_ROOT", "./efm_data"))


def _parse_tasks(value: str) -> list:
    from .tasks.cards import TASK_IDS, TaskError

    if value in (None, "", "all"):
        return list(TASK_IDS)
    tasks = [t.strip() for t in value.split(",") if t.strip()]
    for t in tasks:
        if t not in TASK_IDS:
            raise TaskError(f"unknown task {t!r} (known: {', '.join(TASK_IDS)})")
    return tasks


def _generate_one(job):
    """Worker: one demonstration episode, retried on expert failure."""
    task_id, mode, seed, attempts_cap, obs_mode, out = job
    from .data.io import write_episode
    from .expert.demo import demonstrate
    from .tasks.instance import instantiate_task

    attempt_seed = seed
    for _ in range(attempts_cap):
        instance = instantiate_task(task_id, attempt_seed)
        episode = demonstrate(instance, mode, attempt_seed, obs_mode=obs_mode)
        if episode.success:
            return (task_id, seed, attempt_seed, str(write_episode(episode, out)))
        attempt_seed += 1_000_003  # jump to a fresh seed stream
    return (task_id, seed, None, None)


def cmd_generate(args) -> int:
    from .data.stats import compute_stats, format_stats_table
    from .tasks.cards import load_spec

    tasks = _parse_tasks(args.task)
    out = _data_root(args)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as e:
        print(f"error: output root not writable: {e}", file=sys.stderr)
        return EXIT_CONFIG

    counts = {}
    for t in tasks:
        counts[t] = args.count if args.count is not None else TABLE_II_COUNTS[t]
    jobs = []
    for t in tasks:
        for k in range(counts[t]):
            jobs.append((t, args.mode, args.seed + k, 3, args.obs, str(out)))
    if not jobs:
        print("nothing to generate")
        return EXIT_OK

    results = []
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            for res in pool.map(_generate_one, jobs, chunksize=4):
                results.append(res)
    else:
        for job in jobs:
            results.append(_generate_one(job))

    shortfall = {}
    for task_id, seed, used, path in results:
        if path is None:
            shortfall[task_id] = shortfall.get(task_id, 0) + 1
    if any(counts.values()):
        stats = compute_stats(out)
        names = {t: load_spec(t).name for t in tasks}
        print(format_stats_table(stats, names))
    if shortfall:
        print(f"generation shortfall: {shortfall}", file=sys.stderr)
        return EXIT_SHORTFALL
    return EXIT_OK


def cmd_eval(args) -> int:
    from .harness.protocol import open_endpoint
    from .harness.runner import EvalReport, run_trials, trial_seeds
    from .tasks.cards import load_spec

    tasks = _parse_tasks(args.task)
    per_task = {}
    protocol_trouble = False
    endpoint = open_endpoint(args.endpoint)
    try:
        for t in tasks:
            te = run_trials(
                endpoint,
                t,
                n_trials=args.trials,
                seeds=trial_seeds(t, args.trials),
                obs_mode=args.obs,
                view_mode=args.mode,
                ensemble_m=args.ensemble_m,
                no_ensemble=args.no_ensemble,
                fz_convention=args.fz_convention,
            )
            per_task[t] = te
            if te.failure_histogram.get("protocol_error"):
                protocol_trouble = True
    finally:
        endpoint.close()

    report = EvalReport(fz_convention=args.fz_convention, per_task=per_task)
    print(f"{'Task':<14} {'SR (%)':>7} {'Avg Fz Max':>11} {'Fz range':>9}  Failures")
    for t, te in per_task.items():
        name = load_spec(t).name
        fz = te.avg_fz_max if args.fz_convention == "max" else te.avg_fz_min
        hist = ", ".join(f"{k}:{v}" for k, v in te.failure_histogram.items()) or "-"
        print(f"{name:<14} {te.success_rate:>7.1f} {fz:>11.2f} {te.fz_range_mean:>9.2f}  {hist}")
    if args.report:
        Path(args.report).write_text(report.to_json() + "\n")
        print(f"report written to {args.report}")
    return EXIT_PROTOCOL if protocol_trouble else EXIT_OK


def cmd_stats(args) -> int:
    from .data.episode import EpisodeError
    from .data.stats import compute_stats, format_stats_table

    try:
        stats = compute_stats(_data_root(args))
    except EpisodeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    print(format_stats_table(stats))
    return EXIT_OK


def cmd_replay(args) -> int:
    from .data.episode import EpisodeError
    from .harness.runner import replay_episode

    try:
        divergence, frames = replay_episode(args.episode)
    except EpisodeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"replayed {frames} frames, max state divergence {divergence:.9g}")
    return EXIT_OK


def cmd_tasks(args) -> int:
    from .tasks.cards import TASK_IDS, load_spec

    print(f"{'id':<14} {'name':<14} {'category':<24} {'variations':>10} {'time limit':>10}")
    for tid in TASK_IDS:
        spec = load_spec(tid)
        print(
            f"{tid:<14} {spec.name:<14} {spec.category:<24} "
            f"{spec.variation_count:>10} {spec.time_limit_steps:>10}"
        )
        if args.verbose:
            print(f"    instruction: {spec.instruction_template}")
            print(f"    operating {spec.operating_arm}, camera {spec.camera_arm}, "
                  f"handover {spec.handover}")
            print(f"    variations: {json.dumps(list(spec.variations))}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="efm", description="Desk-scale bimanual active-perception benchmark"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate demonstration datasets")
    gen.add_argument("--task", default="all", help="task id, comma list, or 'all'")
    gen.add_argument("--mode", default="area_ee", choices=["none", "area", "area_ee"])
    gen.add_argument("--count", type=int, default=None,
                     help="episodes per task (default: benchmark per-task counts)")
    gen.add_argument("--seed", type=int, default=0, help="first seed")
    gen.add_argument("--out", default=None, help="output root (default $EFM_DATA_ROOT)")
    gen.add_argument("--obs", default="symbolic", choices=["pixels", "symbolic"])
    gen.add_argument("--workers", type=int, default=1)
    gen.set_defaults(fn=cmd_generate)

    ev = sub.add_parser("eval", help="evaluate a policy endpoint")
    ev.add_argument("--endpoint", required=True,
                    help="expert | cmd:<command> | tcp:<host>:<port>")
    ev.add_argument("--task", default="all")
    ev.add_argument("--trials", type=int, default=30)
    ev.add_argument("--mode", default="area_ee", choices=["none", "area", "area_ee"])
    ev.add_argument("--obs", default="symbolic", choices=["pixels", "symbolic"])
    ev.add_argument("--fz-convention", default="max", choices=["max", "min"])
    ev.add_argument("--ensemble-m", type=float, default=0.01)
    ev.add_argument("--no-ensemble", action="store_true",
                    help="execute each chunk open loop (query every 8 steps)")
    ev.add_argument("--report", default=None, help="write the JSON report here")
    ev.set_defaults(fn=cmd_eval)

    st = sub.add_parser("stats", help="dataset statistics")
    st.add_argument("--out", default=None, help="dataset root (default $EFM_DATA_ROOT)")
    st.set_defaults(fn=cmd_stats)

    rp = sub.add_parser("replay", help="re-simulate a stored episode")
    rp.add_argument("episode", help="episode directory")
    rp.set_defaults(fn=cmd_replay)

    tk = sub.add_parser("tasks", help="list task cards")
    tk.add_argument("--verbose", "-v", action="store_true")
    tk.set_defaults(fn=cmd_tasks)
    return parser


def main(argv=None) -> int:
    from .tasks.cards import TaskError

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except TaskError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
