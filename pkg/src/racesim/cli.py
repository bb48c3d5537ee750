"""Command-line front end: rollouts, mask rendering, throughput benchmarks.

    racesim run    --track T [--config C] [--seed S] [--steps N]
                   [--policy hover|max-thrust|ACTIONFILE] [--out replay.bin]
    racesim render --replay R [--frames A:B] --out DIR
    racesim bench  [--track T] [--config C] [--batch B] [--duration SEC]

Exit codes: 0 ok, 2 usage, 3 config error, 4 track error, 5 I/O or data error.
Each command prints a human-readable summary followed by one JSON line for
machine consumption. Flags win over config-file values.
"""

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .camera import write_pgm
from .config import ConfigError, EnvConfig, load_config
from .dynamics import DroneState, hover_trim
from .env import BatchedEnv, RaceEnv
from .quat import euler_to_quat, quat_to_euler
from .replay import ReplayError, read_replay
from .track import TrackError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_TRACK = 4
EXIT_IO = 5


class PolicyFileError(Exception):
    pass


def _load_action_file(path, steps: int) -> np.ndarray:
    try:
        rows = []
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise PolicyFileError(f"{path}:{lineno}: expected 4 motor commands, got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise PolicyFileError(f"{path}:{lineno}: bad number in action file") from None
    except OSError as exc:
        raise PolicyFileError(f"cannot read action file {path}: {exc}") from exc
    if len(rows) < steps:
        raise PolicyFileError(
            f"action file {path} has {len(rows)} steps but {steps} were requested")
    return np.asarray(rows, dtype=float)


def _merged_config(args) -> EnvConfig:
    cfg = load_config(args.config)
    updates = {}
    if getattr(args, "track", None):
        updates["track_path"] = args.track
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "out", None) and args.command == "run":
        updates["replay_path"] = args.out
    if updates:
        cfg = replace(cfg, **updates)
    return cfg


def cmd_run(args) -> int:
    cfg = _merged_config(args)
    env = RaceEnv(cfg)
    steps = args.steps

    if args.policy == "hover":
        env.reset(seed=cfg.seed)
        psi = quat_to_euler(env.draw.initial.quat)[2]
        speeds, u = hover_trim(env.params)
        start = DroneState(
            pos=env.draw.initial.pos.copy(),
            quat=euler_to_quat(0.0, 0.0, psi),
            vel=np.zeros(3), rates=np.zeros(3),
            motors=speeds,
        )
        env.reset(seed=cfg.seed, initial_state=start, initial_action=u)
        actions = np.tile(u, (steps, 1))
    elif args.policy == "max-thrust":
        env.reset(seed=cfg.seed)
        psi = quat_to_euler(env.draw.initial.quat)[2]
        start = DroneState(
            pos=env.draw.initial.pos.copy(),
            quat=euler_to_quat(0.0, 0.0, psi),
            vel=np.zeros(3), rates=np.zeros(3),
            motors=np.full(4, env.params.omega_max),
        )
        u = np.ones(4)
        env.reset(seed=cfg.seed, initial_state=start, initial_action=u)
        actions = np.tile(u, (steps, 1))
    else:
        actions = _load_action_file(args.policy, steps)
        env.reset(seed=cfg.seed)

    total = 0.0
    crossings = 0
    laps = 0
    max_speed = float(np.linalg.norm(env.state.vel))
    max_force = float(np.linalg.norm(env.specific_force()))
    steps_run = 0
    outcome = "ran to step limit"
    for t in range(steps):
        res = env.step(actions[t])
        steps_run += 1
        total += res.reward.total
        crossings += len(res.info["crossings"])
        laps = res.info["lap"]
        max_speed = max(max_speed, float(np.linalg.norm(env.state.vel)))
        max_force = max(max_force, float(np.linalg.norm(env.specific_force())))
        if res.terminated:
            outcome = f"terminated: {res.reason.kind} ({res.reason.detail})"
            break
        if res.truncated:
            outcome = "truncated at episode cap"
            break
    env.close()

    summary = {
        "command": "run",
        "policy": args.policy,
        "seed": cfg.seed,
        "steps": steps_run,
        "return": total,
        "laps": laps,
        "crossings": crossings,
        "max_speed": max_speed,
        "max_specific_force": max_force,
        "outcome": outcome,
        "replay": cfg.replay_path,
    }
    print(f"rollout: {steps_run} steps, {outcome}")
    print(f"  return {total:.4f}, laps {laps}, crossings {crossings}")
    print(f"  max speed {max_speed:.3f} m/s, max specific force {max_force:.3f} m/s^2")
    if cfg.replay_path:
        print(f"  replay written to {cfg.replay_path}")
    print(json.dumps(summary))
    return EXIT_OK


def _parse_frames(spec: str, n_records: int) -> range:
    if spec is None:
        return range(n_records)
    try:
        a_str, b_str = spec.split(":", 1)
        a = int(a_str) if a_str else 0
        b = int(b_str) if b_str else n_records
    except ValueError:
        raise PolicyFileError(f"bad frame range {spec!r}, expected A:B") from None
    if a < 0 or b > n_records:
        raise IndexError(f"frame range {spec} out of bounds for {n_records} records")
    return range(a, b)


def cmd_render(args) -> int:
    records = read_replay(args.replay)
    frames = _parse_frames(args.frames, len(records))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for idx in frames:
        write_pgm(out_dir / f"frame_{idx:06d}.pgm", records[idx].mask)
    print(f"wrote {len(frames)} graymaps to {out_dir}")
    print(json.dumps({"command": "render", "frames": len(frames), "out": str(out_dir)}))
    return EXIT_OK


def _bench_phase(cfg: EnvConfig, batch: int, duration: float) -> float:
    envs = BatchedEnv(cfg, batch, workers=args_workers(batch))
    envs.reset_all()
    actions = np.full((batch, 4), 0.55)
    start = time.perf_counter()
    deadline = start + duration
    steps = 0
    while time.perf_counter() < deadline:
        results = envs.step(actions)
        steps += batch
        for env, res in zip(envs.envs, results):
            if res.terminated or res.truncated:
                env.reset()
    elapsed = time.perf_counter() - start
    envs.close()
    return steps / elapsed


def args_workers(batch: int) -> int:
    import os

    return min(batch, os.cpu_count() or 1)


def cmd_bench(args) -> int:
    cfg = _merged_config(args)
    if args.batch < 1:
        print("batch must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    full = _bench_phase(replace(cfg, render_masks=True), args.batch, args.duration)
    physics = _bench_phase(replace(cfg, render_masks=False), args.batch, args.duration)
    print(f"bench (batch {args.batch}, {args.duration:.1f}s per phase):")
    print(f"  physics + render: {full:8.0f} control steps/s")
    print(f"  physics only:     {physics:8.0f} control steps/s")
    print(json.dumps({
        "command": "bench", "batch": args.batch, "duration": args.duration,
        "steps_per_sec_render": full, "steps_per_sec_physics": physics,
    }))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="racesim",
                                     description="drone-racing simulator front end")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="roll out a scripted policy and log a replay")
    run.add_argument("--track", help="track file (overrides config)")
    run.add_argument("--config", help="YAML config file")
    run.add_argument("--seed", type=int, help="seed (overrides config)")
    run.add_argument("--steps", type=int, default=900, help="max control steps")
    run.add_argument("--policy", default="hover",
                     help="hover | max-thrust | path to an action file (4 values per line)")
    run.add_argument("--out", help="replay output path")

    render = sub.add_parser("render", help="dump replay masks as graymap files")
    render.add_argument("--replay", required=True, help="replay file")
    render.add_argument("--frames", help="record range A:B (default: all)")
    render.add_argument("--out", required=True, help="output directory")

    bench = sub.add_parser("bench", help="throughput benchmark")
    bench.add_argument("--track", help="track file (overrides config)")
    bench.add_argument("--config", help="YAML config file")
    bench.add_argument("--seed", type=int, help="seed (overrides config)")
    bench.add_argument("--batch", type=int, default=1)
    bench.add_argument("--duration", type=float, default=2.0, help="seconds per phase")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": cmd_run, "render": cmd_render, "bench": cmd_bench}
    try:
        return handlers[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrackError as exc:
        print(f"track error: {exc}", file=sys.stderr)
        return EXIT_TRACK
    except (ReplayError, PolicyFileError, IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
