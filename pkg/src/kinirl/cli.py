"""Command-line entry point: ``kinirl {gen,train,plan,eval,bench}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data/format or
planning error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import io_formats
from .errors import ArgumentError, KinIRLError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _int_tuple(n):
    def parse(text):
        try:
            vals = tuple(int(x) for x in text.split(","))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated integers, got {text!r}")
        if len(vals) != n:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated integers, got {text!r}")
        return vals
    return parse


def build_parser():
    p = _Parser(prog="kinirl", description="Kinematics-aware maximum-entropy deep IRL on grid maps.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="synthesise a scene/demo dataset")
    g.add_argument("--behavior", required=True, choices=["E1", "E2", "E3", "E4"])
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--size", type=int, default=32)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train a cost network on a dataset")
    t.add_argument("--config", required=True)
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--init-seed", type=int, default=None,
                   help="network initialisation seed (default: config seed)")
    t.add_argument("--quiet", action="store_true")

    pl = sub.add_parser("plan", help="plan a trajectory on one scene with a trained model")
    pl.add_argument("--model", required=True)
    pl.add_argument("--scene", required=True)
    pl.add_argument("--start", required=True, type=_int_tuple(3), help="row,col,heading")
    pl.add_argument("--goal", required=True, type=_int_tuple(2), help="row,col")
    pl.add_argument("--out", required=True, help="trajectory CSV; .pgm and .png siblings are written too")
    pl.add_argument("--K", type=int, default=150)
    pl.add_argument("--T", type=int, default=120)
    pl.add_argument("--gamma", type=float, default=0.95)

    e = sub.add_parser("eval", help="average Hausdorff distance of sampled rollouts vs demos")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True, help="per-sample CSV; a .png sibling is written too")
    e.add_argument("--n", type=int, default=30, help="rollouts per demo")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--K", type=int, default=150)
    e.add_argument("--T", type=int, default=120)
    e.add_argument("--gamma", type=float, default=0.95)

    b = sub.add_parser("bench", help="time the value-iteration and visitation stages")
    b.add_argument("--size", type=int, default=100)
    b.add_argument("--orients", type=int, default=8)
    b.add_argument("--actions", type=int, default=6)
    b.add_argument("--iters", type=int, default=150)
    b.add_argument("--svf-iters", type=int, default=120)
    b.add_argument("--engine", choices=["conv", "naive", "both"], default="conv")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default=None, help="CSV path (default: stdout); a .png sibling is written")
    return p


# --- commands --------------------------------------------------------------

def cmd_gen(args):
    from .scene_synth import make_dataset

    if args.count < 1:
        raise ArgumentError(f"--count must be >= 1, got {args.count}")
    samples = make_dataset(args.behavior, args.count, args.seed, args.size)
    io_formats.write_dataset(args.out, samples)
    print(f"wrote {len(samples)} samples to {args.out}")


def cmd_train(args):
    from .irl_trainer import train
    from .plotting import plot_training
    from .reward_net import init_params

    config = io_formats.load_config(args.config)
    dataset = io_formats.read_dataset(args.data)
    params = init_params(config.seed if args.init_seed is None else args.init_seed)
    out = Path(args.out)

    def progress(it, report):
        if not args.quiet and (it == 1 or it % 10 == 0 or it == config.iterations):
            print(f"iter {it:5d}  gap {report.l1_svf_gap[-1]:9.3f}  nll {report.mean_nll[-1]:9.3f}",
                  file=sys.stderr)

    params, report = train(config, dataset, params, checkpoint_dir=out, progress=progress)
    io_formats.save_model(out / "model.fcn", params)
    report.write_csv(out / "report.csv")
    plot_training(report, out / "loss.png")
    print(f"final model {out / 'model.fcn'}, report {out / 'report.csv'}")


def _policy_for(params, scene, goal, K, gamma):
    from .grid_mdp import build_transition_kernels
    from .reward_net import fcn_forward
    from .soft_vi import soft_value_iteration

    if not 0 <= gamma < 1:
        raise ArgumentError(f"--gamma must lie in [0, 1), got {gamma}")
    kernels = build_transition_kernels(gamma=gamma)
    cost, _ = fcn_forward(params, scene)
    _, policy = soft_value_iteration(-cost, kernels, goal, K)
    return cost, policy, kernels


def cmd_plan(args):
    from .planner_eval import greedy_plan
    from .plotting import plot_plan

    params = io_formats.load_model(args.model)
    scene = io_formats.read_grid(args.scene)
    cost, policy, kernels = _policy_for(params, scene, args.goal, args.K, args.gamma)
    traj = greedy_plan(policy, kernels, args.start, args.goal, args.T)
    out = Path(args.out)
    io_formats.write_traj(out, traj)
    lo, hi = float(cost.min()), float(cost.max())
    io_formats.export_pgm(cost, out.with_suffix(".pgm"), lo, hi if hi > lo else lo + 1.0)
    plot_plan(cost, traj, out.with_suffix(".png"), goal=args.goal)
    print(f"planned {traj.n_moves} moves to {args.goal}; wrote {out}")


def cmd_eval(args):
    from .planner_eval import average_hd, trajectory_reward
    from .plotting import plot_eval

    params = io_formats.load_model(args.model)
    dataset = io_formats.read_dataset(args.data)
    out = Path(args.out)
    rows = []
    for i, demo in enumerate(dataset):
        cost, policy, kernels = _policy_for(params, demo.scene, demo.goal, args.K, args.gamma)
        hd, detail = average_hd(policy, kernels, demo, args.n, seed=args.seed + i, t_max=args.T,
                                resolution_m=demo.resolution_m, details=True)
        reached = np.mean([d[1] for d in detail])
        pol_reward = np.mean([trajectory_reward(-cost, d[2], kernels.gamma) for d in detail])
        rows.append((i, hd, hd / demo.resolution_m, reached, reached == 1.0,
                     trajectory_reward(-cost, demo.trajectory, kernels.gamma), pol_reward))
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample", "avg_hd_m", "avg_hd_cells", "completion_rate", "all_completed",
                    "expert_reward", "policy_reward"])
        for r in rows:
            w.writerow([r[0], f"{r[1]:.6f}", f"{r[2]:.6f}", f"{r[3]:.4f}", int(r[4]),
                        f"{r[5]:.6f}", f"{r[6]:.6f}"])
    hds = np.array([r[1] for r in rows])
    plot_eval(hds, out.with_suffix(".png"))
    print(f"samples {len(rows)}  mean avg-HD {hds.mean():.4f} m "
          f"({hds.mean() / dataset[0].resolution_m:.3f} cells)  "
          f"completion {np.mean([r[3] for r in rows]):.3f} (incomplete rollouts included)")


def run_bench(size, orients, actions, iters, svf_iters, engine, seed=0):
    """Time both stages on one random instance; returns ``[(engine, stage, seconds)]``."""
    from .grid_mdp import build_transition_kernels
    from .soft_vi import reference_value_iteration, soft_value_iteration
    from .svf import expected_svf, one_hot_init, reference_expected_svf

    kernels = build_transition_kernels(orients, actions, 0.95)
    rng = np.random.default_rng(seed)
    reward = rng.uniform(-5.0, 0.0, (size, size))
    goal = (int(rng.integers(size)), int(rng.integers(size)))
    init = one_hot_init((size, size), (size // 2, size // 2), 0, orients)
    engines = ["conv", "naive"] if engine == "both" else [engine]
    stages = {
        "conv": (soft_value_iteration, expected_svf),
        "naive": (reference_value_iteration, reference_expected_svf),
    }
    rows = []
    for eng in engines:
        vi, svf = stages[eng]
        t0 = time.perf_counter()
        _, policy = vi(reward, kernels, goal, iters)
        t1 = time.perf_counter()
        svf(policy, kernels, init, goal, svf_iters)
        t2 = time.perf_counter()
        rows += [(eng, "RL", t1 - t0), (eng, "Svf", t2 - t1)]
    return rows


def cmd_bench(args):
    from .plotting import plot_bench

    if args.size < 3 or args.iters < 1 or args.svf_iters < 1:
        raise ArgumentError("size must be >= 3 and iteration counts >= 1")
    rows = run_bench(args.size, args.orients, args.actions, args.iters, args.svf_iters,
                     args.engine, args.seed)
    header = ["engine", "stage", "size", "orients", "actions", "iters", "seconds"]
    lines = [[eng, stage, args.size, args.orients, args.actions,
              args.iters if stage == "RL" else args.svf_iters, f"{sec:.6f}"] for eng, stage, sec in rows]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(lines)
        plot_bench(rows, Path(args.out).with_suffix(".png"))
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(lines)


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "plan": cmd_plan, "eval": cmd_eval, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[args.command](args)
    except KinIRLError as exc:
        print(f"kinirl {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"kinirl {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
