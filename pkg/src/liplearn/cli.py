"""Command-line entry points: train sweeps, robustification sweeps,
model evaluation, and dataset generation, emitting plot-ready CSV/JSON.

All randomness flows from config seeds; reruns with the same config produce
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io as lio
from .data import CheckerboardSpec, gen_checkerboard, load_idx_dataset, split
from .evaluation import evaluate, sensitivity
from .graph import build_knn_graph, partition_dataset, select_vertices
from .lipsolver import SolverConfig, solve_lipschitz_constrained
from .loss import LossSpec
from .plapsolver import ContinuationSchedule, robustify, tradeoff_curve

__all__ = ["main", "build_pipeline", "cmd_train", "cmd_robustify", "cmd_eval", "cmd_gen_data"]


def _load_config(path, seed_override=None, out_override=None):
    with open(path) as fh:
        cfg = json.load(fh)
    if seed_override is not None:
        cfg.setdefault("dataset", {})["seed"] = seed_override
        cfg.setdefault("graph", {})["seed"] = seed_override
    if out_override is not None:
        cfg["output_dir"] = out_override
    cfg.setdefault("output_dir", "out")
    return cfg


def _make_dataset(block):
    kind = block.get("kind", "checkerboard")
    if kind == "checkerboard":
        ds = gen_checkerboard(CheckerboardSpec(
            n_samples=int(block.get("n_samples", 10_000)),
            grid=int(block.get("grid", 4)),
            seed=int(block.get("seed", 0)),
        ))
        return split(ds, float(block.get("test_fraction", 0.2)),
                     seed=int(block.get("seed", 0)) + 1)
    if kind == "mnist":
        train = load_idx_dataset(
            block["train_images"], block["train_labels"],
            n_classes=int(block.get("n_classes", 10)),
            subsample=block.get("subsample"),
            seed=int(block.get("seed", 0)),
        )
        if "test_images" in block:
            test = load_idx_dataset(
                block["test_images"], block["test_labels"],
                n_classes=int(block.get("n_classes", 10)),
                subsample=block.get("test_subsample"),
                seed=int(block.get("seed", 0)) + 1,
            )
            return train, test
        return split(train, float(block.get("test_fraction", 0.2)),
                     seed=int(block.get("seed", 0)) + 1)
    if kind == "csv":
        train = lio.read_dataset_csv(block["train"])
        if "test" in block:
            return train, lio.read_dataset_csv(block["test"])
        return split(train, float(block.get("test_fraction", 0.2)),
                     seed=int(block.get("seed", 0)) + 1)
    raise ValueError(f"unknown dataset kind {kind!r}")


def _solver_config(block):
    fields = dict(block or {})
    fields.setdefault("project_to_y", True)
    return SolverConfig(**fields)


def build_pipeline(cfg):
    """Config dict -> (train, test, vertices, graph, partition, loss spec)."""
    train, test = _make_dataset(cfg.get("dataset", {}))
    gblock = cfg.get("graph", {})
    vertices = select_vertices(
        train, int(gblock.get("n", 200)),
        method=gblock.get("method", "iid"),
        seed=int(gblock.get("seed", 0)),
    )
    graph = build_knn_graph(vertices, int(gblock.get("k", 10)))
    partition = partition_dataset(vertices, train)
    spec = LossSpec.squared_for_simplex(train.dim_y)
    return train, test, vertices, graph, partition, spec


def cmd_train(cfg, quiet=False) -> int:
    train, test, vertices, graph, partition, spec = build_pipeline(cfg)
    solver = _solver_config(cfg.get("solver"))
    exp = cfg.get("experiment", {})
    alphas = [float(a) for a in exp.get("alpha_grid", [1.0])]
    delta = float(exp.get("delta", 0.05))
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    all_ok = True
    for idx, alpha in enumerate(alphas):
        rep = solve_lipschitz_constrained(graph, partition, train, alpha, spec, solver)
        metrics = evaluate(vertices, rep.labeling, test, spec)
        sens = sensitivity(vertices, graph, rep.labeling, test, delta, spec)
        rows.append([alpha, rep.loss, metrics.accuracy, metrics.mean_confidence,
                     rep.lipschitz, sens.max_confidence_degradation,
                     rep.iterations, rep.converged])
        lio.save_solve_report(out / f"model_alpha_{idx}.json", rep, graph)
        all_ok &= rep.converged
        if not quiet:
            print(f"alpha={alpha:g}: loss={rep.loss:.6f} acc={metrics.accuracy:.4f} "
                  f"conf={metrics.mean_confidence:.4f} lip={rep.lipschitz:.4f} "
                  f"kkt={'pass' if rep.converged else 'FAIL'}")
    lio.write_rows_csv(out / "train_sweep.csv",
                       ["alpha", "loss", "accuracy", "confidence", "lipschitz",
                        "sensitivity", "iters", "kkt_pass"], rows)
    return 0 if all_ok else 1


def cmd_robustify(cfg, quiet=False) -> int:
    train, test, vertices, graph, partition, spec = build_pipeline(cfg)
    solver = _solver_config(cfg.get("solver"))
    exp = cfg.get("experiment", {})
    alpha = float(exp.get("alpha", max(exp.get("alpha_grid", [1.0]))))
    eps_grid = [float(e) for e in exp.get("epsilon_grid", [0.0])]
    schedule = ContinuationSchedule(
        p_values=tuple(float(p) for p in exp.get("p_values", (2, 4, 8, 16, 32, 64))),
        config=solver,
        dual_period=int(exp.get("dual_period", 100)),
    )
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    points, reports = tradeoff_curve(graph, partition, train, alpha, eps_grid,
                                     spec, schedule, testset=test)
    ladder_rows = []
    for rep in reports:
        for rec in rep.records:
            ladder_rows.append([rep.epsilon, rec.p, rec.seminorm_norm,
                                rec.lipschitz, rec.loss, rec.kappa])
    lio.write_rows_csv(out / "robustify_ladder.csv",
                       ["epsilon", "p", "seminorm_norm", "lipschitz", "loss", "kappa"],
                       ladder_rows)
    lio.write_rows_csv(out / "tradeoff.csv",
                       ["epsilon", "lipschitz", "loss", "accuracy", "confidence"],
                       [[p.epsilon, p.lipschitz, p.loss, p.accuracy, p.confidence]
                        for p in points])
    if not quiet:
        for p in points:
            print(f"eps={p.epsilon:g}: lip={p.lipschitz:.4f} loss={p.loss:.6f} "
                  f"acc={p.accuracy:.4f} conf={p.confidence:.4f}")
    return 0


def cmd_eval(cfg, model_path, delta, quiet=False) -> int:
    train, test, vertices, graph, partition, spec = build_pipeline(cfg)
    rep = lio.load_solve_report(model_path, graph)
    metrics = evaluate(vertices, rep.labeling, test, spec)
    sens = sensitivity(vertices, graph, rep.labeling, test, delta, spec)
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.json", "w") as fh:
        json.dump({
            "accuracy": metrics.accuracy,
            "mean_confidence": metrics.mean_confidence,
            "test_loss": metrics.test_loss,
            "n_test": metrics.n_test,
        }, fh, indent=1)
    with open(out / "sensitivity.json", "w") as fh:
        json.dump({
            "max_confidence_degradation": sens.max_confidence_degradation,
            "bound_value": sens.bound_value,
            "bound_satisfied": sens.bound_satisfied,
            "delta": sens.delta,
            "n_adjacent": sens.n_adjacent,
            "degradations": sens.degradations.tolist(),
        }, fh, indent=1)
    if not quiet:
        print(f"accuracy={metrics.accuracy:.4f} confidence={metrics.mean_confidence:.4f} "
              f"sensitivity={sens.max_confidence_degradation:.4f} "
              f"bound={'ok' if sens.bound_satisfied else 'VIOLATED'}")
    return 0


def cmd_gen_data(cfg, quiet=False) -> int:
    train, test = _make_dataset(cfg.get("dataset", {}))
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    lio.write_dataset_csv(out / "train.csv", train)
    lio.write_dataset_csv(out / "test.csv", test)
    if not quiet:
        print(f"wrote {train.n} train / {test.n} test samples to {out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="liplearn",
        description="Lipschitz-constrained graph learning experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("train", "robustify", "gen-data"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--quiet", action="store_true")
    sp = sub.add_parser("eval")
    sp.add_argument("--config", required=True)
    sp.add_argument("--model", required=True)
    sp.add_argument("--delta", type=float, default=0.05)
    sp.add_argument("--out", default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    try:
        cfg = _load_config(args.config, args.seed, args.out)
        if args.command == "train":
            return cmd_train(cfg, quiet=args.quiet)
        if args.command == "robustify":
            return cmd_robustify(cfg, quiet=args.quiet)
        if args.command == "eval":
            return cmd_eval(cfg, args.model, args.delta, quiet=args.quiet)
        if args.command == "gen-data":
            return cmd_gen_data(cfg, quiet=args.quiet)
        raise ValueError(f"unknown command {args.command!r}")
    except Exception as exc:  # noqa: BLE001 - single CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
