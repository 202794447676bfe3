"""Command line entry point: ``nystrom-qek {generate-data,train,run,count-executions}``.

Failures exit non-zero after printing one machine-readable line to stderr::

    error: {"type": "ConfigError", "message": "..."}
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .ansatz import init_params
from .datasets import DATASETS, make_dataset, save_csv
from .estimator import seed_streams
from .experiment import (
    count_executions,
    load_config,
    load_dataset,
    run_experiment,
    training_executions,
)
from .kernel import ExecutionLedger
from .noise import NoiseConfig
from .trainer import TrainConfig, train


def _kv(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), float(v)


def cmd_generate_data(args):
    kw = dict(args.param or [])
    kw = {k: int(v) if k.startswith("n_") else v for k, v in kw.items()}
    ds = make_dataset(args.dataset, seed=args.seed, **kw)
    save_csv(ds, args.out)
    print(json.dumps({"dataset": args.dataset, "train": len(ds.train_y),
                      "test": len(ds.test_y), "path": str(args.out)}))


def cmd_train(args):
    cfg = load_config(args.config)
    ds = load_dataset(cfg)
    cfg.validate(len(ds.train_y))
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for seed in (s + args.seed_offset for s in cfg.seeds):
        for level in cfg.noise_levels:
            s_init, s_batch, _, s_noise, _ = seed_streams(seed)
            noise = NoiseConfig.from_level(cfg.noise, level, seed=seed,
                                           perturb_encoding=cfg.perturb_encoding)
            ledger = ExecutionLedger()
            tcfg = TrainConfig(iterations=cfg.iterations, batch_size=cfg.batch_size,
                               learning_rate=cfg.learning_rate, seed=seed,
                               gradient_method=cfg.gradient_method)
            params, trace = train(ds.train_x, ds.train_y,
                                  init_params(cfg.layers, cfg.qubits, s_init), tcfg,
                                  noise, ledger, s_batch, s_noise)
            stem = f"{cfg.noise}-{level!r}_seed{seed}"
            lines = ["iteration,kta_batch,circuit_executions"]
            lines += [f"{r.iteration},{r.kta_batch!r},{r.executions}" for r in trace.records]
            (out / f"trace_{stem}.csv").write_text("\n".join(lines) + "\n")
            (out / f"params_{stem}.json").write_text(json.dumps(params.to_dict()) + "\n")
            print(json.dumps({"seed": seed, "level": level, "executions": ledger.count}))


def cmd_run(args):
    cfg = load_config(args.config)
    summary = run_experiment(cfg, args.output_dir, args.seed_offset, args.jobs)
    for lvl in summary["levels"]:
        fin = lvl["final"]
        print(json.dumps({
            "noise": lvl["noise"], "level": lvl["level"],
            "kta_full": fin["kta_full"], "test_acc": fin["test_acc"],
            "total_executions": lvl["total_executions"],
            "executions_match_prediction": lvl["executions_match_prediction"],
        }))


def cmd_count(args):
    res = count_executions(args.n, args.p, args.m, args.method)
    if args.iterations:
        res["training"] = training_executions(args.iterations, args.batch_size,
                                              args.layers, args.qubits)
    print(json.dumps(res))


def build_parser():
    p = argparse.ArgumentParser(prog="nystrom-qek", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-data", help="write a synthetic dataset as CSV")
    g.add_argument("--dataset", choices=DATASETS, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--param", type=_kv, action="append", metavar="KEY=VALUE",
                   help="generator keyword argument, repeatable")
    g.add_argument("--out", type=Path, required=True)
    g.set_defaults(func=cmd_generate_data)

    for name, func, helptext in (("train", cmd_train, "run mini-batch KTA training only"),
                                 ("run", cmd_run, "run the full pipeline")):
        r = sub.add_parser(name, help=helptext)
        r.add_argument("config", type=Path)
        r.add_argument("output_dir", type=Path)
        r.add_argument("--seed-offset", type=int, default=0,
                       help="added to every configured seed (for sharding)")
        if name == "run":
            r.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        r.set_defaults(func=func)

    c = sub.add_parser("count-executions", help="closed-form circuit execution counts")
    c.add_argument("--n", type=int, required=True, help="training set size")
    c.add_argument("--p", type=int, default=0, help="test set size")
    c.add_argument("--m", type=int, default=None, help="landmarks")
    c.add_argument("--method", choices=("standard", "nystrom"), default="standard")
    c.add_argument("--iterations", type=int, default=0)
    c.add_argument("--batch-size", type=int, default=8)
    c.add_argument("--layers", type=int, default=5)
    c.add_argument("--qubits", type=int, default=4)
    c.set_defaults(func=cmd_count)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - reported as a machine-readable line
        print("error: " + json.dumps({"type": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
