"""Command-line harness: dataset generation, training, evaluation,
parameter sweeps, and the gradient self-check."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys

from . import data, gradcheck, metrics, model as model_io, sweep, train
from .config import SimConfig, TrainConfig, load_config, train_config_to_dict


def _load_or_default(path: str | None) -> tuple[SimConfig, TrainConfig, dict]:
    if path is None:
        return SimConfig(), TrainConfig(), {}
    return load_config(path)


def cmd_gen(args) -> int:
    sim, _, _ = _load_or_default(args.config)
    sim = dataclasses.replace(sim, seed=args.seed)
    samples = data.build_dataset(sim, args.topologies, args.draws, args.seed)
    data.write_ndjson(args.out, samples)
    print(f"wrote {len(samples)} samples "
          f"({args.topologies} topologies x {args.draws} draws) to {args.out}")
    return 0


def cmd_train(args) -> int:
    sim, tc, _ = _load_or_default(args.config)
    tc = dataclasses.replace(tc, model=args.model, seed=args.seed)
    samples = data.read_ndjson(args.dataset)
    if not samples:
        print("error: dataset is empty", file=sys.stderr)
        return 1
    sim = dataclasses.replace(samples[0].config, seed=args.seed)
    trained, history, cv_log = train.fit(samples, sim, tc)
    model_io.save_checkpoint(args.out, trained,
                             train_config=train_config_to_dict(tc),
                             extra={"cv_log": cv_log})
    history_path = args.out + ".history.csv"
    with open(history_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mean_train_loss", "mean_val_loss"])
        for row in history:
            writer.writerow([row.epoch, repr(row.mean_train_loss),
                             "" if row.mean_val_loss is None else repr(row.mean_val_loss)])
    print(f"trained {tc.model} on {len(samples)} samples; "
          f"final mean train loss {history[-1].mean_train_loss:.6f}")
    print(f"checkpoint: {args.out}\nhistory: {history_path}")
    return 0


def cmd_eval(args) -> int:
    trained, payload = model_io.load_checkpoint(args.ckpt)
    samples = data.read_ndjson(args.dataset)
    if not samples:
        print("error: dataset is empty", file=sys.stderr)
        return 1
    expected = trained.dims.n_nodes
    actual = samples[0].n_nodes
    if actual != expected:
        print(f"error: checkpoint built for N={expected} nodes but dataset "
              f"has N={actual}", file=sys.stderr)
        return 1
    table = train.evaluate(trained, samples)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row_type", "sample", "masked_mse", "euclid"])
        for idx, (mse, euc) in enumerate(zip(table.per_sample_mse, table.per_sample_euclid)):
            writer.writerow(["sample", idx, repr(mse), repr(euc)])
        writer.writerow(["mean", "", repr(table.mse_mean), repr(table.euclid_mean)])
        writer.writerow(["std", "", repr(table.mse_std), repr(table.euclid_std)])
    print(f"evaluated {len(samples)} samples: masked MSE "
          f"{table.mse_mean:.6f} +- {table.mse_std:.6f} m^2, "
          f"mean error {table.euclid_mean:.6f} +- {table.euclid_std:.6f} m")
    if args.cdf:
        series = metrics.emit_cdf(table.per_node_errors)
        with open(args.cdf, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["error", "probability"])
            for e, p in zip(series.errors, series.probabilities):
                writer.writerow([repr(float(e)), repr(float(p))])
        print(f"cdf series ({len(series.errors)} points): {args.cdf}")
    return 0


def cmd_sweep(args) -> int:
    sim, tc, extras = _load_or_default(args.config)
    spec = sweep.SweepSpec(
        param=args.param,
        values=[float(v) for v in args.values.split(",")],
        models=args.models.split(","),
        seeds=[int(s) for s in args.seeds.split(",")],
        sim=sim,
        tc=tc,
        topologies=int(extras.get("topologies", 100)),
        draws=int(extras.get("draws", 10)),
    )
    rows = sweep.run_sweep(spec)
    sweep.write_sweep_csv(args.out, rows)
    failed = [r for r in rows if r["row_type"] == "failed"]
    print(f"sweep over {args.param}: {len(rows)} rows "
          f"({len(failed)} failed) -> {args.out}")
    return 1 if failed else 0


def cmd_gradcheck(args) -> int:
    if args.config:
        sim, tc, _ = load_config(args.config)
    else:
        sim, tc = gradcheck.TINY_SIM, gradcheck.TINY_TRAIN
    worst = gradcheck.run_gradcheck(sim, tc)
    ok = worst < gradcheck.REL_TOLERANCE
    print(f"worst relative error {worst:.3e} "
          f"({'PASS' if ok else 'FAIL'} at {gradcheck.REL_TOLERANCE})")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wsnloc",
        description="RSSI sensor-network localization lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a dataset as NDJSON")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--topologies", type=int, required=True)
    p.add_argument("--draws", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a model on an NDJSON dataset")
    p.add_argument("--dataset", type=str, required=True)
    p.add_argument("--model", type=str, required=True,
                   choices=["ubigtloc", "baseline1", "baseline2"])
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--ckpt", type=str, required=True)
    p.add_argument("--dataset", type=str, required=True)
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--cdf", type=str, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    p.add_argument("--param", type=str, required=True,
                   choices=sorted(sweep.SWEEP_PARAMS))
    p.add_argument("--values", type=str, required=True)
    p.add_argument("--models", type=str, required=True)
    p.add_argument("--seeds", type=str, required=True)
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gradcheck", help="verify analytic gradients")
    p.add_argument("--config", type=str, default=None)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
