"""Command-line interface.

Every command is deterministic given --seed: output files are byte-identical
across runs and across --workers counts. On failure a single machine-readable
JSON line goes to stderr and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources

import numpy as np

from . import bp, ensemble, evaluate, hdd, partition, training
from .channel import make_rng, snr_db_to_sigma
from .codes import KNOWN_CODES, CodeSpec, ParityCheckMatrix, load_alist, load_dense, save_alist, save_dense

BUNDLED_ALISTS = {
    "CR-BCH(63,36)": "bch_63_36.alist",
    "CR-BCH(63,45)": "bch_63_45.alist",
    "Hamming(7,4)": "hamming_7_4.alist",
}


class CliError(Exception):
    pass


def bundled_alist_path(code_id: str) -> str:
    if code_id not in BUNDLED_ALISTS:
        raise CliError(f"no bundled matrix for code {code_id!r}")
    return str(resources.files("bpensemble").joinpath("data", BUNDLED_ALISTS[code_id]))


def resolve_code(args) -> CodeSpec:
    code_id = getattr(args, "code", None)
    if code_id is None:
        raise CliError("--code is required")
    if code_id not in KNOWN_CODES:
        raise CliError(f"unknown code {code_id!r}; known: {sorted(KNOWN_CODES)}")
    return KNOWN_CODES[code_id]


def resolve_matrix(args, code: CodeSpec | None = None) -> ParityCheckMatrix:
    path = getattr(args, "alist", None)
    if path is None:
        if code is None:
            raise CliError("--alist is required")
        path = bundled_alist_path(code.code_id)
    pcm = load_alist(path)
    if code is not None and pcm.cols != code.n:
        raise CliError(f"matrix has {pcm.cols} columns but code length is {code.n}")
    return pcm


def parse_snr_list(text: str):
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise CliError(f"bad SNR list {text!r}; expected comma-separated dB values")


def cmd_load_code(args):
    if args.alist is None:
        raise CliError("--alist is required")
    pcm = load_dense(args.alist) if args.input_format == "dense" else load_alist(args.alist)
    summary = {
        "rows": pcm.rows,
        "cols": pcm.cols,
        "edges": pcm.num_edges,
        "min_col_degree": int(pcm.matrix.sum(axis=0).min()),
        "max_col_degree": int(pcm.matrix.sum(axis=0).max()),
        "min_row_degree": int(pcm.matrix.sum(axis=1).min()),
        "max_row_degree": int(pcm.matrix.sum(axis=1).max()),
    }
    if args.out:
        (save_dense if args.format == "dense" else save_alist)(pcm, args.out)
        summary["out"] = args.out
    print(json.dumps(summary, sort_keys=True))


def cmd_train_baseline(args):
    code = resolve_code(args)
    pcm = resolve_matrix(args, code)
    cfg = training.TrainConfig(
        snr_grid_db=parse_snr_list(args.snr),
        batch_per_snr=args.batch_per_snr,
        mode="from_scratch",
        learning_rate=args.lr,
        epochs=args.epochs,
        seed=args.seed,
        iterations=args.iterations,
        tied=args.tied,
    )
    dataset = training.generate_dataset(code, pcm, cfg, args.samples)
    result = training.train(code, pcm, dataset, cfg)
    training.save_checkpoint(result, cfg, args.out)
    print(json.dumps({
        "out": args.out, "epochs_run": result.epochs_run,
        "train_loss": result.train_loss[-1], "val_loss": result.val_loss[-1],
    }, sort_keys=True))


def cmd_partition(args):
    code = resolve_code(args)
    pcm = resolve_matrix(args, code)
    if args.variant == "hamming":
        model = partition.PartitionModel(kind="hamming", alpha=args.alpha)
    else:
        cfg = training.TrainConfig(snr_grid_db=parse_snr_list(args.snr), seed=args.seed)
        dataset = training.generate_dataset(code, pcm, cfg, args.samples)
        errors = np.stack([s.true_error for s in dataset])
        errors = errors[errors.sum(axis=1) > 0]
        variant = "naive" if args.variant == "em" else "syndrome_guided"
        em_cfg = partition.EmConfig(seed=args.seed, restarts=args.restarts)
        mixture = partition.em_fit(errors, args.alpha, variant, em_cfg, pcm)
        mixture.meta["code_id"] = code.code_id
        model = partition.PartitionModel(kind="em", alpha=args.alpha, mixture=mixture)
    partition.save_partition(model, args.out)
    doc = {"out": args.out, "kind": model.kind, "alpha": model.alpha}
    if model.mixture is not None:
        doc["final_log_likelihood"] = model.mixture.final_log_likelihood
    print(json.dumps(doc, sort_keys=True))


def cmd_train_experts(args):
    code = resolve_code(args)
    pcm = resolve_matrix(args, code)
    model = partition.load_partition(args.partition)
    baseline = bp.load_weights(args.weights) if args.weights else None
    mode = args.mode or ("finetune" if baseline is not None else "from_scratch")
    cfg = training.TrainConfig(
        snr_grid_db=parse_snr_list(args.snr),
        batch_per_snr=args.batch_per_snr,
        mode=mode,
        learning_rate=args.lr,
        epochs=args.epochs,
        seed=args.seed,
        iterations=args.iterations,
        tied=args.tied,
    )
    if mode == "finetune" and baseline is None:
        raise CliError("finetune mode needs --weights with the baseline decoder")
    dataset = training.generate_dataset(code, pcm, cfg, args.samples)
    buckets, dropped = partition.induce_datasets(dataset, model, pcm)
    experts = []
    summary = {"regions": [], "dropped_zero_weight": dropped}
    for region, bucket in enumerate(buckets, start=1):
        if not bucket:
            raise CliError(f"region {region} received no training samples")
        region_cfg = cfg
        result = training.train(code, pcm, bucket, region_cfg, baseline=baseline)
        experts.append(result.weights)
        summary["regions"].append({
            "region": region, "samples": len(bucket),
            "epochs_run": result.epochs_run, "val_loss": result.val_loss[-1],
        })
    gf = hdd.GfField(code.gf_order_exponent)
    ens_model = ensemble.EnsembleModel(
        code=code, pcm=pcm, experts=experts, partition=model,
        gating_mode=args.gating, gf=gf)
    manifest_path = ensemble.save_manifest(ens_model, args.out_dir)
    summary["manifest"] = manifest_path
    print(json.dumps(summary, sort_keys=True))


def _binding(args, code, pcm):
    choices = [args.manifest is not None, args.weights is not None, args.plain_bp]
    if sum(choices) != 1:
        raise CliError("pick exactly one of --manifest, --weights, --plain-bp")
    if args.plain_bp:
        return evaluate.PlainBpBinding(code, pcm, iterations=args.iterations)
    if args.weights:
        return evaluate.WeightsBinding(code, pcm, bp.load_weights(args.weights))
    model = ensemble.load_manifest(args.manifest, pcm, gating_mode=args.gating)
    return evaluate.EnsembleBinding(model)


def cmd_eval(args):
    code = resolve_code(args)
    pcm = resolve_matrix(args, code)
    binding = _binding(args, code, pcm)
    cfg = evaluate.EvalConfig(
        snr_points_db=parse_snr_list(args.snr),
        min_frame_errors=args.min_errors,
        max_frames=args.max_frames,
        seed=args.seed,
        shard_frames=args.shard_frames,
        workers=args.workers,
    )
    records = evaluate.run_sweep(cfg, binding)
    evaluate.export(records, args.out, args.format,
                    config=evaluate.config_echo(cfg, binding))
    for r in records:
        print(json.dumps({"snr_db": r.snr_db, "fer": r.fer, "frames": r.frames,
                          "frame_errors": r.frame_errors,
                          "low_confidence": r.low_confidence}, sort_keys=True))


def cmd_compare(args):
    records_a = evaluate.read_records(args.a, args.format)
    records_b = evaluate.read_records(args.b, args.format)
    report = evaluate.compare_curves(records_a, records_b)
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            json.dump(report, fh, sort_keys=True, indent=1)
            fh.write("\n")
    print(json.dumps(report["gains"], sort_keys=True))


def cmd_prop1(args):
    code = resolve_code(args) if args.code else KNOWN_CODES["CR-BCH(63,36)"]
    snrs = parse_snr_list(args.snr)
    sigmas = [snr_db_to_sigma(s, code.rate) for s in snrs]
    cfg = partition.EmConfig(seed=args.seed, restarts=args.restarts)
    report = partition.prop1_experiment(sigmas, args.samples, code.n, cfg)
    report["snr_points_db"] = list(snrs)
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            json.dump(report, fh, sort_keys=True, indent=1)
            fh.write("\n")
    print(json.dumps({"mu_max_deviation": report["mu_max_deviation"],
                      "pi_deviation": report["pi_deviation"]}, sort_keys=True))


def cmd_hdd_selftest(args):
    code = resolve_code(args)
    gf = hdd.GfField(code.gf_order_exponent)
    rng = make_rng(args.seed, stream=0)
    n, t = code.n, code.t
    results = {}
    for weight in range(1, t + 1):
        if weight <= 2:
            patterns = _all_patterns(n, weight)
        else:
            patterns = _random_patterns(rng, n, weight, args.samples)
        ok = 0
        for pattern in patterns:
            res = hdd.hdd_decode(code, gf, pattern)
            ok += bool(res.corrected and np.array_equal(res.estimated_error, pattern))
        results[f"weight_{weight}"] = {"total": len(patterns), "corrected": ok}
        if ok != len(patterns):
            raise CliError(f"HDD failed bounded-distance check at weight {weight}")
    print(json.dumps({"code": code.code_id, "t": t,
                      "primitive_poly": gf.primitive_poly, **results}, sort_keys=True))


def _all_patterns(n, weight):
    from itertools import combinations
    out = []
    for pos in combinations(range(n), weight):
        p = np.zeros(n, dtype=np.uint8)
        p[list(pos)] = 1
        out.append(p)
    return out


def _random_patterns(rng, n, weight, count):
    out = []
    for _ in range(count):
        p = np.zeros(n, dtype=np.uint8)
        p[rng.choice(n, size=weight, replace=False)] = 1
        out.append(p)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bpensemble",
        description="Ensembles of weighted BP decoders with hard-decision gating.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, code=True, alist=True, seed=True, out=False):
        if code:
            p.add_argument("--code", choices=sorted(KNOWN_CODES), help="code identifier")
        if alist:
            p.add_argument("--alist", help="parity-check matrix (alist); default: bundled")
        if seed:
            p.add_argument("--seed", type=int, default=0)
        if out:
            p.add_argument("--out", required=True, help="output file")

    p = sub.add_parser("load-code", help="parse and validate a matrix file")
    p.add_argument("--alist", required=True)
    p.add_argument("--input-format", choices=["alist", "dense"], default="alist")
    p.add_argument("--out", help="re-serialize to this path")
    p.add_argument("--format", choices=["alist", "dense"], default="alist")
    p.set_defaults(func=cmd_load_code)

    p = sub.add_parser("train-baseline", help="train the unpartitioned decoder from scratch")
    common(p, out=True)
    p.add_argument("--snr", default="4,5,6,7", help="training SNR grid, dB")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-per-snr", type=int, default=1000)
    p.add_argument("--iterations", type=int, default=5)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--tied", action="store_true")
    p.set_defaults(func=cmd_train_baseline)

    p = sub.add_parser("partition", help="fit or declare an error-region partition")
    p.add_argument("variant", choices=["hamming", "em", "em-syndrome"])
    common(p, out=True)
    p.add_argument("--alpha", type=int, default=3)
    p.add_argument("--snr", default="4,5,6,7")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--restarts", type=int, default=5)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("train-experts", help="train one expert per region")
    common(p)
    p.add_argument("--partition", required=True, help="partition file")
    p.add_argument("--weights", help="baseline weights (enables finetune)")
    p.add_argument("--mode", choices=["from_scratch", "finetune"])
    p.add_argument("--snr", default="4,5,6,7")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-per-snr", type=int, default=1000)
    p.add_argument("--iterations", type=int, default=5)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--tied", action="store_true")
    p.add_argument("--gating", choices=list(ensemble.GATING_MODES), default="single_choice")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train_experts)

    p = sub.add_parser("eval", help="Monte Carlo FER/BER sweep")
    common(p, out=True)
    p.add_argument("--snr", required=True, help="SNR points, dB")
    p.add_argument("--min-errors", type=int, default=100)
    p.add_argument("--max-frames", type=int, default=10_000_000)
    p.add_argument("--shard-frames", type=int, default=2000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--manifest", help="ensemble manifest")
    p.add_argument("--weights", help="single weighted decoder")
    p.add_argument("--plain-bp", action="store_true")
    p.add_argument("--iterations", type=int, default=5, help="plain BP iterations")
    p.add_argument("--gating", choices=list(ensemble.GATING_MODES),
                   help="override the manifest gating mode")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="FER ratios and dB gains of two sweeps")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("prop1", help="EM recovery of per-channel crossover centers")
    common(p)
    p.add_argument("--snr", default="4,5,6")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_prop1)

    p = sub.add_parser("hdd-selftest", help="bounded-distance correction checks")
    common(p, alist=False)
    p.add_argument("--samples", type=int, default=10_000,
                   help="random patterns per weight above 2")
    p.set_defaults(func=cmd_hdd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (CliError, ValueError, OSError, KeyError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
