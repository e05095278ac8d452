"""Command-line surface.

Subcommands cover the full experimental pipeline: synth data generation,
training, gate calibration, ZSL/GZSL evaluation, the repeated random-split
protocol, the ablation grid, two-phase hyperparameter search, and latent
export. Every subcommand takes --seed and writes a machine-readable
report.json into --out; artifacts contain no timestamps, so identical
invocations produce byte-identical outputs.

Exit codes: 0 success, 1 runtime failure (diagnostic on stderr), 2 usage.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import seeding
from .ablation import VARIANTS, run_ablation, variant_config
from .classifiers import build_predictor, calibrate_gzsl, load_predictor, save_predictor
from .data import (
    RunConfig,
    load_config,
    load_dataset,
    make_random_split,
    save_config,
    save_split,
)
from .errors import SadvaeError
from .evaluation import gzsl_metrics, run_random_split_protocol, zsl_accuracy
from .formats import write_feature_matrix
from .model import load_model_state, posterior_means, save_model_state
from .search import SearchSpace, hyperparameter_search
from .synthetic import generate_synthetic_dataset
from .trainer import train


def _write_report(out_dir: Path, payload: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "report.json"
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return path


def _load_run_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    return replace(config, seed=args.seed)


def _resolve_split(dataset, args):
    return make_random_split(dataset.manifest, args.unseen, args.split_seed)


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------

def cmd_gen_synth(args) -> int:
    out_dir = Path(args.out)
    manifest_path, _ = generate_synthetic_dataset(
        out_dir,
        num_classes=args.classes,
        samples_per_class=args.samples_per_class,
        d_x=args.d_x,
        d_y=args.d_y,
        signal_dim=args.signal_dim,
        nuisance_dim=args.nuisance_dim,
        noise_scale=args.noise_scale,
        seed=args.seed,
    )
    _write_report(out_dir, {
        "command": "gen-synth",
        "manifest": "manifest.json",
        "classes": args.classes,
        "samples_per_class": args.samples_per_class,
        "seed": args.seed,
    })
    return 0


def cmd_train(args) -> int:
    dataset = load_dataset(args.manifest)
    config = _load_run_config(args)
    config, disc_enabled = variant_config(config, args.variant)
    split = _resolve_split(dataset, args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    result = train(dataset, split, config, disc_enabled=disc_enabled,
                   metrics_path=out_dir / "metrics.csv")
    save_model_state(result.state, out_dir / "checkpoint.sadm")
    save_split(split, out_dir / "split.json")
    save_config(config, out_dir / "config.json")
    summary = {
        "command": "train",
        "variant": args.variant,
        "steps": len(result.metrics),
        "disc_updates": result.disc_updates,
        "checkpoint": "checkpoint.sadm",
        "metrics": "metrics.csv",
        "seed": args.seed,
    }
    if result.metrics:
        summary["first_l_vae"] = result.metrics[0].losses.l_vae
        summary["final_l_vae"] = result.metrics[-1].losses.l_vae
    _write_report(out_dir, summary)
    return 0


def cmd_calibrate(args) -> int:
    dataset = load_dataset(args.manifest)
    config = _load_run_config(args)
    config, disc_enabled = variant_config(config, args.variant)
    split = _resolve_split(dataset, args)
    state = load_model_state(args.model)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    gate = calibrate_gzsl(dataset, split, config, seeding.stream(args.seed, seeding.CALIBRATE),
                          disc_enabled=disc_enabled)
    predictor = build_predictor(state, dataset, split, config,
                                seeding.stream(args.seed, seeding.CLASSIFIER), gate=gate)
    save_predictor(predictor, out_dir / "predictor.sadc")
    _write_report(out_dir, {
        "command": "calibrate",
        "predictor": "predictor.sadc",
        "pooling_k": gate.k,
        "temperature": gate.temperature,
        "seed": args.seed,
    })
    return 0


def cmd_eval_zsl(args) -> int:
    dataset = load_dataset(args.manifest)
    config = _load_run_config(args)
    split = _resolve_split(dataset, args)
    state = load_model_state(args.model)
    out_dir = Path(args.out)

    predictor = build_predictor(state, dataset, split, config,
                                seeding.stream(args.seed, seeding.CLASSIFIER))
    unseen_mask = np.isin(dataset.labels, sorted(split.unseen_ids))
    accuracy = zsl_accuracy(predictor, dataset.skeleton[unseen_mask],
                            dataset.labels[unseen_mask])
    _write_report(out_dir, {
        "command": "eval-zsl",
        "zsl_accuracy": accuracy,
        "unseen_ids": sorted(split.unseen_ids),
        "num_test_samples": int(unseen_mask.sum()),
        "seed": args.seed,
    })
    return 0


def cmd_eval_gzsl(args) -> int:
    dataset = load_dataset(args.manifest)
    split = _resolve_split(dataset, args)
    predictor = load_predictor(args.predictor)
    out_dir = Path(args.out)

    report = gzsl_metrics(predictor, dataset.skeleton, dataset.labels, split)
    _write_report(out_dir, {
        "command": "eval-gzsl",
        "acc_seen": report.acc_seen,
        "acc_unseen": report.acc_unseen,
        "harmonic_mean": report.harmonic_mean,
        "unseen_ids": sorted(split.unseen_ids),
        "seed": args.seed,
    })
    return 0


def cmd_protocol(args) -> int:
    dataset = load_dataset(args.manifest)
    config = _load_run_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    report = run_random_split_protocol(dataset, args.unseen, args.repeats,
                                       config, base_seed=args.split_seed)
    with open(out_dir / "repeats.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["repeat", "split_seed", "unseen_ids", "zsl",
                         "acc_seen", "acc_unseen", "harmonic_mean"])
        for r in report.repeats:
            writer.writerow([r.repeat, r.split_seed,
                             ";".join(str(u) for u in r.unseen_ids),
                             repr(r.zsl), repr(r.gzsl.acc_seen),
                             repr(r.gzsl.acc_unseen), repr(r.gzsl.harmonic_mean)])
        writer.writerow(["average", "", "", repr(report.mean_zsl),
                         repr(report.mean_acc_seen), repr(report.mean_acc_unseen),
                         repr(report.mean_harmonic_mean)])
    _write_report(out_dir, {
        "command": "protocol",
        "repeats": args.repeats,
        "mean_zsl": report.mean_zsl,
        "mean_acc_seen": report.mean_acc_seen,
        "mean_acc_unseen": report.mean_acc_unseen,
        "mean_harmonic_mean": report.mean_harmonic_mean,
        "per_repeat": [
            {"repeat": r.repeat, "split_seed": r.split_seed,
             "unseen_ids": r.unseen_ids, "zsl": r.zsl,
             "acc_seen": r.gzsl.acc_seen, "acc_unseen": r.gzsl.acc_unseen,
             "harmonic_mean": r.gzsl.harmonic_mean}
            for r in report.repeats
        ],
        "seed": args.seed,
    })
    return 0


def cmd_ablate(args) -> int:
    dataset = load_dataset(args.manifest)
    base_config = _load_run_config(args)
    split = _resolve_split(dataset, args)
    variants = VARIANTS if args.variant == "all" else (args.variant,)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for r in range(args.repeats):
        config = replace(base_config, seed=args.seed + r)
        for result in run_ablation(dataset, split, config, variants,
                                   include_gzsl=not args.zsl_only):
            rows.append((result.variant, config.seed, result))
    with open(out_dir / "ablation.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variant", "seed", "zsl", "acc_seen", "acc_unseen",
                         "harmonic_mean", "latent_dependence", "dependence_degenerate"])
        for variant, seed, result in rows:
            gz = result.gzsl
            writer.writerow([
                variant, seed, repr(result.zsl),
                repr(gz.acc_seen) if gz else "",
                repr(gz.acc_unseen) if gz else "",
                repr(gz.harmonic_mean) if gz else "",
                repr(result.dependence.value), result.dependence.degenerate,
            ])
    _write_report(out_dir, {
        "command": "ablate",
        "variants": list(variants),
        "repeats": args.repeats,
        "results": [
            {"variant": variant, "seed": seed, "zsl": result.zsl,
             "acc_seen": result.gzsl.acc_seen if result.gzsl else None,
             "acc_unseen": result.gzsl.acc_unseen if result.gzsl else None,
             "harmonic_mean": result.gzsl.harmonic_mean if result.gzsl else None,
             "latent_dependence": result.dependence.value,
             "dependence_degenerate": result.dependence.degenerate}
            for variant, seed, result in rows
        ],
        "seed": args.seed,
    })
    return 0


def cmd_search(args) -> int:
    dataset = load_dataset(args.manifest)
    config = _load_run_config(args)
    split = _resolve_split(dataset, args)
    phase1, phase2 = args.trials
    space = SearchSpace(phase1_trials=phase1, phase2_trials=phase2)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    result = hyperparameter_search(dataset, split, config, space, args.seed)
    save_config(result.best_config, out_dir / "best_config.json")
    with open(out_dir / "trials.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phase", "trial", "score", "beta_x", "beta_y",
                         "learning_rate", "batch_size", "n_d", "dim_r", "dim_v"])
        for t in result.trials:
            writer.writerow([t.phase, t.index, repr(t.score),
                             repr(t.config.beta_x), repr(t.config.beta_y),
                             repr(t.config.learning_rate), t.config.batch_size,
                             t.config.n_d, t.config.dim_r, t.config.dim_v])
    _write_report(out_dir, {
        "command": "search",
        "trials": [phase1, phase2],
        "best_score": result.best_score,
        "best_config": asdict(result.best_config),
        "seed": args.seed,
    })
    return 0


def cmd_export_latents(args) -> int:
    dataset = load_dataset(args.manifest)
    state = load_model_state(args.model)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    semantic, style = posterior_means(state.skeleton_encoder, dataset.skeleton)
    write_feature_matrix(semantic.astype(np.float32), out_dir / "semantic_means.sadv")
    write_feature_matrix(style.astype(np.float32), out_dir / "style_means.sadv")
    _write_report(out_dir, {
        "command": "export-latents",
        "semantic_means": "semantic_means.sadv",
        "style_means": "style_means.sadv",
        "num_samples": int(dataset.skeleton.shape[0]),
        "seed": args.seed,
    })
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _parse_trials(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated counts, e.g. 5,100")
    return int(parts[0]), int(parts[1])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sadvae", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, manifest=True, config=False, split=True):
        if manifest:
            p.add_argument("--manifest", required=True, help="dataset manifest JSON")
        if config:
            p.add_argument("--config", default=None, help="run config JSON (defaults used if omitted)")
        if split:
            p.add_argument("--unseen", type=int, required=True, help="number of unseen classes")
            p.add_argument("--split-seed", type=int, default=0, help="seed for the class split")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0, help="run seed")

    p = sub.add_parser("gen-synth", help="generate a synthetic dataset")
    p.add_argument("--classes", type=int, default=40)
    p.add_argument("--samples-per-class", type=int, default=200)
    p.add_argument("--d-x", type=int, default=64)
    p.add_argument("--d-y", type=int, default=32)
    p.add_argument("--signal-dim", type=int, default=16)
    p.add_argument("--nuisance-dim", type=int, default=48)
    p.add_argument("--noise-scale", type=float, default=0.5)
    common(p, manifest=False, split=False)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("train", help="train on the seen classes of a split")
    common(p, config=True)
    p.add_argument("--variant", choices=VARIANTS, default="fd_tc")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("calibrate", help="fit the domain gate and assemble a predictor")
    common(p, config=True)
    p.add_argument("--model", required=True, help="trained model checkpoint")
    p.add_argument("--variant", choices=VARIANTS, default="fd_tc")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("eval-zsl", help="unseen-class accuracy of a trained model")
    common(p, config=True)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_eval_zsl)

    p = sub.add_parser("eval-gzsl", help="seen/unseen/harmonic metrics of a predictor")
    common(p)
    p.add_argument("--predictor", required=True)
    p.set_defaults(func=cmd_eval_gzsl)

    p = sub.add_parser("protocol", help="repeated random-split experiment")
    common(p, config=True)
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(func=cmd_protocol)

    p = sub.add_parser("ablate", help="compare naive / fd / fd_tc variants")
    common(p, config=True)
    p.add_argument("--variant", choices=VARIANTS + ("all",), default="all")
    p.add_argument("--repeats", type=int, default=1, help="seeds seed..seed+R-1")
    p.add_argument("--zsl-only", action="store_true", help="skip gate calibration and GZSL metrics")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("search", help="two-phase random hyperparameter search")
    common(p, config=True)
    p.add_argument("--trials", type=_parse_trials, default=(5, 100),
                   help="phase-1,phase-2 trial counts (default 5,100)")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("export-latents", help="write per-sample posterior means")
    common(p, split=False)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_export_latents)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SadvaeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
