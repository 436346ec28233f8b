"""Command line entry point: ``batchuni <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np
import yaml

from . import audio_features as af
from .evaluation import (
    EvalGrid,
    auc,
    grid_kld,
    grid_pdf,
    oracle_density,
    write_grid_csv,
    write_pgm,
    write_roc_csv,
)
from .experiments import ARCHITECTURES, export_artifacts, load_config, read_scaler, run_audio, run_verify
from .nn_core import load_model
from .objectives import anomaly_score


def _parse_set(items):
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = yaml.safe_load(value)
    return out


def parse_anr_range(text: str) -> tuple[float, float]:
    lo, sep, hi = text.partition(":")
    if not sep:
        raise ValueError(f"--anr-range expects lo:hi in dB, got {text!r}")
    lo_f, hi_f = float(lo), float(hi)
    if lo_f > hi_f:
        raise ValueError(f"--anr-range lower bound {lo_f} exceeds upper bound {hi_f}")
    return lo_f, hi_f


def _common_overrides(args) -> dict:
    over = _parse_set(args.set)
    if args.objective:
        over["objective"] = args.objective
    if args.seed is not None:
        over["seed"] = args.seed
        over.setdefault("init_seed", args.seed)
    if args.init_seed is not None:
        over["init_seed"] = args.init_seed
    if args.out:
        over["output_dir"] = args.out
    return over


def cmd_verify(args) -> int:
    over = _common_overrides(args)
    if args.updates is not None:
        over["updates"] = args.updates
    cfg = load_config(args.config, args.preset, over)
    report = run_verify(cfg)
    export_artifacts(report, cfg.output_dir)
    print(
        f"{cfg.objective}: D(p||q) = {report.kld['p']:.4f}  D(U||q) = {report.kld['uniform']:.4f}"
        f"  ({report.wall_time:.1f}s) -> {cfg.output_dir}"
    )
    return 0


def cmd_train_audio(args) -> int:
    over = _common_overrides(args)
    if args.manifest:
        over["manifest"] = args.manifest
    if args.anr_range:
        over["anr_range"] = parse_anr_range(args.anr_range)
    cfg = load_config(args.config, args.preset, over)
    report = run_audio(cfg)
    export_artifacts(report, cfg.output_dir)
    print(f"{cfg.objective} {cfg.architecture} D={report.input_dim} ({report.wall_time:.1f}s)")
    for row in report.auc_rows:
        print(f"  ANR {row['anr_db']:+.0f} dB  frame AUC {row['frame_auc']:.4f}  clip AUC {row['clip_auc']:.4f}")
    return 0


def cmd_make_toy_corpus(args) -> int:
    from .toy_corpus import ToyCorpusConfig, generate

    manifest = generate(args.out, ToyCorpusConfig(seed=args.seed or 0))
    print(manifest)
    return 0


def cmd_score(args) -> int:
    model = load_model(args.model)
    rows = []
    if args.points:
        pts = np.loadtxt(args.points, delimiter=",", ndmin=2, skiprows=1)
        scores = np.atleast_1d(anomaly_score(model, pts[:, :2]))
        rows = [("points", i, s) for i, s in enumerate(scores)]
    else:
        if args.architecture:
            mel_bands, context = ARCHITECTURES[args.architecture][:2]
        else:
            mel_bands, context = args.mel_bands, args.context
        fcfg = af.FeatureConfig(mel_bands=mel_bands, context=context)
        if model.input_dim != fcfg.dim:
            raise ValueError(f"model expects D={model.input_dim}, features give D={fcfg.dim}")
        mean, std = read_scaler(args.scaler) if args.scaler else (0.0, 1.0)
        for path in args.wav:
            feats = (af.extract_file(path, fcfg).frames - mean) / std
            scores = np.atleast_1d(anomaly_score(model, feats))
            if args.max:
                rows.append((path, -1, float(scores.max())))
            else:
                rows += [(path, i, s) for i, s in enumerate(scores)]
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "frame", "score"])
        for src, i, s in rows:
            w.writerow([src, i, repr(float(s))])
    finally:
        if args.out:
            fh.close()
    return 0


def cmd_eval_auc(args) -> int:
    normal, anomaly = [], []
    with open(args.scores, newline="") as fh:
        for row in csv.DictReader(fh):
            (anomaly if int(row[args.label_column]) else normal).append(float(row[args.score_column]))
    value = auc(normal, anomaly)
    print(f"AUC {value:.6f}  (normal n={len(normal)}, anomaly n={len(anomaly)})")
    if args.roc:
        write_roc_csv(args.roc, normal, anomaly)
    return 0


def cmd_export_grid(args) -> int:
    model = load_model(args.model)
    grid = EvalGrid(resolution=args.resolution)
    q = grid_pdf(model, grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_grid_csv(out / "pdf.csv", q)
    write_pgm(out / "pdf.pgm", q.density)
    write_pgm(out / "score.pgm", q.scores)
    d_p = grid_kld(oracle_density("annulus_p", grid), q)
    d_u = grid_kld(oracle_density("annulus_uniform", grid), q)
    print(f"D(p||q) = {d_p:.4f}  D(U||q) = {d_u:.4f}  Z = {q.z:.6g}")
    return 0


def _add_run_args(p, default_preset):
    p.add_argument("--config", help="YAML experiment config")
    p.add_argument("--preset", default=default_preset, help="built-in settings applied before --config")
    p.add_argument("--objective", choices=["RE", "SNP", "BU"])
    p.add_argument("--seed", type=int, help="seed for data, batches and (unless --init-seed) initialization")
    p.add_argument("--init-seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="batchuni", description="Batch-uniformization autoencoder experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="2-D annulus verification experiment")
    _add_run_args(p, "verify-paper")
    p.add_argument("--updates", type=int)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("train-audio", help="audio experiment from a corpus manifest")
    _add_run_args(p, "audio-smoke")
    p.add_argument("--manifest", help="corpus manifest (tag path per line)")
    p.add_argument("--anr-range", help="training ANR range lo:hi in dB")
    p.set_defaults(func=cmd_train_audio)

    p = sub.add_parser("make-toy-corpus", help="write the synthetic audio corpus and its manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_make_toy_corpus)

    p = sub.add_parser("score", help="anomaly scores of 2-D points or WAV frames")
    p.add_argument("--model", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--points", help="CSV with header; first two columns are x1, x2")
    src.add_argument("--wav", nargs="+")
    p.add_argument("--architecture", choices=sorted(ARCHITECTURES))
    p.add_argument("--mel-bands", type=int, default=40)
    p.add_argument("--context", type=int, default=5)
    p.add_argument("--scaler", help="scaler.csv written by train-audio")
    p.add_argument("--max", action="store_true", help="one max-over-frames score per file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval-auc", help="AUC (and optional ROC CSV) from a labelled score CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--score-column", default="score")
    p.add_argument("--label-column", default="label")
    p.add_argument("--roc", help="write threshold,tpr,fpr CSV here")
    p.set_defaults(func=cmd_eval_auc)

    p = sub.add_parser("export-grid", help="grid density, score heatmaps and KLDs of a 2-D model")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resolution", type=int, default=201)
    p.set_defaults(func=cmd_export_grid)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"batchuni {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
