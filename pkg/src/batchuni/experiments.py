"""Verification (2-D annulus) and audio experiments, plus artifact export."""

from __future__ import annotations

import csv
import dataclasses
import io
import os
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import audio_features as af
from .evaluation import EvalGrid, GridPdf, auc, grid_kld, grid_pdf, oracle_density, to_pgm, write_grid_csv
from .kde import KdeConfig
from .nn_core import AeModel, fcn_ae_specs, glorot_init, mlp_specs, model_to_bytes
from .objectives import ObjectiveConfig, anomaly_score
from .optim import AmsGradState, ConstantLR, WarmThenLinear
from .synth import (
    AnnulusConfig,
    anr_gain,
    build_audio_minibatch,
    gen_annulus,
    mix,
    mix_region_frames,
    read_manifest,
    segment,
)
from .training import LossRecord, shuffled_batches, train

ARCHITECTURES = {
    # name: (mel_bands, context, hidden layers H, units U, latent Z)
    "fcn40-large": (40, 5, 4, 512, 128),
    "fcn40-small": (40, 5, 2, 128, 40),
    "fcn64-large": (64, 10, 4, 512, 128),
    "fcn64-small": (64, 10, 2, 128, 40),
}


@dataclass
class ExperimentConfig:
    experiment: str = "verify"  # verify | audio
    objective: str = "BU"  # RE | SNP | BU
    seed: int = 0  # data and mini-batch sampling
    init_seed: int = 0  # shared initial parameters
    output_dir: str = "runs/verify"

    # optimizer
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    delta: float = 1e-8
    # "constant" or "warm_then_linear"; the latter holds lr for the first
    # half of the epochs and decays linearly to lr / lr_final_divisor
    schedule: str = "constant"
    lr_hold_epochs: int | None = None
    lr_final_divisor: float = 100.0

    # objective; None picks the per-experiment default
    clip: float | None = None
    band_width: float | None = None
    weight_floor: float = 1e-6
    normalize_kde: bool | None = None

    # verify
    n_samples: int = 10_000
    hidden: list[int] = field(default_factory=lambda: [20, 10, 20])
    activation: str = "sigmoid"
    batch_normal: int = 500
    batch_anomaly: int = 500
    updates: int = 5000
    grid_resolution: int = 201

    # audio
    manifest: str | None = None
    architecture: str = "fcn40-small"
    epochs: int = 200
    batches_per_epoch: int = 500
    n_concat: int = 10
    segment_seconds: float = 3.0
    anr_range: tuple[float, float] = (-30.0, 10.0)
    test_anrs: list[float] = field(default_factory=lambda: [-10.0, -15.0, -20.0])
    standardize: bool = True

    def validate(self) -> None:
        if self.experiment not in ("verify", "audio"):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.objective not in ("RE", "SNP", "BU"):
            raise ValueError(f"unknown objective {self.objective!r}")
        for name in ("n_samples", "batch_normal", "batch_anomaly", "epochs", "batches_per_epoch", "n_concat", "grid_resolution"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.updates < 0:
            raise ValueError("updates must be non-negative")
        if self.schedule not in ("constant", "warm_then_linear"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.experiment == "audio":
            if self.architecture not in ARCHITECTURES:
                raise ValueError(f"unknown architecture {self.architecture!r}")
            if self.manifest is None or not Path(self.manifest).is_file():
                raise FileNotFoundError(f"corpus manifest not found: {self.manifest}")
            if self.anr_range[0] > self.anr_range[1]:
                raise ValueError("anr_range must be lo:hi with lo <= hi")

    def to_yaml(self) -> str:
        d = dataclasses.asdict(self)
        d["anr_range"] = list(d["anr_range"])
        return yaml.safe_dump(d, sort_keys=False)


PRESETS: dict[str, dict] = {
    # settings of the published verification experiment
    "verify-paper": dict(experiment="verify", updates=5000, n_samples=10_000, batch_normal=500, batch_anomaly=500),
    "verify-smoke": dict(experiment="verify", updates=300, n_samples=2000, batch_normal=200, batch_anomaly=200, grid_resolution=81),
    "audio-paper": dict(
        experiment="audio", lr=1e-4, schedule="warm_then_linear", epochs=200, batches_per_epoch=500,
        lr_hold_epochs=100, architecture="fcn40-large", output_dir="runs/audio",
    ),
    "audio-smoke": dict(
        experiment="audio", lr=1e-3, schedule="warm_then_linear", epochs=10, batches_per_epoch=20,
        architecture="fcn40-small", output_dir="runs/audio",
    ),
}


def load_config(path=None, preset: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Preset values, then the YAML file, then explicit overrides."""
    values: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        values.update(PRESETS[preset])
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(loaded, dict):
            raise ValueError(f"{path}: expected a mapping at top level")
        values.update(loaded)
    values.update(overrides or {})
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "anr_range" in values:
        values["anr_range"] = tuple(float(v) for v in values["anr_range"])
    return ExperimentConfig(**values)


@dataclass
class RunReport:
    config: ExperimentConfig
    losses: list[LossRecord]
    model: AeModel
    wall_time: float
    kld: dict[str, float] | None = None
    pdf: GridPdf | None = None
    auc_rows: list[dict] | None = None
    input_dim: int | None = None
    scaler: tuple[np.ndarray, np.ndarray] | None = None


def _optimizer(cfg: ExperimentConfig, model: AeModel) -> AmsGradState:
    return AmsGradState.for_params(model.params(), lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, delta=cfg.delta)


def _schedule(cfg: ExperimentConfig, n_epochs: int):
    if cfg.schedule == "constant":
        return ConstantLR(cfg.lr)
    hold = cfg.lr_hold_epochs if cfg.lr_hold_epochs is not None else n_epochs // 2
    return WarmThenLinear(cfg.lr, hold, max(n_epochs, hold + 1), cfg.lr_final_divisor)


def _objective(cfg: ExperimentConfig, dim: int, clip_default: float, bw_default: float, norm_default: bool) -> ObjectiveConfig:
    kde = KdeConfig(
        band_width=cfg.band_width if cfg.band_width is not None else bw_default,
        weight_floor=cfg.weight_floor,
        normalize_batch=cfg.normalize_kde if cfg.normalize_kde is not None else norm_default,
    )
    return ObjectiveConfig(cfg.objective, cfg.clip if cfg.clip is not None else clip_default, kde)


def verify_model(cfg: ExperimentConfig) -> AeModel:
    specs, n_enc = mlp_specs([2, *cfg.hidden, 2], cfg.activation)
    return glorot_init(specs, cfg.init_seed, n_enc)


def run_verify(cfg: ExperimentConfig) -> RunReport:
    """Train the 2-D autoencoder on annulus data and compare its Boltzmann
    density with the true normal density and the uniform target."""
    cfg.validate()
    if cfg.experiment != "verify":
        raise ValueError("run_verify needs experiment = verify")
    t0 = time.perf_counter()
    data_cfg = AnnulusConfig(n_samples=cfg.n_samples, seed=cfg.seed)
    normal = gen_annulus(data_cfg, "normal")
    anomaly = gen_annulus(data_cfg, "anomaly")
    model = verify_model(cfg)
    dim = 2
    objective = _objective(cfg, dim, clip_default=2.0 * dim, bw_default=2.0 * dim, norm_default=False)
    rng = np.random.default_rng([cfg.seed, 7])
    normal_batches = shuffled_batches(normal, cfg.batch_normal, rng)
    anomaly_batches = shuffled_batches(anomaly, cfg.batch_anomaly, rng)
    per_epoch = max(1, cfg.n_samples // cfg.batch_normal)
    history = train(
        model,
        objective,
        lambda: (next(normal_batches), next(anomaly_batches)),
        cfg.updates,
        _schedule(cfg, max(1, -(-cfg.updates // per_epoch))),
        updates_per_epoch=per_epoch,
        optimizer=_optimizer(cfg, model),
    )
    grid = EvalGrid(resolution=cfg.grid_resolution)
    q = grid_pdf(model, grid)
    kld = {
        "p": grid_kld(oracle_density("annulus_p", grid), q),
        "uniform": grid_kld(oracle_density("annulus_uniform", grid), q),
    }
    return RunReport(cfg, history.records, model, time.perf_counter() - t0, kld=kld, pdf=q, input_dim=dim)


# ---------------------------------------------------------------------------
# Audio
# ---------------------------------------------------------------------------


def feature_config(cfg: ExperimentConfig) -> af.FeatureConfig:
    mel_bands, context = ARCHITECTURES[cfg.architecture][:2]
    return af.FeatureConfig(mel_bands=mel_bands, context=context)


def audio_model(cfg: ExperimentConfig, dim: int) -> AeModel:
    _, _, h, u, z = ARCHITECTURES[cfg.architecture]
    specs, n_enc = fcn_ae_specs(dim, h, u, z, "relu")
    return glorot_init(specs, cfg.init_seed, n_enc)


def _sub_seed(*keys: int) -> int:
    return int(np.random.SeedSequence(list(keys)).generate_state(1)[0])


def _test_sets(corpus, fcfg, anr, seed, mel):
    """Per test clip: frame features and anomalous-frame mask (all False for
    normal clips). Each test normal clip is used once as a normal clip and
    once as the background of an anomalous clip."""
    rng = np.random.default_rng(_sub_seed(seed, 99, int(round(anr * 100)) & 0xFFFF))
    clips = []
    for wave_ in corpus["test_normal"]:
        seq = af.extract(wave_, fcfg, mel)
        clips.append((seq.frames, np.zeros(len(seq.frames), dtype=bool), 0))
    for wave_ in corpus["test_normal"]:
        event = corpus["test_anomaly"][int(rng.integers(len(corpus["test_anomaly"])))]
        if len(event) > len(wave_):
            event = event[: len(wave_)]
        start = int(rng.integers(len(wave_) - len(event) + 1))
        gain = anr_gain(wave_[start : start + len(event)], event, anr)
        seq = af.extract(mix(wave_, event, start, gain), fcfg, mel)
        clips.append((seq.frames, mix_region_frames(seq, fcfg.context, start, start + len(event)), 1))
    return clips


def load_audio_corpus(cfg: ExperimentConfig) -> dict[str, list[np.ndarray]]:
    paths = read_manifest(cfg.manifest)
    for tag in ("normal", "else", "test_normal", "test_anomaly"):
        if not paths[tag]:
            raise ValueError(f"manifest {cfg.manifest} lists no '{tag}' files")
    corpus = {tag: [af.read_wav(p) for p in ps] for tag, ps in paths.items()}
    seg_len = int(round(cfg.segment_seconds * 16000))
    corpus["segments"] = [s for w in corpus["normal"] for s in segment(w, seg_len)]
    if not corpus["segments"]:
        raise ValueError("normal recordings are shorter than one segment")
    return corpus


def run_audio(cfg: ExperimentConfig, corpus: dict | None = None) -> RunReport:
    """Train an FCN autoencoder on synthesized mini-batches and report
    frame-wise and clip-wise (max over frames) AUC per test ANR."""
    cfg.validate()
    if cfg.experiment != "audio":
        raise ValueError("run_audio needs experiment = audio")
    t0 = time.perf_counter()
    corpus = corpus or load_audio_corpus(cfg)
    fcfg = feature_config(cfg)
    mel = af.mel_matrix(fcfg)
    dim = fcfg.dim
    model = audio_model(cfg, dim)
    if model.input_dim != dim:
        raise ValueError(f"model input dim {model.input_dim} does not match feature dim {dim}")

    if cfg.standardize:
        feats = np.concatenate([af.extract(s, fcfg, mel).frames for s in corpus["segments"]])
        mean, std = feats.mean(axis=0), feats.std(axis=0)
        std[std == 0] = 1.0
    else:
        mean, std = np.zeros(dim), np.ones(dim)

    step = [0]

    def next_batch():
        pair = build_audio_minibatch(
            corpus["segments"], corpus["else"], fcfg, cfg.anr_range,
            seed=_sub_seed(cfg.seed, step[0]), n_concat=cfg.n_concat, mel=mel,
        )
        step[0] += 1
        return (pair.normal - mean) / std, (pair.anomaly - mean) / std

    objective = _objective(cfg, dim, clip_default=2.0 * fcfg.mel_bands, bw_default=1.0 / (2.0 * dim), norm_default=True)
    history = train(
        model,
        objective,
        next_batch,
        cfg.epochs * cfg.batches_per_epoch,
        _schedule(cfg, cfg.epochs),
        updates_per_epoch=cfg.batches_per_epoch,
        optimizer=_optimizer(cfg, model),
    )

    rows = []
    for anr in cfg.test_anrs:
        clips = _test_sets(corpus, fcfg, anr, cfg.seed, mel)
        frame_n, frame_a, clip_n, clip_a = [], [], [], []
        for frames, mask, label in clips:
            s = anomaly_score(model, (frames - mean) / std)
            if label:
                frame_a.append(s[mask])
                clip_a.append(s.max())
            else:
                frame_n.append(s)
                clip_n.append(s.max())
        rows.append({
            "anr_db": anr,
            "frame_auc": auc(np.concatenate(frame_n), np.concatenate(frame_a)),
            "clip_auc": auc(clip_n, clip_a),
        })
    return RunReport(
        cfg, history.records, model, time.perf_counter() - t0,
        auc_rows=rows, input_dim=dim, scaler=(mean, std),
    )


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def loss_csv(losses: list[LossRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["update", "epoch", "lr", "total", "normal_term", "anomaly_term"])
    for r in losses:
        w.writerow([r.update, r.epoch, repr(r.lr), repr(r.total), repr(r.normal_term), repr(r.anomaly_term)])
    return buf.getvalue()


def kld_csv(kld: dict[str, float], objective: str) -> str:
    return "objective,kld_p_q,kld_uniform_q\n" + f"{objective},{kld['p']!r},{kld['uniform']!r}\n"


def auc_csv(rows: list[dict], objective: str) -> str:
    lines = ["objective,anr_db,frame_auc,clip_auc"]
    lines += [f"{objective},{r['anr_db']!r},{r['frame_auc']!r},{r['clip_auc']!r}" for r in rows]
    return "\n".join(lines) + "\n"


def scaler_csv(mean: np.ndarray, std: np.ndarray) -> str:
    return "\n".join(",".join(repr(float(v)) for v in row) for row in (mean, std)) + "\n"


def read_scaler(path) -> tuple[np.ndarray, np.ndarray]:
    rows = Path(path).read_text().strip().splitlines()
    return tuple(np.array([float(v) for v in r.split(",")]) for r in rows)  # type: ignore[return-value]


def export_artifacts(report: RunReport, out_dir) -> list[Path]:
    """Write the run's files into ``out_dir``.

    Files are first written to a temporary directory next to ``out_dir`` and
    moved in only when all of them succeeded.
    """
    out = Path(out_dir)
    cfg = report.config
    files: dict[str, bytes] = {
        "loss.csv": loss_csv(report.losses).encode(),
        "model.bin": model_to_bytes(report.model),
        "config.echo": (cfg.to_yaml() + f"# input_dim: {report.input_dim}\n").encode(),
    }
    if report.kld is not None:
        files["kld.csv"] = kld_csv(report.kld, cfg.objective).encode()
    if report.pdf is not None:
        files["pdf.pgm"] = to_pgm(report.pdf.density)
        files["score.pgm"] = to_pgm(report.pdf.scores)
    if report.auc_rows is not None:
        files["auc.csv"] = auc_csv(report.auc_rows, cfg.objective).encode()
    if report.scaler is not None:
        files["scaler.csv"] = scaler_csv(*report.scaler).encode()

    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".export-", dir=out.parent))
    try:
        for name, data in files.items():
            (tmp / name).write_bytes(data)
        if report.pdf is not None:
            write_grid_csv(tmp / "pdf.csv", report.pdf)
        out.mkdir(exist_ok=True)
        written = []
        for name in sorted(os.listdir(tmp)):
            os.replace(tmp / name, out / name)
            written.append(out / name)
        return written
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
