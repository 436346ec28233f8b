"""Training data: the 2-D annulus dataset and audio mini-batch synthesis."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class AnnulusConfig:
    n_samples: int = 10_000
    seed: int = 0
    normal_range: tuple[float, float] = (0.0, 2.0)
    anomaly_range: tuple[float, float] = (2.0, 3.0)

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if self.normal_range[1] > self.anomaly_range[0]:
            raise ValueError("normal and anomaly radius ranges overlap")


def gen_annulus(cfg: AnnulusConfig, kind: str = "normal") -> np.ndarray:
    """Points r (cos psi, sin psi) with r uniform on the class range.

    Normal radii cover [0, 2]; anomaly radii cover (2, 3] (the open end is
    obtained by reflecting a half-open uniform draw).
    """
    if kind == "normal":
        lo, hi = cfg.normal_range
        stream = 0
    elif kind == "anomaly":
        lo, hi = cfg.anomaly_range
        stream = 1
    else:
        raise ValueError(f"unknown annulus class {kind!r}")
    rng = np.random.default_rng([cfg.seed, stream])
    u = rng.random(cfg.n_samples)
    r = lo + (hi - lo) * u if kind == "normal" else hi - (hi - lo) * u
    psi = 2.0 * np.pi * rng.random(cfg.n_samples)
    return np.column_stack([r * np.cos(psi), r * np.sin(psi)])


# ---------------------------------------------------------------------------
# Audio
# ---------------------------------------------------------------------------

MANIFEST_TAGS = ("normal", "else", "test_normal", "test_anomaly")


class EmptyAnomalyBatch(ValueError):
    """Raised when a synthesized mini-batch has no anomalous frames."""


@dataclass
class MiniBatchPair:
    normal: np.ndarray  # (M_u, D)
    anomaly: np.ndarray  # (M_a, D)
    meta: dict = field(default_factory=dict)


def rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(x))))


def anr_gain(normal_segment: np.ndarray, else_segment: np.ndarray, anr_db: float) -> float:
    """Gain putting ``else_segment`` at ``anr_db`` dB (RMS) relative to the
    normal segment it is mixed into."""
    rn, re = rms(normal_segment), rms(else_segment)
    if rn == 0 or re == 0:
        raise ValueError("cannot set an ANR against a silent segment")
    return 10.0 ** (anr_db / 20.0) * rn / re


def segment(wave_: np.ndarray, length: int) -> list[np.ndarray]:
    """Consecutive pieces of ``length`` samples; a shorter tail is dropped."""
    n = len(wave_) // length
    return [wave_[k * length : (k + 1) * length] for k in range(n)]


def read_manifest(path) -> dict[str, list]:
    """Parse ``<tag> <path>`` lines. Relative paths resolve against the
    manifest's directory; ``#`` starts a comment."""
    path = Path(path)
    out: dict[str, list] = {t: [] for t in MANIFEST_TAGS}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        if len(parts) != 2 or parts[0] not in MANIFEST_TAGS:
            raise ValueError(f"{path}:{lineno}: expected '<tag> <path>' with tag in {MANIFEST_TAGS}")
        p = Path(parts[1])
        out[parts[0]].append(p if p.is_absolute() else path.parent / p)
    return out


def write_manifest(path, entries: list[tuple[str, str]]) -> None:
    lines = ["# tag path"] + [f"{tag} {p}" for tag, p in entries]
    Path(path).write_text("\n".join(lines) + "\n")


def mix_region_frames(seq, context: int, start: int, stop: int) -> np.ndarray:
    """Mask of feature rows whose context window overlaps samples [start, stop)."""
    if stop <= start:
        return np.zeros(len(seq.frames), dtype=bool)
    centre = seq.first_frame + np.arange(len(seq.frames))
    lo = (centre - context) * seq.hop
    hi = (centre + context) * seq.hop + seq.stft_len
    return (lo < stop) & (hi > start)


def mix(normal: np.ndarray, other: np.ndarray, start: int, gain: float) -> np.ndarray:
    out = normal.copy()
    out[start : start + len(other)] += gain * other
    return out


def build_audio_minibatch(
    normal_segments: list[np.ndarray],
    else_clips: list[np.ndarray],
    feature_cfg,
    anr_range: tuple[float, float] = (-30.0, 10.0),
    seed: int = 0,
    n_concat: int = 10,
    mel: np.ndarray | None = None,
    gain_override: float | None = None,
) -> MiniBatchPair:
    """Concatenate ``n_concat`` random normal segments, mix in one random
    something-else clip at a random ANR and position, and split the feature
    frames into normal and anomaly batches.

    A frame is anomalous when its context window touches the mixed region.
    ``gain_override`` replaces the ANR-derived gain (0 disables mixing, which
    leaves no anomaly frames and is rejected).
    """
    from .audio_features import extract

    if not normal_segments or not else_clips:
        raise ValueError("empty corpus")
    rng = np.random.default_rng(seed)
    picks = rng.integers(len(normal_segments), size=n_concat)
    base = np.concatenate([normal_segments[k] for k in picks])
    e_idx = int(rng.integers(len(else_clips)))
    other = else_clips[e_idx]
    if len(other) > len(base):
        raise ValueError(
            f"something-else clip of {len(other)} samples is longer than the {len(base)}-sample normal signal"
        )
    start = int(rng.integers(len(base) - len(other) + 1))
    anr = float(rng.uniform(*anr_range))
    if gain_override is None:
        gain = anr_gain(base[start : start + len(other)], other, anr)
    else:
        gain = gain_override
    mixed = mix(base, other, start, gain)
    seq = extract(mixed, feature_cfg, mel)
    stop = start + len(other) if gain != 0 else start
    is_anom = mix_region_frames(seq, feature_cfg.context, start, stop)
    meta = {
        "normal_picks": picks.tolist(),
        "else_index": e_idx,
        "mix_start": start,
        "mix_stop": start + len(other),
        "anr_db": anr,
        "gain": gain,
    }
    if not is_anom.any():
        raise EmptyAnomalyBatch("mixing produced no anomalous frames")
    return MiniBatchPair(seq.frames[~is_anom], seq.frames[is_anom], meta)
