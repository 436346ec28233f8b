"""Self-generated audio corpus for the scaled-down audio experiment.

Construction (all 16 kHz mono, 16-bit):

* ``normal``: machine recordings. A steady hum (harmonic tone at 150 Hz plus
  low broadband noise) interrupted by short warm-up bursts, a rare but
  normal state with a 420 Hz harmonic tone and stronger hiss. Warm-up covers
  roughly ``warmup_fraction`` of the training audio.
* ``else``: something-else clips for training-time anomaly simulation: white
  and pink noise bursts, frequency sweeps and tone pips, 0.3-1.5 s long.
* ``test_normal``: 3 s clips of the same machine; every other clip contains a
  warm-up burst.
* ``test_anomaly``: impulsive and tonal event sounds (click trains, knocks,
  ringing), 0.2-1.0 s, later mixed into test clips at a fixed ANR.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_features import write_wav
from .synth import write_manifest

SR = 16000


@dataclass(frozen=True)
class ToyCorpusConfig:
    n_train_files: int = 6
    train_seconds: float = 30.0
    warmup_fraction: float = 0.06
    n_else: int = 12
    n_test_normal: int = 20
    n_test_anomaly: int = 8
    test_seconds: float = 3.0
    seed: int = 0


def _harmonic(t, f0, amps, rng):
    phase = rng.uniform(0, 2 * np.pi, size=len(amps))
    return sum(a * np.sin(2 * np.pi * f0 * (k + 1) * t + phase[k]) for k, a in enumerate(amps))


def _pink(n, rng):
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.arange(len(spec))
    spec[1:] /= np.sqrt(f[1:])
    spec[0] = 0
    out = np.fft.irfft(spec, n)
    return out / (np.std(out) + 1e-12)


def steady_hum(n, rng):
    t = np.arange(n) / SR
    tone = _harmonic(t, 150.0 * (1 + rng.uniform(-0.01, 0.01)), [0.3, 0.15, 0.08, 0.04], rng)
    return tone + 0.02 * rng.standard_normal(n)


def warmup(n, rng):
    t = np.arange(n) / SR
    tone = _harmonic(t, 420.0 * (1 + rng.uniform(-0.01, 0.01)), [0.25, 0.12, 0.06], rng)
    return tone + 0.08 * rng.standard_normal(n)


def machine_recording(seconds: float, warmup_fraction: float, rng, burst_seconds=(0.5, 1.0)):
    """Steady hum with warm-up bursts replacing ``warmup_fraction`` of it."""
    n = int(seconds * SR)
    x = steady_hum(n, rng)
    target = warmup_fraction * n
    covered = 0
    while covered < target:
        length = int(rng.uniform(*burst_seconds) * SR)
        start = int(rng.integers(0, n - length))
        ramp = np.minimum(1.0, np.minimum(np.arange(length), np.arange(length)[::-1]) / 160.0)
        x[start : start + length] = (1 - ramp) * x[start : start + length] + ramp * warmup(length, rng)
        covered += length
    return x


def else_clip(rng):
    n = int(rng.uniform(0.3, 1.5) * SR)
    t = np.arange(n) / SR
    kind = rng.integers(4)
    if kind == 0:
        x = rng.standard_normal(n)
    elif kind == 1:
        x = _pink(n, rng)
    elif kind == 2:
        f0, f1 = rng.uniform(200, 1000), rng.uniform(2000, 7000)
        x = np.sin(2 * np.pi * (f0 * t + (f1 - f0) * t**2 / (2 * t[-1])))
    else:
        x = np.sin(2 * np.pi * rng.uniform(500, 6000) * t)
    env = np.minimum(1.0, np.minimum(np.arange(n), np.arange(n)[::-1]) / 80.0)
    return 0.3 * x * env


def anomaly_event(rng):
    n = int(rng.uniform(0.2, 1.0) * SR)
    t = np.arange(n) / SR
    kind = rng.integers(3)
    x = np.zeros(n)
    if kind == 0:  # click train
        for pos in range(0, n - 64, int(rng.uniform(0.03, 0.08) * SR)):
            x[pos : pos + 64] += rng.standard_normal(64) * np.exp(-np.arange(64) / 10.0)
    elif kind == 1:  # knock: decaying low resonance
        for pos in range(0, n - 1600, int(rng.uniform(0.15, 0.3) * SR)):
            k = np.arange(1600) / SR
            x[pos : pos + 1600] += np.sin(2 * np.pi * rng.uniform(80, 300) * k) * np.exp(-k * 40)
            x[pos : pos + 32] += rng.standard_normal(32)
    else:  # ringing
        f = rng.uniform(1000, 3000)
        x = (np.sin(2 * np.pi * f * t) + 0.5 * np.sin(2 * np.pi * 1.5 * f * t)) * (np.sin(2 * np.pi * 20 * t) > 0)
    return 0.3 * x / (np.max(np.abs(x)) + 1e-12)


def generate(out_dir, cfg: ToyCorpusConfig = ToyCorpusConfig()) -> Path:
    """Write the corpus WAVs and ``manifest.txt`` under ``out_dir``.

    Returns the manifest path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    entries = []

    def put(tag, name, x):
        write_wav(out / name, x)
        entries.append((tag, name))

    for k in range(cfg.n_train_files):
        put("normal", f"normal_{k:02d}.wav", machine_recording(cfg.train_seconds, cfg.warmup_fraction, rng))
    for k in range(cfg.n_else):
        put("else", f"else_{k:02d}.wav", else_clip(rng))
    for k in range(cfg.n_test_normal):
        frac = 0.25 if k % 2 else 0.0
        put("test_normal", f"test_normal_{k:02d}.wav", machine_recording(cfg.test_seconds, frac, rng))
    for k in range(cfg.n_test_anomaly):
        put("test_anomaly", f"test_anomaly_{k:02d}.wav", anomaly_event(rng))
    manifest = out / "manifest.txt"
    write_manifest(manifest, entries)
    return manifest
