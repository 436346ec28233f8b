"""
Audio pipeline on a synthetic machine-sound corpus
==================================================

This walks through the audio path end to end on a small generated corpus:
WAV files, log-mel features with context frames, one training mini-batch
with a mixed-in "something else" clip, a short training run and the AUCs at
several anomaly-to-normal ratios.
"""

from pathlib import Path

import numpy as np

from batchuni import audio_features as af
from batchuni.experiments import feature_config, load_audio_corpus, load_config, run_audio
from batchuni.synth import build_audio_minibatch
from batchuni.toy_corpus import ToyCorpusConfig, generate

# %%
# Generate the corpus (a hum with occasional warm-up phases, plus clicks and
# knocks as anomalies) and read back the manifest.
manifest = generate(Path("demo_out/toy_corpus"), ToyCorpusConfig())
print("manifest:", manifest)
print(Path(manifest).read_text().splitlines()[:3], "...")

# %%
# Features: 512-point Hann STFT, 40 mel bands, log, 5 context frames each side.
cfg = load_config(preset="audio-smoke", overrides=dict(manifest=str(manifest), objective="BU"))
fcfg = feature_config(cfg)
corpus = load_audio_corpus(cfg)
seq = af.extract(corpus["test_normal"][0], fcfg)
print("feature dim", fcfg.dim, "frames in first test clip", len(seq.frames))

# %%
# One training mini-batch: concatenated normal segments with a random
# something-else clip mixed in at a random ANR.
segs = [s for w in corpus["normal"] for s in np.array_split(w, len(w) // 48000)]
pair = build_audio_minibatch(segs, corpus["else"], fcfg, anr_range=(-30, 10), seed=3)
print("normal frames", len(pair.normal), "anomaly frames", len(pair.anomaly), "ANR", round(pair.meta["anr_db"], 1), "dB")

# %%
# Train RE and BU for the smoke schedule and compare AUCs.
for kind in ("RE", "BU"):
    cfg = load_config(preset="audio-smoke", overrides=dict(manifest=str(manifest), objective=kind))
    report = run_audio(cfg, corpus)
    rows = ", ".join(f"{r['anr_db']:+.0f} dB frame {r['frame_auc']:.3f} clip {r['clip_auc']:.3f}" for r in report.auc_rows)
    print(f"{kind}: {rows}")
