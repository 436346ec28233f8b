"""
Comparing RE, SNP and BU on the annulus
=======================================

A small autoencoder (2 / 20, 10, 20 / 2, sigmoid) is trained three ways on
the annulus data. Its reconstruction error defines a density
q(x) = exp(-A(x)) / Z on a grid over [-3, 3]^2. The script prints the KL
divergence of q from the true normal density p and from the uniform density
on the disk, then writes greyscale heatmaps of q for each objective.

The default uses the short smoke preset so it finishes in seconds; pass
``--full`` for the paper-scale setting (about a minute per objective).
"""

import sys
from pathlib import Path

from batchuni.evaluation import write_pgm
from batchuni.experiments import load_config, run_verify

preset = "verify-paper" if "--full" in sys.argv else "verify-smoke"
out = Path("demo_out/annulus")
out.mkdir(parents=True, exist_ok=True)

# %%
# Train each objective from the same initial parameters.
print(f"preset {preset}")
print("objective   D(p||q)   D(U||q)   seconds")
for kind in ("RE", "SNP", "BU"):
    cfg = load_config(preset=preset, overrides=dict(objective=kind, seed=0, init_seed=0))
    report = run_verify(cfg)
    print(f"{kind:9s}   {report.kld['p']:.3f}     {report.kld['uniform']:.3f}     {report.wall_time:.1f}")
    write_pgm(out / f"pdf_{kind}.pgm", report.pdf.density)

# %%
# RE learns the 1/r peak at the origin (small D(p||q), large D(U||q) at full
# scale). Adding the anomaly term sharpens the boundary at r = 2, and the BU
# weights flatten the inside of the disk, which shows up as the smallest
# D(U||q). The heatmaps in demo_out/annulus show the same picture.
print(f"heatmaps written to {out}/")
