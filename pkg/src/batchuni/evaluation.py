"""Grid densities, KL divergence, threshold decisions and ROC/AUC."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .nn_core import AeModel
from .objectives import anomaly_score


@dataclass(frozen=True)
class EvalGrid:
    """``resolution`` square cells per axis over ``[lo, hi]^2``; points are
    cell centers."""

    lo: float = -3.0
    hi: float = 3.0
    resolution: int = 201

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("grid resolution must be at least 2")
        if not self.hi > self.lo:
            raise ValueError("empty grid range")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / self.resolution

    @property
    def cell_area(self) -> float:
        return self.step**2

    @property
    def axis(self) -> np.ndarray:
        return self.lo + (np.arange(self.resolution) + 0.5) * self.step

    def points(self) -> np.ndarray:
        """Cell centers, shape (resolution**2, 2); x1 varies fastest."""
        x1, x2 = np.meshgrid(self.axis, self.axis)
        return np.column_stack([x1.ravel(), x2.ravel()])


@dataclass
class GridPdf:
    grid: EvalGrid
    density: np.ndarray  # (resolution, resolution), row index = x2
    scores: np.ndarray | None = None
    z: float = float("nan")

    def total_mass(self) -> float:
        return math.fsum(self.density.ravel()) * self.grid.cell_area


def _normalize(grid: EvalGrid, values: np.ndarray) -> np.ndarray:
    return values / (math.fsum(values.ravel()) * grid.cell_area)


def grid_scores(model: AeModel, grid: EvalGrid) -> np.ndarray:
    if model.input_dim != 2:
        raise ValueError(f"grid evaluation needs a 2-D model, got input dim {model.input_dim}")
    n = grid.resolution
    return np.asarray(anomaly_score(model, grid.points())).reshape(n, n)


def grid_pdf(model: AeModel, grid: EvalGrid = EvalGrid()) -> GridPdf:
    """Boltzmann density exp(-A)/Z on the grid, Z by the cell-center rule."""
    scores = grid_scores(model, grid)
    # shifting by the minimum score cancels in the normalization
    unnorm = np.exp(-(scores - scores.min()))
    z_shifted = math.fsum(unnorm.ravel()) * grid.cell_area
    z = z_shifted * math.exp(-scores.min())
    return GridPdf(grid, unnorm / z_shifted, scores, z)


def oracle_density(kind: str, grid: EvalGrid = EvalGrid(), radius: float = 2.0) -> GridPdf:
    """Known densities of the annulus experiment, normalized on the grid.

    ``annulus_p`` is the normal-data density, proportional to 1/r inside the
    disk; the cell containing the origin gets the exact cell average of 1/r.
    ``annulus_uniform`` is constant on the disk.
    """
    pts = grid.points()
    r = np.hypot(pts[:, 0], pts[:, 1])
    inside = r <= radius
    if kind == "annulus_uniform":
        vals = inside.astype(np.float64)
    elif kind == "annulus_p":
        half = grid.step / 2
        # mean of 1/r over the square [-h, h]^2 is 2 ln(1 + sqrt 2) / h
        origin_val = 2.0 * math.log1p(math.sqrt(2.0)) / half
        at_origin = (np.abs(pts[:, 0]) < half) & (np.abs(pts[:, 1]) < half)
        with np.errstate(divide="ignore"):
            vals = np.where(inside, 1.0 / r, 0.0)
        vals[at_origin] = origin_val
    else:
        raise ValueError(f"unknown oracle density {kind!r}")
    n = grid.resolution
    return GridPdf(grid, _normalize(grid, vals.reshape(n, n)))


def grid_kld(p: GridPdf, q: GridPdf) -> float:
    """D(p || q) = sum p ln(p / q) * cell_area, with 0 ln 0 = 0."""
    if p.grid != q.grid or p.density.shape != q.density.shape:
        raise ValueError("densities live on different grids")
    pv = p.density.ravel()
    qv = np.maximum(q.density.ravel(), 1e-300)
    mask = pv > 0
    terms = pv[mask] * (np.log(pv[mask]) - np.log(qv[mask]))
    return max(math.fsum(terms) * p.grid.cell_area, 0.0)


def decide(score, threshold: float, mode: str = "frame_wise"):
    """1 (anomaly) when the score reaches the threshold, else 0.

    In ``max_over_sequence`` mode ``score`` is a sequence of frame scores and
    a single decision is made on its maximum.
    """
    if mode == "max_over_sequence":
        return int(np.max(score) >= threshold)
    if mode != "frame_wise":
        raise ValueError(f"unknown decision mode {mode!r}")
    s = np.asarray(score)
    if s.ndim == 0:
        return int(s >= threshold)
    return (s >= threshold).astype(int)


def sequence_score(frame_scores) -> float:
    return float(np.max(frame_scores))


def auc(normal_scores, anomaly_scores) -> float:
    """P(anomaly score > normal score) + 0.5 P(tie), via midranks."""
    n = np.asarray(normal_scores, dtype=np.float64).ravel()
    a = np.asarray(anomaly_scores, dtype=np.float64).ravel()
    if len(n) == 0 or len(a) == 0:
        raise ValueError("AUC needs non-empty normal and anomaly score lists")
    allv = np.concatenate([n, a])
    order = np.argsort(allv, kind="mergesort")
    sorted_v = allv[order]
    ranks = np.empty(len(allv))
    # midranks for tied groups
    starts = np.flatnonzero(np.r_[True, sorted_v[1:] != sorted_v[:-1]])
    ends = np.r_[starts[1:], len(allv)]
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = 0.5 * (s + e + 1)
    u = ranks[len(n):].sum() - len(a) * (len(a) + 1) / 2
    return float(u / (len(n) * len(a)))


def roc_curve(normal_scores, anomaly_scores) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(thresholds, TPR, FPR) for decisions ``score >= threshold``.

    Thresholds run from +inf (nothing flagged) down through every distinct
    score.
    """
    n = np.asarray(normal_scores, dtype=np.float64).ravel()
    a = np.asarray(anomaly_scores, dtype=np.float64).ravel()
    thr = np.r_[np.inf, np.unique(np.concatenate([n, a]))[::-1]]
    n_sorted, a_sorted = np.sort(n), np.sort(a)
    tpr = (len(a) - np.searchsorted(a_sorted, thr, side="left")) / len(a)
    fpr = (len(n) - np.searchsorted(n_sorted, thr, side="left")) / len(n)
    return thr, tpr, fpr


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------


def write_grid_csv(path, pdf: GridPdf) -> None:
    """Columns x1, x2, density, score, one row per cell center."""
    pts = pdf.grid.points()
    dens = pdf.density.ravel()
    scores = pdf.scores.ravel() if pdf.scores is not None else np.full(len(dens), np.nan)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "x2", "density", "score"])
        for (x1, x2), d, s in zip(pts, dens, scores):
            w.writerow([f"{x1:.6f}", f"{x2:.6f}", f"{d:.10e}", f"{s:.10e}"])


def to_pgm(values: np.ndarray) -> bytes:
    """Binary 8-bit PGM (P5), min-max scaled to 0..255.

    Row 0 of the image is the top, i.e. the largest x2, so the picture has the
    usual orientation. A constant array maps to all zeros.
    """
    v = np.asarray(values, dtype=np.float64)[::-1]
    lo, hi = float(v.min()), float(v.max())
    scaled = np.zeros_like(v) if hi == lo else (v - lo) / (hi - lo)
    img = np.round(scaled * 255).astype(np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    return header + img.tobytes()


def write_pgm(path, values: np.ndarray) -> None:
    Path(path).write_bytes(to_pgm(values))


def write_roc_csv(path, normal_scores, anomaly_scores) -> None:
    thr, tpr, fpr = roc_curve(normal_scores, anomaly_scores)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "tpr", "fpr"])
        for t, a, b in zip(thr, tpr, fpr):
            w.writerow([repr(float(t)), f"{a:.10f}", f"{b:.10f}"])
