"""Per-view PSNR/SSIM reports for the model and the bicubic baseline."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .data.lightfield import LightField, y_channel
from .data.resample import downsample, upsample
from .metrics import psnr, ssim
from .model import ModelConfig, ModelWeights, probe_attention, super_resolve

REPORT_COLUMNS = ("scene", "u", "v", "psnr", "ssim")
ATTENTION_COLUMNS = ("block", "lr", "view", "weight")


@dataclass
class ViewScores:
    psnr: np.ndarray  # (U, V)
    ssim: np.ndarray  # (U, V)


@dataclass
class SceneReport:
    name: str
    model: ViewScores
    bicubic: Optional[ViewScores]
    attention: Optional[np.ndarray] = None  # (n_blocks, U*V)


@dataclass
class EvalReport:
    scenes: List[SceneReport] = field(default_factory=list)

    def _mean(self, method: str, metric: str) -> float:
        if any(getattr(s, method) is None for s in self.scenes):
            raise ValueError(f"report has no {method} scores")
        return float(np.mean([getattr(getattr(s, method), metric) for s in self.scenes]))

    @property
    def mean_psnr(self) -> float:
        return self._mean("model", "psnr")

    @property
    def mean_ssim(self) -> float:
        return self._mean("model", "ssim")

    @property
    def bicubic_psnr(self) -> float:
        return self._mean("bicubic", "psnr")

    @property
    def bicubic_ssim(self) -> float:
        return self._mean("bicubic", "ssim")

    def rows(self, method: str = "model") -> List[tuple]:
        """(scene, u, v, psnr, ssim) per view, then the aggregate ``mean`` row."""
        out = []
        for s in self.scenes:
            scores: ViewScores = getattr(s, method)
            for (u, v), p in np.ndenumerate(scores.psnr):
                out.append((s.name, u, v, float(p), float(scores.ssim[u, v])))
        out.append(("mean", "", "", self._mean(method, "psnr"), self._mean(method, "ssim")))
        return out

    def write_csv(self, path, method: str = "model") -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(REPORT_COLUMNS)
            for name, u, v, p, s in self.rows(method):
                writer.writerow([name, u, v, f"{p:.6f}", f"{s:.6f}"])


def score_views(sr: np.ndarray, hr: np.ndarray, peak: float = 1.0) -> ViewScores:
    """Metrics of every SAI; both inputs (U, V, H, W)."""
    sr, hr = np.asarray(sr), np.asarray(hr)
    if sr.shape != hr.shape:
        raise ValueError(f"SR and ground truth differ in dims: {sr.shape} vs {hr.shape}")
    U, V = sr.shape[:2]
    p = np.array([[psnr(sr[u, v], hr[u, v], peak) for v in range(V)] for u in range(U)])
    s = np.array([[ssim(sr[u, v], hr[u, v], peak) for v in range(V)] for u in range(U)])
    return ViewScores(p, s)


def y_planes(lf: LightField) -> np.ndarray:
    """(U, V, H, W) float32 luma in [0, 1]."""
    return y_channel(lf.to_real()).data[:, :, 0]


def degrade_y(hr: np.ndarray, a: int) -> np.ndarray:
    return np.clip(downsample(hr, a), 0.0, 1.0).astype(np.float32)


def evaluate(
    cfg: ModelConfig,
    wts: ModelWeights,
    scenes: Sequence[Tuple[str, LightField]],
    probe: bool = False,
) -> EvalReport:
    """Degrade each HR scene, super-resolve it and score model and bicubic on Y."""
    report = EvalReport()
    a = cfg.scale
    for name, lf in scenes:
        hr = y_planes(lf)
        if hr.shape[0] != cfg.angular_u or hr.shape[1] != cfg.angular_v:
            raise ValueError(f"scene {name}: angular grid {hr.shape[:2]} does not match the config")
        lr = degrade_y(hr, a)
        sr = np.clip(super_resolve(lr, cfg, wts), 0.0, 1.0)
        # same compute width as the model so a zero network reproduces it exactly
        bic = np.clip(upsample(lr, a).astype(wts.dtype), 0.0, 1.0)
        att = probe_attention(lr, cfg, wts) if probe and cfg.use_va else None
        report.scenes.append(SceneReport(name, score_views(sr, hr), score_views(bic, hr), att))
    return report


def compare(sr: LightField, hr: LightField, name: str = "scene") -> SceneReport:
    """Score a super-resolved light field against ground truth (no baseline run)."""
    sr_y, hr_y = y_planes(sr), y_planes(hr)
    return SceneReport(name, score_views(sr_y, hr_y), None)


def attention_rows(weights: np.ndarray, label: str) -> List[tuple]:
    """(block, lr, view, weight) rows; blocks and views are 1- and 0-based."""
    return [(k + 1, label, n, float(w)) for k, row in enumerate(weights) for n, w in enumerate(row)]


def write_attention_csv(path, rows: Sequence[tuple]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(ATTENTION_COLUMNS)
        for block, label, view, weight in rows:
            writer.writerow([block, label, view, f"{weight:.8f}"])
