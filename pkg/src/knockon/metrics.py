"""Forecast evaluation: per-step RMSE, thresholded F1, and the composite score.

The time-weighted RMSE term discounts later prediction steps by e^(-i) and
normalizes against a noise floor k (the error a per-action mean predictor
cannot avoid), so models with different horizon lengths land on one scale:

    score(n, k) = (1 / (k * S(n))) * sum_i e^(-i) * (k - R_i),  S(n) = sum_i e^(-i)

A perfect predictor scores exactly 1; values below 0 mean the model is worse
than the natural noise floor and are deliberately not clamped. The composite
is the convex combination tau * time_weighted + (1 - tau) * f1_mean.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateK, EmptyInput

logger = logging.getLogger(__name__)


def rmse_per_step(
    preds: np.ndarray,
    targets: np.ndarray,
    mask: np.ndarray | None = None,
) -> list[float | None]:
    """Root-mean-square error per prediction step, in seconds.

    mask marks entries to keep (True); steps with every sample masked out are
    reported as None.
    """
    preds = np.asarray(preds, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if preds.shape != targets.shape:
        raise ValueError(f"shape mismatch: {preds.shape} vs {targets.shape}")
    if preds.ndim != 2:
        raise ValueError("expected (n_samples, n_steps) arrays")
    if mask is None:
        mask = np.ones(preds.shape, dtype=bool)
    result: list[float | None] = []
    sq = (preds - targets) ** 2
    for i in range(preds.shape[1]):
        kept = mask[:, i]
        if not kept.any():
            logger.warning("all samples masked at step %d; RMSE undefined", i + 1)
            result.append(None)
        else:
            result.append(float(np.sqrt(sq[kept, i].mean())))
    return result


def estimate_k(
    durations_by_action: Mapping[object, Sequence[float]],
    d_max: Mapping[object, float] | float,
) -> float:
    """Noise floor k: RMSE of per-action mean predictors over durations <= d_max.

    Zero means every retained duration equals its action mean; the weighted
    score is undefined in that degenerate case.
    """
    total_sq = 0.0
    total_n = 0
    for action, durations in durations_by_action.items():
        limit = d_max if isinstance(d_max, (int, float)) else d_max[action]
        kept = np.asarray([d for d in durations if d <= limit], dtype=float)
        if kept.size == 0:
            continue
        total_sq += float(((kept - kept.mean()) ** 2).sum())
        total_n += kept.size
    if total_n == 0:
        raise EmptyInput("no durations below d_max")
    return math.sqrt(total_sq / total_n)


def step_weights(n: int) -> np.ndarray:
    """Exponential step discounts e^(-i) for i = 1..n."""
    return np.exp(-np.arange(1, n + 1, dtype=float))


def tarmse(rmse: Sequence[float], k: float) -> float:
    """Time-weighted, k-normalized aggregate of per-step RMSE values.

    Equals 1 exactly when every R_i is 0; may go negative when the model is
    worse than the noise floor (no clamping).
    """
    if k <= 0:
        raise DegenerateK(f"k must be positive, got {k}")
    if any(r is None for r in rmse):
        raise ValueError("per-step RMSE contains missing steps")
    r = np.asarray(rmse, dtype=float)
    w = step_weights(len(r))
    return float((w * (k - r)).sum() / (k * w.sum()))


def f1_per_step(
    preds: np.ndarray,
    targets: np.ndarray,
    nominals: np.ndarray,
    b: float,
) -> list[float]:
    """Per-step F1 of the anomalous class.

    A duration counts as anomalous when it exceeds its action's nominal by
    more than the relative threshold b, judged identically for predictions
    and targets. Steps without a single positive on either side score 0.
    """
    if b <= 0:
        raise ValueError(f"threshold b must be positive, got {b}")
    preds = np.asarray(preds, dtype=float)
    targets = np.asarray(targets, dtype=float)
    nominals = np.asarray(nominals, dtype=float)
    if not preds.shape == targets.shape == nominals.shape:
        raise ValueError("preds, targets and nominals must share a shape")
    cutoff = nominals * (1.0 + b)
    pred_pos = preds > cutoff
    true_pos = targets > cutoff
    scores: list[float] = []
    for i in range(preds.shape[1]):
        tp = int((pred_pos[:, i] & true_pos[:, i]).sum())
        fp = int((pred_pos[:, i] & ~true_pos[:, i]).sum())
        fn = int((~pred_pos[:, i] & true_pos[:, i]).sum())
        denom = 2 * tp + fp + fn
        if denom == 0:
            logger.warning("no positives at step %d; F1 defined as 0", i + 1)
            scores.append(0.0)
        else:
            scores.append(2 * tp / denom)
    return scores


def f1_pooled(
    preds: np.ndarray, targets: np.ndarray, nominals: np.ndarray, b: float
) -> float:
    """Micro-averaged F1 pooling the confusion counts of all steps."""
    if b <= 0:
        raise ValueError(f"threshold b must be positive, got {b}")
    cutoff = np.asarray(nominals, dtype=float) * (1.0 + b)
    pred_pos = np.asarray(preds, dtype=float) > cutoff
    true_pos = np.asarray(targets, dtype=float) > cutoff
    tp = int((pred_pos & true_pos).sum())
    fp = int((pred_pos & ~true_pos).sum())
    fn = int((~pred_pos & true_pos).sum())
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def cta(tarmse_value: float, f1_mean: float, tau: float) -> float:
    """Convex combination of the time-weighted term and the F1 term."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    return tau * tarmse_value + (1.0 - tau) * f1_mean


def format_pct(value: float) -> str:
    return f"{100.0 * value:.2f}%"


@dataclass(frozen=True)
class Crossover:
    model_a: str
    model_b: str
    tau: float


def crossover_tau(
    a: tuple[float, float], b: tuple[float, float]
) -> float | None:
    """Tau where two models' composite curves intersect; None when parallel.

    Each argument is (time-weighted score, f1). The composite is linear in
    tau, so the intersection is closed form.
    """
    (t_a, f_a), (t_b, f_b) = a, b
    df = f_a - f_b
    denom = df - (t_a - t_b)
    if denom == 0.0:
        return None
    return df / denom


def tau_sweep(
    scores: Mapping[str, tuple[float, float]]
) -> list[Crossover]:
    """All pairwise composite-curve crossovers that fall inside [0, 1]."""
    if len(scores) < 2:
        raise ValueError("need at least two models to sweep")
    names = list(scores)
    crossovers: list[Crossover] = []
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            tau_star = crossover_tau(scores[a], scores[b])
            if tau_star is not None and 0.0 <= tau_star <= 1.0:
                crossovers.append(Crossover(a, b, tau_star))
    return crossovers


@dataclass
class MetricReport:
    """Full evaluation of one model on one test set."""

    rmse: list[float | None]
    f1: list[float]
    tarmse: float
    f1_mean: float
    cta: float
    k: float
    tau: float
    b: float

    def to_dict(self) -> dict:
        return {
            "rmse_per_step": self.rmse,
            "f1_per_step": self.f1,
            "tarmse": self.tarmse,
            "f1_mean": self.f1_mean,
            "cta": self.cta,
            "cta_pct": format_pct(self.cta),
            "k": self.k,
            "tau": self.tau,
            "b": self.b,
        }


def compute_report(
    preds: np.ndarray,
    targets: np.ndarray,
    *,
    nominals: np.ndarray,
    k: float,
    mask: np.ndarray | None = None,
    tau: float = 0.5,
    b: float = 0.1,
    pooled: bool = False,
) -> MetricReport:
    """Evaluate predictions (all in seconds) into a single report."""
    rmse = rmse_per_step(preds, targets, mask)
    f1 = f1_per_step(preds, targets, nominals, b)
    tw = tarmse(rmse, k)
    f1_mean = (
        f1_pooled(preds, targets, nominals, b) if pooled else float(np.mean(f1))
    )
    return MetricReport(
        rmse=rmse,
        f1=f1,
        tarmse=tw,
        f1_mean=f1_mean,
        cta=cta(tw, f1_mean, tau),
        k=k,
        tau=tau,
        b=b,
    )


def nominal_baseline(
    target_codes: np.ndarray, nominal_by_code: Mapping[int, float]
) -> np.ndarray:
    """Reference predictor: always the per-action nominal duration."""
    codes = np.asarray(target_codes, dtype=int)
    out = np.zeros(codes.shape, dtype=float)
    for code, nominal in nominal_by_code.items():
        out[codes == code] = nominal
    return out


def global_max_mask(
    target_raw: np.ndarray, target_codes: np.ndarray, global_max_by_code: Mapping[int, float]
) -> np.ndarray:
    """Keep-mask excluding target durations above their action's global threshold."""
    raw = np.asarray(target_raw, dtype=float)
    codes = np.asarray(target_codes, dtype=int)
    limit = np.full(raw.shape, np.inf)
    for code, value in global_max_by_code.items():
        limit[codes == code] = value
    return raw <= limit


def cta_curve(
    score: tuple[float, float], taus: Sequence[float]
) -> list[tuple[float, float]]:
    """(tau, composite) points for one model, for plotting."""
    t, f = score
    return [(float(tau), cta(t, f, float(tau))) for tau in taus]


def render_cta_svg(
    scores: Mapping[str, tuple[float, float]],
    taus: Sequence[float] | None = None,
    width: int = 640,
    height: int = 400,
) -> str:
    """Deterministic standalone SVG of composite-vs-tau lines per model."""
    if taus is None:
        taus = [i / 100.0 for i in range(101)]
    pad = 50.0
    values = [v for name in scores for _, v in cta_curve(scores[name], taus)]
    lo, hi = min(values), max(values)
    if hi <= lo:
        hi = lo + 1.0

    def sx(tau: float) -> float:
        return pad + tau * (width - 2 * pad)

    def sy(v: float) -> float:
        return height - pad - (v - lo) / (hi - lo) * (height - 2 * pad)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="12">tau</text>',
        f'<text x="14" y="{height / 2:.1f}" font-size="12" transform="rotate(-90 14 {height / 2:.1f})" text-anchor="middle">composite score</text>',
    ]
    for idx, (name, score) in enumerate(scores.items()):
        color = palette[idx % len(palette)]
        points = " ".join(
            f"{sx(tau):.2f},{sy(v):.2f}" for tau, v in cta_curve(score, taus)
        )
        parts.append(f'<polyline fill="none" stroke="{color}" points="{points}"/>')
        parts.append(
            f'<text x="{width - pad + 4}" y="{pad + 16 * idx + 10}" font-size="11" fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
