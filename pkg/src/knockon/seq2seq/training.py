"""Seeded, deterministic training: MAE loss, Adam, checkpoint container.

The same seed, config and data produce byte-identical checkpoints; the
optimizer walks parameters in sorted-name order and every random draw
(shuffling, dropout) comes from one generator.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import MissingNormalization, NonFiniteGradient, NonFiniteLoss
from ..pipeline import NormalizationParams, WindowedPair, pairs_to_arrays
from .models import ModelConfig, Seq2SeqModel, build_model

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"KNCKPT1\n"


def mae_loss(preds: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean absolute error and its subgradient (0 at exact hits)."""
    diff = preds - targets
    loss = float(np.abs(diff).mean())
    grad = np.sign(diff) / diff.size
    return loss, grad


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 128
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be at least 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in [0, 1)")


class Adam:
    """Adaptive moment estimation with bias correction."""

    def __init__(self, params: dict[str, np.ndarray], cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        self.m = {name: np.zeros_like(p) for name, p in params.items()}
        self.v = {name: np.zeros_like(p) for name, p in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        cfg = self.cfg
        self.t += 1
        for name in sorted(params):
            g = grads[name]
            self.m[name] = cfg.beta1 * self.m[name] + (1.0 - cfg.beta1) * g
            self.v[name] = cfg.beta2 * self.v[name] + (1.0 - cfg.beta2) * g * g
            m_hat = self.m[name] / (1.0 - cfg.beta1**self.t)
            v_hat = self.v[name] / (1.0 - cfg.beta2**self.t)
            params[name] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)


@dataclass
class Checkpoint:
    """Trained parameters plus everything needed to reuse them."""

    config: ModelConfig
    params: dict[str, np.ndarray]
    train_config: TrainConfig
    history: dict[str, list[float]]
    normalization: NormalizationParams | None = None
    notes: list[str] = field(default_factory=list)

    def build_model(self) -> Seq2SeqModel:
        model = build_model(self.config)
        model.params = {name: p.copy() for name, p in self.params.items()}
        return model

    def save(self, path) -> None:
        path = Path(path)
        tensors = [
            {"name": name, "shape": list(p.shape)} for name, p in self.params.items()
        ]
        header = {
            "format": "knockon-checkpoint",
            "version": 1,
            "config": self.config.to_dict(),
            "train_config": asdict(self.train_config),
            "history": self.history,
            "normalization": self.normalization.to_dict() if self.normalization else None,
            "notes": self.notes,
            "tensors": tensors,
        }
        with path.open("wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode())
            fh.write(b"\n")
            for spec in tensors:
                fh.write(np.ascontiguousarray(self.params[spec["name"]], dtype="<f8").tobytes())


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path} is not a checkpoint file")
        header = json.loads(fh.readline().decode())
        params: dict[str, np.ndarray] = {}
        for spec in header["tensors"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(count * 8), dtype="<f8").reshape(shape)
            params[spec["name"]] = data.astype(float)
    norm = header.get("normalization")
    return Checkpoint(
        config=ModelConfig.from_dict(header["config"]),
        params=params,
        train_config=TrainConfig(**header["train_config"]),
        history=header["history"],
        normalization=NormalizationParams.from_dict(norm) if norm else None,
        notes=list(header.get("notes", [])),
    )


def _forward_loss(model, x, y, train, rng):
    preds, cache = model.forward(x, train=train, rng=rng)
    loss, dpred = mae_loss(preds, y)
    return loss, dpred, cache


def train(
    model: Seq2SeqModel,
    train_x: np.ndarray,
    train_y: np.ndarray,
    cfg: TrainConfig,
    val_x: np.ndarray | None = None,
    val_y: np.ndarray | None = None,
    normalization: NormalizationParams | None = None,
) -> Checkpoint:
    """Train in place and return a checkpoint with per-epoch history.

    Without an explicit validation set, the chronological tail
    (cfg.val_fraction of the pairs) is held out for the loss curve only.
    """
    train_x = np.asarray(train_x, dtype=float)
    train_y = np.asarray(train_y, dtype=float)
    if len(train_x) == 0:
        raise ValueError("empty training set")
    if val_x is None and cfg.val_fraction > 0.0 and len(train_x) > 1:
        cut = max(1, len(train_x) - math.floor(cfg.val_fraction * len(train_x)))
        train_x, val_x = train_x[:cut], train_x[cut:]
        train_y, val_y = train_y[:cut], train_y[cut:]
        if len(val_x) == 0:
            val_x = val_y = None

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    optimizer = Adam(model.params, cfg)
    history: dict[str, list[float]] = {"train_loss": [], "val_loss": []}
    notes: list[str] = []
    n = len(train_x)

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, dpred, cache = _forward_loss(model, train_x[idx], train_y[idx], True, rng)
            if not math.isfinite(loss):
                partial = Checkpoint(
                    model.config, dict(model.params), cfg, history, normalization,
                    notes=[f"aborted: non-finite loss at epoch {epoch + 1}"],
                )
                raise NonFiniteLoss(epoch + 1, partial)
            grads = model.backward(cache, dpred)
            for name, g in grads.items():
                if not np.isfinite(g).all():
                    raise NonFiniteGradient(f"non-finite gradient in {name} at epoch {epoch + 1}")
            optimizer.step(model.params, grads)
            epoch_loss += loss * len(idx)
        history["train_loss"].append(epoch_loss / n)

        if val_x is not None and len(val_x):
            val_preds = batched_predict(model, val_x)
            history["val_loss"].append(float(np.abs(val_preds - val_y).mean()))

    if history["train_loss"] and history["train_loss"][-1] > history["train_loss"][0]:
        notes.append("final train loss above first epoch")
        logger.warning("training did not improve: %.6f -> %.6f",
                       history["train_loss"][0], history["train_loss"][-1])

    return Checkpoint(
        config=model.config,
        params={name: p.copy() for name, p in model.params.items()},
        train_config=cfg,
        history=history,
        normalization=normalization,
        notes=notes,
    )


def batched_predict(model: Seq2SeqModel, x: np.ndarray, batch_size: int = 512) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if len(x) == 0:
        return np.zeros((0, model.config.m_fwd))
    chunks = [model.predict(x[i : i + batch_size]) for i in range(0, len(x), batch_size)]
    return np.concatenate(chunks, axis=0)


def predict_dataset(
    checkpoint: Checkpoint, pairs: Sequence[WindowedPair] | np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Predict a windowed dataset; returns (normalized, seconds) matrices."""
    if checkpoint.normalization is None:
        raise MissingNormalization("checkpoint carries no normalization parameters")
    if isinstance(pairs, np.ndarray):
        x = pairs
    else:
        x, _ = pairs_to_arrays(pairs)
    if len(x) == 0:
        empty = np.zeros((0, checkpoint.config.m_fwd))
        return empty, empty.copy()
    model = checkpoint.build_model()
    norm_preds = batched_predict(model, x)
    return norm_preds, checkpoint.normalization.denormalize_durations(norm_preds)
