"""The three forecaster architectures behind one forward/backward interface.

Inputs are (batch, n_back, 5) feature windows in [-1, 1]; outputs are
(batch, m_fwd) duration predictions squashed through tanh, so they stay
strictly inside (-1, 1). Recurrent models read out from the last hidden
state; the attention model mean-pools its encoder output into an MLP head.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ShapeMismatch
from . import layers as L
from . import recurrent as R

ARCHITECTURES = ("gru", "lstm", "transformer")


@dataclass(frozen=True)
class RnnSettings:
    nodes_per_layer: int = 100
    layers: int = 4
    dropout: float = 0.2


@dataclass(frozen=True)
class TransformerSettings:
    heads: int = 2
    head_size: int = 256
    ff_dim: int = 1024
    blocks: int = 4
    mlp_units: int = 1024
    dropout: float = 0.1

    @property
    def model_dim(self) -> int:
        return self.heads * self.head_size


@dataclass(frozen=True)
class ModelConfig:
    arch: str
    n_back: int
    m_fwd: int
    rnn: RnnSettings = RnnSettings()
    transformer: TransformerSettings = TransformerSettings()
    seed: int = 0
    n_features: int = 5

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"arch must be one of {ARCHITECTURES}, got {self.arch!r}")
        if min(self.n_back, self.m_fwd, self.n_features) < 1:
            raise ValueError("n_back, m_fwd and n_features must be positive")
        for value, name in (
            (self.rnn.nodes_per_layer, "nodes_per_layer"),
            (self.rnn.layers, "layers"),
            (self.transformer.heads, "heads"),
            (self.transformer.head_size, "head_size"),
            (self.transformer.ff_dim, "ff_dim"),
            (self.transformer.blocks, "blocks"),
            (self.transformer.mlp_units, "mlp_units"),
        ):
            if value < 1:
                raise ValueError(f"{name} must be positive, got {value}")
        for rate in (self.rnn.dropout, self.transformer.dropout):
            if not 0.0 <= rate < 1.0:
                raise ValueError(f"dropout must be in [0, 1), got {rate}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["rnn"] = RnnSettings(**d["rnn"])
        d["transformer"] = TransformerSettings(**d["transformer"])
        return cls(**d)


class Seq2SeqModel:
    """Common parameter handling, shape checks and the tanh readout."""

    def __init__(self, config: ModelConfig):
        self.config = config
        self.params: dict[str, np.ndarray] = {}
        self._init_params(np.random.default_rng(np.random.SeedSequence(config.seed)))

    def _init_params(self, rng: np.random.Generator) -> None:
        raise NotImplementedError

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            x = x[None, :, :]
        if x.ndim != 3 or x.shape[1] != self.config.n_back or x.shape[2] != self.config.n_features:
            raise ShapeMismatch(
                f"expected (batch, {self.config.n_back}, {self.config.n_features}), got {x.shape}"
            )
        return x

    def forward(self, x: np.ndarray, train: bool = False, rng: np.random.Generator | None = None):
        raise NotImplementedError

    def backward(self, cache, dout: np.ndarray) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Deterministic inference (dropout off)."""
        out, _ = self.forward(self._check_input(x), train=False)
        return out

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(p) for name, p in self.params.items()}

    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())


class _RecurrentModel(Seq2SeqModel):
    cell = ""  # "gru" | "lstm"

    def _layer_input_dim(self, layer: int) -> int:
        return self.config.n_features if layer == 0 else self.config.rnn.nodes_per_layer

    def _init_params(self, rng: np.random.Generator) -> None:
        cfg = self.config.rnn
        init = R.init_gru_layer if self.cell == "gru" else R.init_lstm_layer
        for layer in range(cfg.layers):
            init(rng, self.params, f"{self.cell}{layer}", self._layer_input_dim(layer), cfg.nodes_per_layer)
        self.params["head.w"] = L.glorot_uniform(rng, (cfg.nodes_per_layer, self.config.m_fwd))
        self.params["head.b"] = np.zeros(self.config.m_fwd)

    def forward(self, x, train=False, rng=None):
        x = self._check_input(x)
        cfg = self.config.rnn
        layer_fwd = R.gru_layer_forward if self.cell == "gru" else R.lstm_layer_forward
        seq = x
        layer_caches = []
        drop_masks = []
        for layer in range(cfg.layers):
            seq, caches = layer_fwd(seq, self.params, f"{self.cell}{layer}", cfg.nodes_per_layer)
            layer_caches.append(caches)
            if layer < cfg.layers - 1:
                seq, mask = L.dropout_forward(seq, cfg.dropout, train, rng)
                drop_masks.append(mask)
        last = seq[:, -1, :]
        z, head_cache = L.dense_forward(last, self.params["head.w"], self.params["head.b"])
        out, tanh_cache = L.tanh_forward(z)
        return out, (layer_caches, drop_masks, seq.shape, head_cache, tanh_cache)

    def backward(self, cache, dout):
        layer_caches, drop_masks, seq_shape, head_cache, tanh_cache = cache
        cfg = self.config.rnn
        grads = self.zero_grads()
        dz = L.tanh_backward(dout, tanh_cache)
        dlast, dw, db = L.dense_backward(dz, head_cache)
        grads["head.w"] += dw
        grads["head.b"] += db
        dseq = np.zeros(seq_shape)
        dseq[:, -1, :] = dlast
        layer_bwd = R.gru_layer_backward if self.cell == "gru" else R.lstm_layer_backward
        for layer in range(cfg.layers - 1, -1, -1):
            if layer < cfg.layers - 1:
                dseq = L.dropout_backward(dseq, drop_masks[layer])
            dseq = layer_bwd(dseq, layer_caches[layer], self.params, grads, f"{self.cell}{layer}")
        return grads


class GruModel(_RecurrentModel):
    cell = "gru"


class LstmModel(_RecurrentModel):
    cell = "lstm"


class TransformerModel(Seq2SeqModel):
    """Attention encoder with sinusoidal positions and an MLP pooling head."""

    def _init_params(self, rng: np.random.Generator) -> None:
        cfg = self.config.transformer
        d = cfg.model_dim
        self.params["embed.w"] = L.glorot_uniform(rng, (self.config.n_features, d))
        self.params["embed.b"] = np.zeros(d)
        for block in range(cfg.blocks):
            L.init_transformer_block(rng, self.params, f"block{block}", d, cfg.ff_dim)
        self.params["final_ln.g"] = np.ones(d)
        self.params["final_ln.b"] = np.zeros(d)
        self.params["mlp.w1"] = L.glorot_uniform(rng, (d, cfg.mlp_units))
        self.params["mlp.b1"] = np.zeros(cfg.mlp_units)
        self.params["mlp.w2"] = L.glorot_uniform(rng, (cfg.mlp_units, self.config.m_fwd))
        self.params["mlp.b2"] = np.zeros(self.config.m_fwd)
        self._positions = L.sinusoidal_positions(self.config.n_back, d)

    def forward(self, x, train=False, rng=None):
        x = self._check_input(x)
        cfg = self.config.transformer
        embedded, embed_cache = L.dense_forward(x, self.params["embed.w"], self.params["embed.b"])
        seq = embedded + self._positions[None, :, :]
        block_caches = []
        for block in range(cfg.blocks):
            seq, cache = L.transformer_block_forward(
                seq, self.params, f"block{block}", cfg.heads,
                dropout=cfg.dropout, train=train, rng=rng,
            )
            block_caches.append(cache)
        normed, ln_cache = L.layernorm_forward(
            seq, self.params["final_ln.g"], self.params["final_ln.b"]
        )
        pooled = normed.mean(axis=1)
        hidden, mlp1_cache = L.dense_forward(pooled, self.params["mlp.w1"], self.params["mlp.b1"])
        hidden, relu_mask = L.relu_forward(hidden)
        hidden, drop_mask = L.dropout_forward(hidden, cfg.dropout, train, rng)
        z, mlp2_cache = L.dense_forward(hidden, self.params["mlp.w2"], self.params["mlp.b2"])
        out, tanh_cache = L.tanh_forward(z)
        cache = (
            embed_cache, block_caches, ln_cache, seq.shape,
            mlp1_cache, relu_mask, drop_mask, mlp2_cache, tanh_cache,
        )
        return out, cache

    def backward(self, cache, dout):
        (embed_cache, block_caches, ln_cache, seq_shape,
         mlp1_cache, relu_mask, drop_mask, mlp2_cache, tanh_cache) = cache
        cfg = self.config.transformer
        grads = self.zero_grads()

        dz = L.tanh_backward(dout, tanh_cache)
        dhidden, dw2, db2 = L.dense_backward(dz, mlp2_cache)
        grads["mlp.w2"] += dw2
        grads["mlp.b2"] += db2
        dhidden = L.dropout_backward(dhidden, drop_mask)
        dhidden = L.relu_backward(dhidden, relu_mask)
        dpooled, dw1, db1 = L.dense_backward(dhidden, mlp1_cache)
        grads["mlp.w1"] += dw1
        grads["mlp.b1"] += db1

        steps = seq_shape[1]
        dnormed = np.repeat(dpooled[:, None, :], steps, axis=1) / steps
        dseq, dg, db = L.layernorm_backward(dnormed, ln_cache)
        grads["final_ln.g"] += dg
        grads["final_ln.b"] += db

        for block in range(cfg.blocks - 1, -1, -1):
            dseq = L.transformer_block_backward(
                dseq, block_caches[block], self.params, grads, f"block{block}"
            )
        dembedded = dseq  # positional table is constant
        _, dw, db = L.dense_backward(dembedded, embed_cache)
        grads["embed.w"] += dw
        grads["embed.b"] += db
        return grads

    def attention_weights(self, x: np.ndarray) -> list[np.ndarray]:
        """Per-block attention matrices for a batch, inference mode."""
        _, cache = self.forward(self._check_input(x), train=False)
        return [L.attention_weights_from_cache(bc) for bc in cache[1]]


def build_model(config: ModelConfig) -> Seq2SeqModel:
    cls = {"gru": GruModel, "lstm": LstmModel, "transformer": TransformerModel}[config.arch]
    return cls(config)
