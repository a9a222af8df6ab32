import numpy as np
import pytest

from knockon.errors import MissingNormalization, NonFiniteLoss
from knockon.pipeline import NormalizationParams
from knockon.seq2seq import (
    ModelConfig,
    RnnSettings,
    TrainConfig,
    TransformerSettings,
    build_model,
    load_checkpoint,
    predict_dataset,
    train,
)

TINY_RNN = RnnSettings(nodes_per_layer=12, layers=2, dropout=0.0)
TINY_TF = TransformerSettings(heads=2, head_size=6, ff_dim=24, blocks=1, mlp_units=24, dropout=0.0)
WIDE_RNN = RnnSettings(nodes_per_layer=24, layers=2, dropout=0.0)
WIDE_TF = TransformerSettings(heads=2, head_size=8, ff_dim=48, blocks=1, mlp_units=48, dropout=0.0)


def _toy_config(arch: str, seed: int = 0) -> ModelConfig:
    return ModelConfig(arch, 5, 2, rnn=TINY_RNN, transformer=TINY_TF, seed=seed)


def _toy_data(n=64, seed=0, constant_target=None):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=(n, 5, 5))
    if constant_target is not None:
        y = np.full((n, 2), constant_target)
    else:
        y = rng.uniform(-0.7, 0.7, size=(n, 2))
    return x, y


def test_constant_target_is_learned_within_50_epochs():
    # MAE + Adam settles to a noise floor proportional to the step size, so a
    # sub-1e-3 fit in 50 epochs needs a small rate and many small batches.
    rng = np.random.default_rng(0)
    x = rng.uniform(-0.05, 0.05, size=(128, 5, 5))
    y = np.full((128, 2), 0.25)
    model = build_model(_toy_config("gru"))
    ckpt = train(
        model, x, y,
        TrainConfig(epochs=50, batch_size=4, learning_rate=5e-4, seed=0, val_fraction=0.0),
    )
    assert ckpt.history["train_loss"][-1] < 1e-3


def test_zero_learning_rate_changes_nothing():
    x, y = _toy_data()
    model = build_model(_toy_config("lstm"))
    before = {name: p.copy() for name, p in model.params.items()}
    ckpt = train(
        model, x, y,
        TrainConfig(epochs=5, batch_size=16, learning_rate=0.0, seed=0, val_fraction=0.0),
    )
    for name, p in model.params.items():
        assert np.array_equal(p, before[name])
    losses = ckpt.history["train_loss"]
    assert max(losses) - min(losses) < 1e-12


@pytest.mark.parametrize("arch", ["gru", "lstm", "transformer"])
def test_seeded_training_produces_byte_identical_checkpoints(arch, tmp_path):
    for run in ("a", "b"):
        x, y = _toy_data(n=48, seed=3)
        model = build_model(_toy_config(arch, seed=9))
        ckpt = train(model, x, y, TrainConfig(epochs=3, batch_size=16, seed=9))
        ckpt.save(tmp_path / f"{run}.ckpt")
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()


@pytest.mark.parametrize("arch", ["gru", "lstm", "transformer"])
def test_each_architecture_memorizes_64_pairs(arch):
    x, y = _toy_data(n=64, seed=1)
    cfg = ModelConfig(arch, 5, 2, rnn=WIDE_RNN, transformer=WIDE_TF, seed=2)
    model = build_model(cfg)
    ckpt = train(
        model, x, y,
        TrainConfig(epochs=200, batch_size=16, learning_rate=3e-3, seed=2, val_fraction=0.0),
    )
    assert ckpt.history["train_loss"][-1] < 0.05


def test_non_finite_loss_aborts_with_diagnostic_checkpoint():
    # tanh networks saturate instead of overflowing, so divergence in practice
    # means corrupt data reaching the loss
    x, y = _toy_data(n=32)
    y[7, 1] = np.nan
    model = build_model(_toy_config("gru"))
    with pytest.raises(NonFiniteLoss) as exc:
        train(model, x, y, TrainConfig(epochs=2, batch_size=32, seed=0, val_fraction=0.0))
    assert exc.value.checkpoint is not None
    assert exc.value.epoch >= 1


def test_history_has_one_entry_per_epoch_and_val_curve():
    x, y = _toy_data(n=50)
    model = build_model(_toy_config("gru"))
    ckpt = train(model, x, y, TrainConfig(epochs=4, batch_size=16, seed=0, val_fraction=0.1))
    assert len(ckpt.history["train_loss"]) == 4
    assert len(ckpt.history["val_loss"]) == 4


def test_empty_training_set_rejected():
    model = build_model(_toy_config("gru"))
    with pytest.raises(ValueError):
        train(model, np.zeros((0, 5, 5)), np.zeros((0, 2)), TrainConfig(epochs=1))


def test_checkpoint_round_trip(tmp_path):
    x, y = _toy_data(n=32)
    model = build_model(_toy_config("transformer", seed=4))
    norm = NormalizationParams(np.zeros(5), np.full(5, 10.0))
    ckpt = train(model, x, y, TrainConfig(epochs=2, batch_size=16, seed=4), normalization=norm)
    ckpt.save(tmp_path / "model.ckpt")
    loaded = load_checkpoint(tmp_path / "model.ckpt")
    assert loaded.config == ckpt.config
    assert loaded.train_config == ckpt.train_config
    assert loaded.history == ckpt.history
    assert set(loaded.params) == set(ckpt.params)
    for name in ckpt.params:
        assert np.array_equal(loaded.params[name], ckpt.params[name])
    assert loaded.normalization.mins == pytest.approx(norm.mins)


def test_predict_dataset_denormalizes_to_seconds():
    x, y = _toy_data(n=16)
    model = build_model(_toy_config("gru"))
    norm = NormalizationParams(np.zeros(5), np.full(5, 10.0))
    ckpt = train(model, x, y, TrainConfig(epochs=1, batch_size=16, seed=0), normalization=norm)
    norm_preds, seconds = predict_dataset(ckpt, x)
    # normalized 0.0 with (min 0, max 10) denormalizes to 5.0 s
    assert norm.denormalize_durations(np.array([0.0]))[0] == 5.0
    assert seconds == pytest.approx((norm_preds + 1.0) * 5.0)


def test_predict_dataset_requires_normalization():
    x, y = _toy_data(n=8)
    model = build_model(_toy_config("gru"))
    ckpt = train(model, x, y, TrainConfig(epochs=1, batch_size=8, seed=0))
    with pytest.raises(MissingNormalization):
        predict_dataset(ckpt, x)


def test_predict_dataset_empty_input():
    x, y = _toy_data(n=8)
    model = build_model(_toy_config("gru"))
    norm = NormalizationParams(np.zeros(5), np.full(5, 10.0))
    ckpt = train(model, x, y, TrainConfig(epochs=1, batch_size=8, seed=0), normalization=norm)
    norm_preds, seconds = predict_dataset(ckpt, [])
    assert norm_preds.shape == (0, 2) and seconds.shape == (0, 2)


def test_training_warning_note_when_loss_worsens():
    x, y = _toy_data(n=32)
    model = build_model(_toy_config("gru"))
    # an absurd learning rate (but finite arithmetic) thrashes the loss
    ckpt = train(
        model, x, y,
        TrainConfig(epochs=2, batch_size=32, learning_rate=5.0, seed=0, val_fraction=0.0),
    )
    final, first = ckpt.history["train_loss"][-1], ckpt.history["train_loss"][0]
    if final > first:
        assert any("final train loss" in note for note in ckpt.notes)
