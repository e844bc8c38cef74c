import json

import numpy as np
import pytest

from cosmic.corpus import CoherenceLabel, Dataset
from cosmic.errors import ModelError, StoreError, TrainingError
from cosmic.features import FeatureSet, synth_store
from cosmic.model import (
    ModelConfig,
    SampleFeatures,
    init_params,
    named_arrays,
    save_checkpoint,
)
from cosmic.train import (
    ADAM_EPS,
    AdamState,
    TrainConfig,
    adam_step,
    backward,
    gradient_check,
    lr_at_epoch,
    mse_loss,
    train,
)
from conftest import feature_set_for, synthetic_dataset, tiny_config


class TestMseLoss:
    def test_zero_at_match(self):
        assert mse_loss([0.5], [0.5]) == 0.0

    def test_unit_difference(self):
        assert mse_loss([0.0], [1.0]) == 1.0

    def test_mean_of_squares(self):
        assert mse_loss([0.0, 1.0], [1.0, 1.0]) == 0.5

    def test_length_mismatch(self):
        with pytest.raises(TrainingError):
            mse_loss([1.0], [1.0, 2.0])

    def test_empty(self):
        with pytest.raises(TrainingError):
            mse_loss([], [])


class TestLrSchedule:
    def test_base_rate(self):
        assert lr_at_epoch(TrainConfig(), 0) == 1e-3

    def test_first_decay(self):
        assert lr_at_epoch(TrainConfig(), 10) == pytest.approx(1e-5)

    def test_second_decay(self):
        assert lr_at_epoch(TrainConfig(), 25) == pytest.approx(1e-7)

    def test_non_increasing(self):
        cfg = TrainConfig()
        rates = [lr_at_epoch(cfg, e) for e in range(40)]
        assert all(a >= b for a, b in zip(rates, rates[1:]))

    def test_negative_epoch(self):
        with pytest.raises(TrainingError):
            lr_at_epoch(TrainConfig(), -1)


def scalar_params():
    """1-d everything so the Adam closed forms are easy to read."""
    config = ModelConfig(image_dim=1, text_dim=1, embed_dim=1, hidden_sizes=(1,))
    return config, init_params(config, seed=0)


class TestAdamStep:
    def test_zero_gradient_leaves_params_unchanged(self):
        config, params = scalar_params()
        before = {k: a.copy() for k, a in named_arrays(params)}
        grads = {k: np.zeros_like(a) for k, a in named_arrays(params)}
        adam_step(params, grads, AdamState.for_params(params), lr=0.1)
        for key, arr in named_arrays(params):
            assert np.array_equal(arr, before[key])

    def test_first_step_magnitude(self):
        # m-hat/sqrt(v-hat) = sign(g) at step 1, so |delta| = lr*|g|/(|g|+eps)
        config, params = scalar_params()
        g = 0.37
        grads = {k: np.zeros_like(a) for k, a in named_arrays(params)}
        grads["b:linear4"] = np.array([g])
        before = params.head.b[0]
        adam_step(params, grads, AdamState.for_params(params), lr=1e-3)
        delta = params.head.b[0] - before
        assert delta == pytest.approx(-1e-3 * g / (g + ADAM_EPS), rel=1e-12)

    def test_two_identical_gradients(self):
        # bias correction keeps m-hat = g and v-hat = g^2, so the second
        # step has the same closed form as the first
        config, params = scalar_params()
        g = -0.8
        grads = {k: np.zeros_like(a) for k, a in named_arrays(params)}
        grads["b:linear4"] = np.array([g])
        state = AdamState.for_params(params)
        adam_step(params, grads, state, lr=1e-3)
        before = params.head.b[0]
        adam_step(params, grads, state, lr=1e-3)
        delta = params.head.b[0] - before
        assert state.step == 2
        assert delta == pytest.approx(-1e-3 * g / (abs(g) + ADAM_EPS), rel=1e-9)


class TestBackward:
    def test_zero_weight_head_bias_gradient(self):
        config = tiny_config()
        params = init_params(config, seed=0)
        for _, arr in named_arrays(params):
            arr[...] = 0.0
        params.head.b[0] = 0.7
        rng = np.random.default_rng(0)
        batch = []
        for target in (0.0, 0.25, 1.0):
            feats = SampleFeatures(
                image_vec=rng.uniform(-1, 1, config.image_dim),
                gen_vec=rng.uniform(-1, 1, config.text_dim),
                ref_vec=rng.uniform(-1, 1, config.text_dim),
                gen_label=CoherenceLabel.META,
                ref_label=CoherenceLabel.STORY,
            )
            batch.append((feats, target))
        grads = backward(params, config, batch)
        targets = np.array([0.0, 0.25, 1.0])
        assert grads["b:linear4"][0] == pytest.approx(2 * np.mean(0.7 - targets), rel=1e-12)
        for key, g in grads.items():
            if key != "b:linear4":
                assert np.all(g == 0.0), key

    def test_perfect_predictions_give_zero_gradients(self):
        config = tiny_config()
        params = init_params(config, seed=0)
        for _, arr in named_arrays(params):
            arr[...] = 0.0
        params.head.b[0] = 0.25
        rng = np.random.default_rng(1)
        feats = SampleFeatures(
            image_vec=rng.uniform(-1, 1, config.image_dim),
            gen_vec=rng.uniform(-1, 1, config.text_dim),
            ref_vec=rng.uniform(-1, 1, config.text_dim),
            gen_label=CoherenceLabel.VISIBLE,
            ref_label=CoherenceLabel.VISIBLE,
        )
        grads = backward(params, config, [(feats, 0.25)])
        assert all(np.all(g == 0.0) for g in grads.values())

    def test_empty_batch(self):
        config = tiny_config()
        with pytest.raises(TrainingError):
            backward(init_params(config, 0), config, [])


class TestGradientCheck:
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_finite_differences(self, seed):
        assert gradient_check(tiny_config(), seed) < 1e-4

    def test_deterministic(self):
        assert gradient_check(tiny_config(), 7) == gradient_check(tiny_config(), 7)

    def test_image_projection_absent_without_image(self):
        config = tiny_config(use_image=False)
        assert gradient_check(config, 0) < 1e-4
        params = init_params(config, seed=0)
        assert "w:linear1" not in dict(named_arrays(params))

    def test_rejects_large_dims(self):
        with pytest.raises(ModelError, match="tiny"):
            gradient_check(ModelConfig(image_dim=64, text_dim=5, embed_dim=4, hidden_sizes=(4,)), 0)


def small_training_setup(n=16, image_dim=32, text_dim=16):
    ds = synthetic_dataset(n=n)
    feats = feature_set_for(ds, image_dim=image_dim, text_dim=text_dim)
    mconfig = ModelConfig(image_dim=image_dim, text_dim=text_dim, embed_dim=16,
                          hidden_sizes=(16, 8))
    return ds, feats, mconfig


class TestTrain:
    def test_overfits_small_fixture(self):
        ds, feats, mconfig = small_training_setup()
        tconfig = TrainConfig(batch_size=10, base_lr=5e-3, decay_every=10_000,
                              max_epochs=200, patience=200, val_tolerance=0.0, seed=42)
        params, history = train(ds, ds, feats, mconfig, tconfig)
        assert min(history.train_loss) < 1e-3
        assert all(np.isfinite(l) for l in history.train_loss + history.val_loss)

    def test_first_epoch_reduces_loss(self):
        ds, feats, mconfig = small_training_setup()
        from cosmic.train import _batch_loss, _resolve

        batch, targets = _resolve(ds, feats, mconfig)
        initial = _batch_loss(init_params(mconfig, 42), mconfig, batch, targets)
        tconfig = TrainConfig(max_epochs=1, seed=42)
        _, history = train(ds, ds, feats, mconfig, tconfig)
        assert history.train_loss[0] < initial

    def test_deterministic_checkpoints(self, tmp_path):
        ds, feats, mconfig = small_training_setup()
        tconfig = TrainConfig(max_epochs=5, seed=11)
        paths = []
        for run in range(2):
            params, _ = train(ds, ds, feats, mconfig, tconfig)
            path = tmp_path / f"run{run}.ckpt"
            save_checkpoint(path, params, mconfig)
            paths.append(path)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_early_stop_after_exactly_patience_epochs(self):
        ds, feats, mconfig = small_training_setup(n=8)
        tconfig = TrainConfig(val_tolerance=1e9, patience=3, max_epochs=50, seed=0)
        _, history = train(ds, ds, feats, mconfig, tconfig)
        assert len(history.train_loss) == 3
        assert history.stop_reason == "early_stop"
        assert history.stopped_epoch == 2

    def test_runs_to_max_epochs_when_val_changes(self):
        ds, feats, mconfig = small_training_setup(n=8)
        tconfig = TrainConfig(val_tolerance=0.0, patience=3, max_epochs=6, seed=0)
        _, history = train(ds, ds, feats, mconfig, tconfig)
        assert history.stop_reason == "max_epochs"
        assert len(history.train_loss) == 6

    def test_returns_best_validation_params(self, tmp_path):
        ds, feats, mconfig = small_training_setup()
        train_ds, val_ds = Dataset(ds.samples[:12], "t"), Dataset(ds.samples[12:], "v")
        tconfig = TrainConfig(max_epochs=30, patience=30, val_tolerance=0.0, seed=3)
        params, history = train(train_ds, val_ds, feats, mconfig, tconfig)
        from cosmic.train import _batch_loss, _resolve

        val_batch, val_targets = _resolve(val_ds, feats, mconfig)
        returned_loss = _batch_loss(params, mconfig, val_batch, val_targets)
        assert returned_loss == pytest.approx(min(history.val_loss), rel=1e-12)

    def test_unresolvable_key_names_key(self):
        ds = synthetic_dataset(n=4)
        # caption store missing entirely
        images = synth_store([f"img:im{i:02d}" for i in range(4)], 8, seed=0)
        mconfig = ModelConfig(image_dim=8, text_dim=8, embed_dim=4, hidden_sizes=(4,))
        with pytest.raises(StoreError, match="txt:"):
            train(ds, ds, FeatureSet(images), mconfig, TrainConfig(max_epochs=1, seed=0))

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_non_finite_loss_is_fatal(self):
        ds, feats, mconfig = small_training_setup(n=8)
        tconfig = TrainConfig(base_lr=1e150, max_epochs=5, seed=0)
        with pytest.raises(TrainingError, match="non-finite"):
            train(ds, ds, feats, mconfig, tconfig)

    def test_empty_sets_rejected(self):
        ds, feats, mconfig = small_training_setup(n=4)
        with pytest.raises(TrainingError):
            train(Dataset([]), ds, feats, mconfig, TrainConfig(seed=0))

    def test_history_jsonl(self, tmp_path):
        ds, feats, mconfig = small_training_setup(n=8)
        _, history = train(ds, ds, feats, mconfig, TrainConfig(max_epochs=3, patience=10, seed=0))
        path = tmp_path / "history.jsonl"
        history.write_jsonl(path)
        rows = [json.loads(line) for line in path.read_text().splitlines()]
        assert [r["epoch"] for r in rows] == [0, 1, 2]
        assert set(rows[0]) == {"epoch", "train_loss", "val_loss", "lr"}
        assert rows[0]["lr"] == 1e-3


class TestTrainConfigValidation:
    @pytest.mark.parametrize(
        "kw",
        [dict(batch_size=0), dict(base_lr=0.0), dict(decay_factor=0.0),
         dict(decay_every=0), dict(max_epochs=0), dict(patience=0), dict(val_tolerance=-1e-9)],
    )
    def test_rejects_non_positive(self, kw):
        with pytest.raises(TrainingError):
            TrainConfig(**kw)
