"""Mean-squared-error training of the metric head: exact reverse-mode
gradients, Adam with step-decayed learning rate, early stopping on a stalled
validation loss, and a finite-difference gradient checker.

Everything runs in float64 and is deterministic for a fixed seed: feature
vectors are upcast from the store, batch order comes from a per-(seed,
epoch) PRNG, and the last partial batch is trained rather than dropped.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .corpus import LABELS, Dataset
from .errors import ModelError, TrainingError
from .model import (
    FeatureBatch,
    ModelConfig,
    ModelParams,
    SampleFeatures,
    copy_params,
    forward_batch,
    init_params,
    named_arrays,
    sample_features,
)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

_MASK64 = 0xFFFFFFFFFFFFFFFF


@dataclass
class TrainConfig:
    batch_size: int = 10
    base_lr: float = 1e-3
    decay_factor: float = 1e-2
    decay_every: int = 10
    max_epochs: int = 100
    patience: int = 3
    val_tolerance: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.decay_every < 1 or self.max_epochs < 1:
            raise TrainingError("batch_size, decay_every and max_epochs must be positive")
        if self.base_lr <= 0 or self.decay_factor <= 0:
            raise TrainingError("base_lr and decay_factor must be positive")
        if self.patience < 1:
            raise TrainingError("patience must be >= 1")
        if self.val_tolerance < 0:
            raise TrainingError("val_tolerance must be nonnegative")


@dataclass
class AdamState:
    step: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        return cls(
            step=0,
            m={k: np.zeros_like(a) for k, a in named_arrays(params)},
            v={k: np.zeros_like(a) for k, a in named_arrays(params)},
        )


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    stopped_epoch: int = -1
    stop_reason: str = ""

    def jsonl_lines(self) -> Iterator[str]:
        for epoch, (tl, vl, lr) in enumerate(zip(self.train_loss, self.val_loss, self.lr)):
            yield json.dumps({"epoch": epoch, "train_loss": tl, "val_loss": vl, "lr": lr})

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for line in self.jsonl_lines():
                f.write(line + "\n")


def mse_loss(predictions: Sequence[float], targets: Sequence[float]) -> float:
    """Mean of squared differences."""
    preds = np.asarray(predictions, dtype=np.float64)
    targs = np.asarray(targets, dtype=np.float64)
    if preds.shape != targs.shape:
        raise TrainingError(f"length mismatch: {preds.shape} vs {targs.shape}")
    if preds.size == 0:
        raise TrainingError("empty prediction list")
    return float(np.mean((preds - targs) ** 2))


def _batch_loss(params: ModelParams, config: ModelConfig, batch: FeatureBatch, targets) -> float:
    scores = forward_batch(params, config, batch).scores
    return float(np.mean((scores - targets) ** 2))


def _loss_and_grads(params: ModelParams, config: ModelConfig, batch: FeatureBatch, targets):
    """Batch MSE and its exact gradients, keyed like named_arrays."""
    cache = forward_batch(params, config, batch)
    n = len(batch)
    diff = cache.scores - targets
    loss = float(np.mean(diff**2))
    d_scores = 2.0 * diff / n  # dL/ds per sample

    grads: dict[str, np.ndarray] = {}
    grads["w:linear4"] = (d_scores[:, None] * cache.posts[-1]).sum(axis=0)[None, :]
    grads["b:linear4"] = np.array([d_scores.sum()])
    d_hidden = np.outer(d_scores, params.head.w[0])
    for i in reversed(range(len(params.mlp))):
        # ReLU subgradient at 0 is 0.
        d_pre = d_hidden * (cache.pres[i] > 0.0)
        layer_in = cache.posts[i - 1] if i > 0 else cache.concat
        grads[f"w:mlp{i}"] = d_pre.T @ layer_in
        grads[f"b:mlp{i}"] = d_pre.sum(axis=0)
        d_hidden = d_pre @ params.mlp[i].w
    d_concat = d_hidden

    width = config.embed_dim
    pos = 0
    if config.use_image:
        d_slot = d_concat[:, pos : pos + width]
        grads["w:linear1"] = d_slot.T @ batch.image
        grads["b:linear1"] = d_slot.sum(axis=0)
        pos += width
    d_gen = d_concat[:, pos : pos + width]
    d_ref = d_concat[:, pos + width : pos + 2 * width]
    grads["w:linear2"] = d_gen.T @ batch.gen + d_ref.T @ batch.ref
    grads["b:linear2"] = (d_gen + d_ref).sum(axis=0)
    pos += 2 * width
    if config.use_coherence:
        d_gc = d_concat[:, pos : pos + width]
        d_rc = d_concat[:, pos + width : pos + 2 * width]
        grads["w:linear3"] = d_gc.T @ batch.gen_onehot + d_rc.T @ batch.ref_onehot
        grads["b:linear3"] = (d_gc + d_rc).sum(axis=0)
    return loss, grads


def backward(
    params: ModelParams,
    config: ModelConfig,
    batch: Sequence[tuple[SampleFeatures, float]],
) -> dict[str, np.ndarray]:
    """Exact gradients of batch MSE w.r.t. every parameter."""
    if not batch:
        raise TrainingError("empty batch")
    feats = FeatureBatch.from_samples([s for s, _ in batch], config)
    targets = np.array([t for _, t in batch], dtype=np.float64)
    _, grads = _loss_and_grads(params, config, feats, targets)
    return grads


def adam_step(
    params: ModelParams,
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> tuple[ModelParams, AdamState]:
    """One Adam update (beta1=0.9, beta2=0.999, eps=1e-8); parameters are
    updated in place and returned with the advanced state."""
    state.step += 1
    t = state.step
    bias1 = 1.0 - ADAM_BETA1**t
    bias2 = 1.0 - ADAM_BETA2**t
    for key, arr in named_arrays(params):
        g = grads[key]
        if g.shape != arr.shape:
            raise TrainingError(f"gradient shape mismatch for {key!r}")
        m = state.m[key]
        v = state.v[key]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        arr -= lr * (m / bias1) / (np.sqrt(v / bias2) + ADAM_EPS)
    return params, state


def lr_at_epoch(cfg: TrainConfig, epoch: int) -> float:
    """base_lr * decay_factor^(epoch // decay_every); non-increasing."""
    if epoch < 0:
        raise TrainingError(f"epoch must be >= 0, got {epoch}")
    return cfg.base_lr * cfg.decay_factor ** (epoch // cfg.decay_every)


def _resolve(ds: Dataset, store, config: ModelConfig):
    samples = [sample_features(store, config, s) for s in ds.samples]
    batch = FeatureBatch.from_samples(samples, config)
    targets = np.array([s.target for s in ds.samples], dtype=np.float64)
    return batch, targets


def train(
    ds_train: Dataset,
    ds_val: Dataset,
    store,
    mconfig: ModelConfig,
    tconfig: TrainConfig,
) -> tuple[ModelParams, TrainHistory]:
    """Full training loop; returns the best-validation parameters.

    Per epoch: a deterministic shuffle keyed by (seed, epoch), fixed-size
    batches with the last partial batch kept, one Adam step per batch at
    lr_at_epoch. Training stops early once the validation loss has stayed
    within val_tolerance of the best value for ``patience`` consecutive
    epochs (the first epoch establishes the baseline and counts).
    """
    if not ds_train.samples or not ds_val.samples:
        raise TrainingError("train and validation sets must be nonempty")
    train_batch, train_targets = _resolve(ds_train, store, mconfig)
    val_batch, val_targets = _resolve(ds_val, store, mconfig)
    n = len(ds_train.samples)

    params = init_params(mconfig, tconfig.seed)
    state = AdamState.for_params(params)
    history = TrainHistory()
    best_val = None
    best_params = copy_params(params)
    stall = 0

    for epoch in range(tconfig.max_epochs):
        lr = lr_at_epoch(tconfig, epoch)
        order = np.random.default_rng([tconfig.seed & _MASK64, epoch]).permutation(n)
        sq_err_total = 0.0
        for batch_index, start in enumerate(range(0, n, tconfig.batch_size)):
            idx = order[start : start + tconfig.batch_size]
            loss, grads = _loss_and_grads(
                params, mconfig, train_batch.take(idx), train_targets[idx]
            )
            if not math.isfinite(loss):
                raise TrainingError(
                    f"non-finite training loss at epoch {epoch}, batch {batch_index}"
                )
            adam_step(params, grads, state, lr)
            sq_err_total += loss * len(idx)
        train_loss = sq_err_total / n
        val_loss = _batch_loss(params, mconfig, val_batch, val_targets)
        if not math.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        history.lr.append(lr)

        changed = best_val is not None and abs(val_loss - best_val) > tconfig.val_tolerance
        if best_val is None or val_loss < best_val:
            best_val = val_loss
            best_params = copy_params(params)
        stall = 0 if changed else stall + 1
        if stall >= tconfig.patience:
            history.stopped_epoch = epoch
            history.stop_reason = "early_stop"
            return best_params, history

    history.stopped_epoch = tconfig.max_epochs - 1
    history.stop_reason = "max_epochs"
    return best_params, history


def gradient_check(config: ModelConfig, seed: int, batch_size: int = 4, step: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients
    on a random batch; requires tiny dims so every parameter is visited."""
    if max(config.image_dim, config.text_dim, config.embed_dim, *config.hidden_sizes) > 8:
        raise ModelError("gradient_check needs tiny dims (<= 8)")
    rng = np.random.default_rng(seed & _MASK64)
    samples = []
    for _ in range(batch_size):
        samples.append(
            SampleFeatures(
                image_vec=rng.uniform(-1, 1, config.image_dim) if config.use_image else None,
                gen_vec=rng.uniform(-1, 1, config.text_dim),
                ref_vec=rng.uniform(-1, 1, config.text_dim),
                gen_label=LABELS[rng.integers(len(LABELS))],
                ref_label=LABELS[rng.integers(len(LABELS))],
            )
        )
    batch = FeatureBatch.from_samples(samples, config)
    targets = rng.uniform(0, 1, batch_size)
    # Fully random parameters, biases included: zero biases can park a
    # pre-activation exactly on the ReLU kink, where central differences
    # disagree with any one-sided subgradient.
    params = init_params(config, seed)
    for _, arr in named_arrays(params):
        arr[...] = rng.uniform(-0.5, 0.5, arr.shape)
    _, analytic = _loss_and_grads(params, config, batch, targets)

    worst = 0.0
    for key, arr in named_arrays(params):
        flat = arr.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + step
            up = _batch_loss(params, config, batch, targets)
            flat[i] = saved - step
            down = _batch_loss(params, config, batch, targets)
            flat[i] = saved
            numeric = (up - down) / (2 * step)
            got = analytic[key].reshape(-1)[i]
            err = abs(got - numeric) / max(abs(got), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
