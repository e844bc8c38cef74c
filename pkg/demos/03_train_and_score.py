#!/usr/bin/env python3
"""Training the learned metric end to end on synthetic data.

The model projects an image vector, two caption vectors (shared weights),
and two coherence one-hots to a common width, concatenates them, and pushes
the result through a shrinking ReLU stack to a scalar score. Here we train
it to memorize 16 synthetic samples and watch the loss collapse.
"""

import random

from cosmic import (
    CaptionRecord,
    CoherenceLabel,
    Dataset,
    FeatureSet,
    ModelConfig,
    RatedSample,
    TrainConfig,
    image_feature_key,
    param_count,
    synth_store,
    text_key,
    train,
)
from cosmic.corpus import LABELS
from cosmic.model import sample_features, score_sample

# At full size the model matches its published parameter budget.
print("full model parameters:", f"{param_count(ModelConfig()):,}")

# A scaled-down config keeps this demo instant.
config = ModelConfig(image_dim=64, text_dim=32, embed_dim=32, hidden_sizes=(32, 16, 8))
print("demo model parameters:", f"{param_count(config):,}")

rng = random.Random(0)
samples = []
for i in range(16):
    samples.append(RatedSample(
        image_key=f"photo-{i:02d}",
        generated=CaptionRecord(f"generated caption number {i}", LABELS[i % 4]),
        reference=CaptionRecord(f"reference caption number {i}", CoherenceLabel.VISIBLE),
        rating=rng.randint(1, 5),
    ))
ds = Dataset(samples, name="demo")

feats = FeatureSet(
    synth_store([image_feature_key(s.image_key) for s in samples], config.image_dim, seed=1),
    synth_store(sorted({text_key(s.generated.text) for s in samples}
                       | {text_key(s.reference.text) for s in samples}),
                config.text_dim, seed=2),
)

tconfig = TrainConfig(batch_size=10, base_lr=5e-3, decay_every=10_000,
                      max_epochs=120, patience=200, val_tolerance=0.0, seed=42)
params, history = train(ds, ds, feats, config, tconfig)

print("\nepoch  train_loss    val_loss      lr")
for e in range(0, len(history.train_loss), 20):
    print(f"{e:5d}  {history.train_loss[e]:.8f}  {history.val_loss[e]:.8f}  {history.lr[e]:.0e}")
print(f"final  {history.train_loss[-1]:.8f}  ({history.stop_reason})")

print("\npredicted vs target on the training data:")
for s in samples[:5]:
    score = score_sample(params, config, sample_features(feats, config, s))
    print(f"  {s.image_key}: {score:+.4f}  target {s.target:.2f}")
