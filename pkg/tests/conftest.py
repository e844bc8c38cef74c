import random

import pytest

from cosmic.corpus import LABELS, CaptionRecord, CoherenceLabel, Dataset, RatedSample
from cosmic.features import FeatureSet, image_feature_key, synth_store, text_key
from cosmic.model import ModelConfig


def make_sample(image_key, gen_text, gen_label, ref_text, ref_label, rating, **kw):
    return RatedSample(
        image_key=image_key,
        generated=CaptionRecord(gen_text, gen_label),
        reference=CaptionRecord(ref_text, ref_label),
        rating=rating,
        **kw,
    )


def synthetic_dataset(n=16, seed=123, name="synthetic"):
    """n samples with distinct captions, labels cycling through the four
    classes, ratings from a fixed random assignment."""
    rng = random.Random(seed)
    samples = []
    for i in range(n):
        samples.append(
            make_sample(
                image_key=f"im{i:02d}",
                gen_text=f"synthetic generated caption {i:02d}",
                gen_label=LABELS[i % len(LABELS)],
                ref_text=f"synthetic reference caption {i:02d}",
                ref_label=CoherenceLabel.VISIBLE,
                rating=rng.randint(1, 5),
            )
        )
    return Dataset(samples=samples, name=name)


def feature_set_for(ds, image_dim, text_dim, seed=7):
    img_keys = sorted({image_feature_key(s.image_key) for s in ds.samples})
    txt_keys = sorted(
        {text_key(s.generated.text) for s in ds.samples}
        | {text_key(s.reference.text) for s in ds.samples}
    )
    return FeatureSet(
        synth_store(img_keys, image_dim, seed),
        synth_store(txt_keys, text_dim, seed + 1),
    )


TINY_DIMS = dict(image_dim=6, text_dim=5, embed_dim=4, hidden_sizes=(4, 3))


def tiny_config(use_image=True, use_coherence=True):
    return ModelConfig(use_image=use_image, use_coherence=use_coherence, **TINY_DIMS)


@pytest.fixture
def overfit_dataset():
    return synthetic_dataset(n=16, seed=123, name="overfit16")
