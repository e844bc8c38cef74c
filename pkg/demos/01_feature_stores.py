#!/usr/bin/env python3
"""Feature stores: the binary container every other piece builds on.

Image vectors live under "img:<image_key>", caption vectors under a content
key derived from the exact caption text. Stores round-trip bit-exactly and
serialize canonically, and the synthetic generator lets everything else run
without a neural encoder.
"""

import io

import numpy as np

from cosmic import features

# A store holds fixed-width float32 vectors keyed by string.
store = features.FeatureStore(dim=4)
store.add("img:garden-photo", [0.25, -1.5, 3.0, 0.125])
store.add(features.text_key("a pink flower bush"), np.arange(4, dtype=np.float32))

print("caption key for 'a pink flower bush':", features.text_key("a pink flower bush"))
print("vector:", features.get_vector(store, "img:garden-photo"))

# Serialization is canonical: key order is fixed, so equal stores produce
# byte-identical files.
buf = io.BytesIO()
n_bytes = features.write_store(store, buf)
print(f"\nserialized {len(store)} records in {n_bytes} bytes")

loaded = features.read_store(io.BytesIO(buf.getvalue()))
print("round-trip equal:",
      all(np.array_equal(store.entries[k], loaded.entries[k]) for k in store.entries))

# Synthetic stores: each vector is a pure function of (key, dim, seed),
# reproducible across platforms and key orderings.
a = features.synth_store(["img:a", "img:b"], dim=6, seed=7)
b = features.synth_store(["img:b", "img:a"], dim=6, seed=7)
print("\nsynthetic vector for img:a:", np.round(a.entries["img:a"], 4))
print("order-independent:", np.array_equal(a.entries["img:a"], b.entries["img:a"]))

# Image features (2048-d) and caption features (1024-d) have different
# widths, so they live in separate stores; a FeatureSet unifies lookup.
images = features.synth_store(["img:a"], dim=2048, seed=1)
texts = features.synth_store([features.text_key("a caption")], dim=1024, seed=2)
both = features.FeatureSet(images, texts)
print("\nimage dim:", both.vector("img:a").shape, "caption dim:",
      both.vector(features.text_key("a caption")).shape)
