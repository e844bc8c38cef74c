#!/usr/bin/env python3
"""Removing coherence-class rating bias with zero-scored negatives.

Raters tend to like literal (Visible) captions more than Subjective ones,
so the raw class means differ and a metric trained on them inherits the
bias. Appending mismatched image/caption pairs with target 0 pulls every
class mean down to the smallest one.
"""

from cosmic import CaptionRecord, CoherenceLabel, Dataset, RatedSample, augment, class_means, plan_augmentation
from cosmic.corpus import LABELS

# Build a dataset whose class means are deliberately skewed.
ratings_per_class = {
    CoherenceLabel.VISIBLE: [5, 5, 5, 5, 4, 4],     # well liked
    CoherenceLabel.META: [4, 4, 3, 3, 3, 3],
    CoherenceLabel.STORY: [3, 3, 3, 2, 2, 2],
    CoherenceLabel.SUBJECTIVE: [2, 2, 2, 1, 1, 1],  # least liked
}
samples = []
for label, ratings in ratings_per_class.items():
    for i, rating in enumerate(ratings):
        samples.append(RatedSample(
            image_key=f"{label.value.lower()}-{i}",
            generated=CaptionRecord(f"{label.value} caption {i}", label),
            reference=CaptionRecord(f"reference {label.value} {i}", CoherenceLabel.VISIBLE),
            rating=rating,
        ))
ds = Dataset(samples, name="biased")

print("class means before:")
for label in LABELS:
    print(f"  {label.value:<11} {class_means(ds)[label]:.3f}")

plan = plan_augmentation(ds, tolerance=0.02)
print(f"\ntarget mean {plan.target_mean:.3f}; planned negatives:",
      {label.value: n for label, n in plan.counts.items() if n})

balanced = augment(ds, plan, seed=7)
print(f"\n{len(balanced) - len(ds)} negatives appended "
      f"(each an existing image paired with a mismatched caption of its class, target 0)")

print("\nclass means after:")
for label in LABELS:
    print(f"  {label.value:<11} {class_means(balanced)[label]:.3f}")

example = balanced.samples[-1]
print(f"\nexample negative: image {example.image_key!r} now paired with "
      f"{example.generated.text!r} (rating {example.rating}, target {example.target})")
