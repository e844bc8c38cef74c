"""Coherence-bias mitigation by appending zero-scored negative samples.

Classes whose mean target sits above the target mean get negatives: an
existing image paired with a caption drawn from a different sample of the
same coherence class, rated at the floor with target forced to 0. Appending
k_c = ceil(n_c * (m_c - target) / target) negatives pulls a class of size
n_c and mean m_c down to at most the target.

Counts are planned with exact rational arithmetic so borderline classes
never gain or lose a sample to float rounding.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction

from .corpus import LABELS, CaptionRecord, CoherenceLabel, Dataset, RatedSample
from .errors import AugmentError


@dataclass
class AugmentPlan:
    target_mean: float
    counts: dict[CoherenceLabel, int]
    tolerance: float


def plan_augmentation(
    ds: Dataset, tolerance: float, target: float | None = None
) -> AugmentPlan:
    """Plan per-class negative counts.

    The target defaults to the minimum class mean (by generated-caption
    label), which closes the gap with the least added data. Classes already
    within ``tolerance`` of the target get zero negatives. A target of 0 is
    unreachable by zero-padding for any class with a positive mean.
    """
    if tolerance < 0:
        raise AugmentError(f"tolerance must be nonnegative, got {tolerance}")
    sums: dict[CoherenceLabel, Fraction] = {}
    sizes: dict[CoherenceLabel, int] = {}
    for sample in ds.samples:
        label = sample.generated.label
        sums[label] = sums.get(label, Fraction(0)) + Fraction(sample.target)
        sizes[label] = sizes.get(label, 0) + 1
    if not sums:
        raise AugmentError("cannot plan augmentation for an empty dataset")
    means = {label: sums[label] / sizes[label] for label in sums}
    goal = min(means.values()) if target is None else Fraction(str(target))
    if not 0 <= goal <= 1:
        raise AugmentError(f"target must be in [0, 1], got {float(goal)}")
    tol = Fraction(str(tolerance))
    counts: dict[CoherenceLabel, int] = {}
    for label, mean in means.items():
        if mean <= goal + tol:
            counts[label] = 0
            continue
        if goal == 0:
            raise AugmentError(
                f"class {label.value} has mean {float(mean):.4f}; target 0 is "
                "unreachable by appending zero-scored samples, raise the target"
            )
        counts[label] = math.ceil(sizes[label] * (mean - goal) / goal)
    return AugmentPlan(target_mean=float(goal), counts=counts, tolerance=float(tol))


def augment(ds: Dataset, plan: AugmentPlan, seed: int) -> Dataset:
    """Append the planned negatives; originals are untouched and keep their
    order.

    Each negative reuses an existing image key and a generated caption from
    a different sample of the same class, never a caption originally paired
    with that image (generated or reference side). Negatives carry rating 1
    and the ``negative`` flag, which forces target 0.
    """
    out = list(ds.samples)
    forbidden: dict[str, set[str]] = {}
    pools: dict[CoherenceLabel, list[RatedSample]] = {}
    for sample in ds.samples:
        forbidden.setdefault(sample.image_key, set()).update(
            (sample.generated.text, sample.reference.text)
        )
        pools.setdefault(sample.generated.label, []).append(sample)

    rng = random.Random(seed)
    for label in LABELS:
        count = plan.counts.get(label, 0)
        if count == 0:
            continue
        pool = pools.get(label)
        if not pool:
            raise AugmentError(f"plan requests negatives for absent class {label.value}")
        donor_texts = sorted({s.generated.text for s in pool})
        if len(donor_texts) < 2:
            raise AugmentError(
                f"class {label.value} has a single distinct caption; cannot mismatch"
            )
        eligible = [
            s for s in pool if any(t not in forbidden[s.image_key] for t in donor_texts)
        ]
        if not eligible:
            raise AugmentError(
                f"class {label.value}: every caption is paired with every image; "
                "cannot build mismatched negatives"
            )
        for _ in range(count):
            source = rng.choice(eligible)
            allowed = [t for t in donor_texts if t not in forbidden[source.image_key]]
            text = rng.choice(allowed)
            out.append(
                RatedSample(
                    image_key=source.image_key,
                    generated=CaptionRecord(text, label),
                    reference=source.reference,
                    rating=1,
                    negative=True,
                    split=source.split,
                )
            )
    return Dataset(samples=out, name=ds.name)
