"""Dataset records for rated image captions: JSONL parsing, rating
normalization, deterministic splits, and per-class target means.

A dataset line pairs one generated caption with one reference caption for an
image, each carrying a coherence label, plus a 1..5 human rating. The same
image key may appear in several samples, so a dataset is an ordered list,
not a map.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

from .errors import DatasetError


class CoherenceLabel(Enum):
    """Image-text coherence relation. Definition order is the canonical
    one-hot index order (Meta=0, Visible=1, Subjective=2, Story=3)."""

    META = "Meta"
    VISIBLE = "Visible"
    SUBJECTIVE = "Subjective"
    STORY = "Story"

    @property
    def index(self) -> int:
        return _LABEL_INDEX[self]

    @classmethod
    def parse(cls, text: str) -> "CoherenceLabel":
        try:
            return cls(text)
        except ValueError:
            valid = ", ".join(l.value for l in cls)
            raise DatasetError(
                f"unknown coherence label {text!r} (expected one of: {valid})"
            ) from None


LABELS: tuple[CoherenceLabel, ...] = tuple(CoherenceLabel)
_LABEL_INDEX = {label: i for i, label in enumerate(LABELS)}


def normalize_rating(rating: int) -> float:
    """Map a 1..5 human rating to the unit interval: (rating - 1) / 4."""
    if isinstance(rating, bool) or not isinstance(rating, int):
        raise DatasetError(f"rating must be an integer, got {rating!r}")
    if not 1 <= rating <= 5:
        raise DatasetError(f"rating {rating} outside 1..5")
    return (rating - 1) / 4


@dataclass(frozen=True)
class CaptionRecord:
    """One caption and its coherence label."""

    text: str
    label: CoherenceLabel


@dataclass(frozen=True)
class RatedSample:
    """One rated (generated, reference) caption pair for an image.

    ``negative`` marks augmentation negatives: mismatched image/caption
    pairs whose target score is forced to 0 regardless of rating.
    """

    image_key: str
    generated: CaptionRecord
    reference: CaptionRecord
    rating: int
    negative: bool = False
    split: str | None = None

    @property
    def target(self) -> float:
        if self.negative:
            return 0.0
        return normalize_rating(self.rating)


@dataclass
class Dataset:
    samples: list[RatedSample] = field(default_factory=list)
    name: str = ""

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[RatedSample]:
        return iter(self.samples)


@dataclass(frozen=True)
class SystemRun:
    """One captioning system's outputs over a test set.

    ``outputs`` maps each test image key to the generated caption text;
    every test image appears exactly once (dict keys are unique by
    construction). ``coherence`` is the label the system was steered with.
    """

    system_name: str
    coherence: CoherenceLabel
    outputs: dict[str, str]


_REQUIRED_FIELDS = ("image_key", "gen_text", "gen_label", "ref_text", "ref_label", "rating")


def _parse_record(obj: dict, lineno: int) -> RatedSample:
    for name in _REQUIRED_FIELDS:
        if name not in obj:
            raise DatasetError(f"line {lineno}: missing field {name!r}")
    for name in ("image_key", "gen_text", "ref_text"):
        if not isinstance(obj[name], str):
            raise DatasetError(f"line {lineno}: field {name!r} must be a string")
    for name in ("gen_text", "ref_text"):
        if not obj[name].strip():
            raise DatasetError(f"line {lineno}: field {name!r} is empty")
    split = obj.get("split")
    if split is not None and split not in ("train", "val"):
        raise DatasetError(f"line {lineno}: split must be 'train' or 'val', got {split!r}")
    negative = obj.get("negative", False)
    if not isinstance(negative, bool):
        raise DatasetError(f"line {lineno}: field 'negative' must be a boolean")
    try:
        return RatedSample(
            image_key=obj["image_key"],
            generated=CaptionRecord(obj["gen_text"], CoherenceLabel.parse(obj["gen_label"])),
            reference=CaptionRecord(obj["ref_text"], CoherenceLabel.parse(obj["ref_label"])),
            rating=_check_rating(obj["rating"]),
            negative=negative,
            split=split,
        )
    except DatasetError as err:
        raise DatasetError(f"line {lineno}: {err}") from None


def _check_rating(value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise DatasetError(f"rating must be an integer, got {value!r}")
    if not 1 <= value <= 5:
        raise DatasetError(f"rating {value} outside 1..5")
    return value


def parse_dataset(stream: Iterable[str], name: str = "") -> Dataset:
    """Parse a JSONL line stream into a Dataset, preserving line order.

    Each line must be a JSON object with fields image_key, gen_text,
    gen_label, ref_text, ref_label, rating (1..5), and optionally
    split ("train"/"val") and negative (bool). Any malformed line is fatal
    and the error names the 1-based line number.
    """
    samples = []
    for lineno, line in enumerate(stream, start=1):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as err:
            raise DatasetError(f"line {lineno}: malformed JSON ({err.msg})") from None
        if not isinstance(obj, dict):
            raise DatasetError(f"line {lineno}: expected a JSON object")
        samples.append(_parse_record(obj, lineno))
    return Dataset(samples=samples, name=name)


def sample_to_record(sample: RatedSample) -> dict:
    record = {
        "image_key": sample.image_key,
        "gen_text": sample.generated.text,
        "gen_label": sample.generated.label.value,
        "ref_text": sample.reference.text,
        "ref_label": sample.reference.label.value,
        "rating": sample.rating,
    }
    if sample.split is not None:
        record["split"] = sample.split
    if sample.negative:
        record["negative"] = True
    return record


def serialize_dataset(ds: Dataset) -> Iterator[str]:
    """Yield one JSON line per sample; inverse of parse_dataset."""
    for sample in ds.samples:
        yield json.dumps(sample_to_record(sample), ensure_ascii=False)


def load_dataset(path, name: str | None = None) -> Dataset:
    with open(path, "r", encoding="utf-8") as f:
        return parse_dataset(f, name=name if name is not None else str(path))


def write_dataset(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for line in serialize_dataset(ds):
            f.write(line + "\n")


def split_dataset(ds: Dataset, val_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministically split into (train, val).

    Validation size is round(val_fraction * N), clamped so both halves are
    nonempty. The split is a function of (dataset order, seed) only.
    """
    n = len(ds.samples)
    if n < 2:
        raise DatasetError(f"cannot split a dataset of {n} sample(s)")
    if not 0.0 < val_fraction < 1.0:
        raise DatasetError(f"val_fraction must be in (0, 1), got {val_fraction}")
    n_val = min(max(1, round(val_fraction * n)), n - 1)
    rng = random.Random(seed)
    val_idx = set(rng.sample(range(n), n_val))
    train = [s for i, s in enumerate(ds.samples) if i not in val_idx]
    val = [s for i, s in enumerate(ds.samples) if i in val_idx]
    return (
        Dataset(samples=train, name=f"{ds.name}:train" if ds.name else "train"),
        Dataset(samples=val, name=f"{ds.name}:val" if ds.name else "val"),
    )


def class_means(ds: Dataset, by: str = "generated") -> dict[CoherenceLabel, float]:
    """Mean target score per coherence class.

    ``by`` selects which caption's label buckets the samples: "generated"
    or "reference". Labels absent from the dataset are absent from the map.
    """
    if by not in ("generated", "reference"):
        raise DatasetError(f"by must be 'generated' or 'reference', got {by!r}")
    totals: dict[CoherenceLabel, float] = {}
    counts: dict[CoherenceLabel, int] = {}
    for sample in ds.samples:
        label = getattr(sample, by).label
        totals[label] = totals.get(label, 0.0) + sample.target
        counts[label] = counts.get(label, 0) + 1
    return {label: totals[label] / counts[label] for label in totals}
