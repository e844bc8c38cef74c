"""Learned caption-quality metric, feed-forward flavor.

Three input projections (image vector, shared caption-text projection for
the generated and reference captions, coherence one-hots) are concatenated
in a fixed slot order and pushed through a ReLU MLP with progressively
smaller hidden layers; a final affine head emits the raw scalar score.
Ablation switches drop the image and/or coherence slots entirely, shrinking
the first MLP layer.

All arithmetic is float64; the store's float32 vectors are upcast on entry.
The raw head output is unbounded; clamp to [0, 1] only for presentation.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterator, Sequence

import numpy as np

from .corpus import LABELS, CoherenceLabel
from .errors import ModelError
from .features import MAGIC, VERSION, image_feature_key, text_key

N_LABELS = len(LABELS)

DEFAULT_HIDDEN = (512, 256, 128, 64, 32, 16, 8)


@dataclass(frozen=True)
class ModelConfig:
    use_image: bool = True
    use_coherence: bool = True
    image_dim: int = 2048
    text_dim: int = 1024
    embed_dim: int = 512
    hidden_sizes: tuple[int, ...] = DEFAULT_HIDDEN

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(self.hidden_sizes))
        if self.embed_dim <= 0 or self.image_dim <= 0 or self.text_dim <= 0:
            raise ModelError("all dims must be positive")
        if not self.hidden_sizes or any(h <= 0 for h in self.hidden_sizes):
            raise ModelError("hidden_sizes must be non-empty and strictly positive")

    @property
    def slot_count(self) -> int:
        # generated + reference captions always present; image and the two
        # coherence one-hots are optional.
        return (1 if self.use_image else 0) + 2 + (2 if self.use_coherence else 0)

    @property
    def concat_width(self) -> int:
        return self.embed_dim * self.slot_count


@dataclass
class Affine:
    """y = w @ x + b with w of shape (out, in)."""

    w: np.ndarray
    b: np.ndarray


@dataclass
class ModelParams:
    proj_image: Affine | None
    proj_text: Affine
    proj_coherence: Affine | None
    mlp: list[Affine]
    head: Affine


@dataclass
class SampleFeatures:
    """Float inputs for one sample; image_vec may be None when the image
    slot is disabled."""

    image_vec: np.ndarray | None
    gen_vec: np.ndarray
    ref_vec: np.ndarray
    gen_label: CoherenceLabel
    ref_label: CoherenceLabel


@dataclass
class Activations:
    e_image: np.ndarray | None
    e_gen: np.ndarray
    e_ref: np.ndarray
    e_gen_coh: np.ndarray | None
    e_ref_coh: np.ndarray | None
    concat: np.ndarray
    hidden: list[np.ndarray]
    score: float


def embed_coherence(label: CoherenceLabel) -> np.ndarray:
    """One-hot at the canonical index (Meta, Visible, Subjective, Story)."""
    vec = np.zeros(N_LABELS)
    vec[label.index] = 1.0
    return vec


def layer_specs(config: ModelConfig) -> list[tuple[str, int, int]]:
    """(name, fan_in, fan_out) for every affine map, in canonical order."""
    specs = []
    if config.use_image:
        specs.append(("linear1", config.image_dim, config.embed_dim))
    specs.append(("linear2", config.text_dim, config.embed_dim))
    if config.use_coherence:
        specs.append(("linear3", N_LABELS, config.embed_dim))
    width = config.concat_width
    for i, h in enumerate(config.hidden_sizes):
        specs.append((f"mlp{i}", width, h))
        width = h
    specs.append(("linear4", width, 1))
    return specs


def param_count(config: ModelConfig) -> int:
    """Total trainable scalars: sum over affine maps of in*out + out."""
    return sum(fan_in * fan_out + fan_out for _, fan_in, fan_out in layer_specs(config))


def init_params(config: ModelConfig, seed: int) -> ModelParams:
    """Deterministic initialization: weights uniform in +-sqrt(6/(fan_in +
    fan_out)), biases zero."""
    rng = np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF)
    layers = {}
    for name, fan_in, fan_out in layer_specs(config):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        layers[name] = Affine(
            w=rng.uniform(-bound, bound, size=(fan_out, fan_in)),
            b=np.zeros(fan_out),
        )
    return ModelParams(
        proj_image=layers.get("linear1"),
        proj_text=layers["linear2"],
        proj_coherence=layers.get("linear3"),
        mlp=[layers[f"mlp{i}"] for i in range(len(config.hidden_sizes))],
        head=layers["linear4"],
    )


def named_affines(params: ModelParams) -> Iterator[tuple[str, Affine]]:
    if params.proj_image is not None:
        yield "linear1", params.proj_image
    yield "linear2", params.proj_text
    if params.proj_coherence is not None:
        yield "linear3", params.proj_coherence
    for i, layer in enumerate(params.mlp):
        yield f"mlp{i}", layer
    yield "linear4", params.head


def named_arrays(params: ModelParams) -> Iterator[tuple[str, np.ndarray]]:
    """Every trainable tensor under its checkpoint key, canonical order."""
    for name, layer in named_affines(params):
        yield f"w:{name}", layer.w
        yield f"b:{name}", layer.b


def copy_params(params: ModelParams) -> ModelParams:
    def dup(layer):
        return None if layer is None else Affine(layer.w.copy(), layer.b.copy())

    return ModelParams(
        proj_image=dup(params.proj_image),
        proj_text=dup(params.proj_text),
        proj_coherence=dup(params.proj_coherence),
        mlp=[dup(l) for l in params.mlp],
        head=dup(params.head),
    )


def _check_vec(vec, dim: int, what: str) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64)
    if arr.shape != (dim,):
        raise ModelError(f"{what} has shape {arr.shape}, expected ({dim},)")
    return arr


@dataclass
class FeatureBatch:
    """Row-stacked inputs for a batch of samples."""

    image: np.ndarray | None
    gen: np.ndarray
    ref: np.ndarray
    gen_onehot: np.ndarray
    ref_onehot: np.ndarray

    @classmethod
    def from_samples(cls, samples: Sequence[SampleFeatures], config: ModelConfig):
        image = None
        if config.use_image:
            rows = []
            for s in samples:
                if s.image_vec is None:
                    raise ModelError("image vector required when the image slot is enabled")
                rows.append(_check_vec(s.image_vec, config.image_dim, "image vector"))
            image = np.stack(rows)
        gen = np.stack([_check_vec(s.gen_vec, config.text_dim, "generated-caption vector") for s in samples])
        ref = np.stack([_check_vec(s.ref_vec, config.text_dim, "reference-caption vector") for s in samples])
        gen_onehot = np.stack([embed_coherence(s.gen_label) for s in samples])
        ref_onehot = np.stack([embed_coherence(s.ref_label) for s in samples])
        return cls(image=image, gen=gen, ref=ref, gen_onehot=gen_onehot, ref_onehot=ref_onehot)

    def __len__(self) -> int:
        return self.gen.shape[0]

    def take(self, idx) -> "FeatureBatch":
        return FeatureBatch(
            image=None if self.image is None else self.image[idx],
            gen=self.gen[idx],
            ref=self.ref[idx],
            gen_onehot=self.gen_onehot[idx],
            ref_onehot=self.ref_onehot[idx],
        )


@dataclass
class ForwardCache:
    """Intermediate values needed for reverse-mode gradients."""

    slots: list[np.ndarray]  # projected slot activations, concat order
    concat: np.ndarray
    pres: list[np.ndarray]  # MLP pre-activations
    posts: list[np.ndarray]  # MLP post-ReLU activations
    scores: np.ndarray


def forward_batch(params: ModelParams, config: ModelConfig, batch: FeatureBatch) -> ForwardCache:
    slots = []
    if config.use_image:
        if params.proj_image is None:
            raise ModelError("config enables the image slot but params carry no image projection")
        slots.append(batch.image @ params.proj_image.w.T + params.proj_image.b)
    slots.append(batch.gen @ params.proj_text.w.T + params.proj_text.b)
    slots.append(batch.ref @ params.proj_text.w.T + params.proj_text.b)
    if config.use_coherence:
        if params.proj_coherence is None:
            raise ModelError("config enables coherence slots but params carry no label projection")
        slots.append(batch.gen_onehot @ params.proj_coherence.w.T + params.proj_coherence.b)
        slots.append(batch.ref_onehot @ params.proj_coherence.w.T + params.proj_coherence.b)
    concat = np.concatenate(slots, axis=1)
    if concat.shape[1] != config.concat_width:
        raise ModelError(
            f"concat width {concat.shape[1]} does not match config ({config.concat_width})"
        )
    pres = []
    posts = []
    h = concat
    for layer in params.mlp:
        pre = h @ layer.w.T + layer.b
        h = np.maximum(pre, 0.0)
        pres.append(pre)
        posts.append(h)
    scores = h @ params.head.w.T + params.head.b
    return ForwardCache(slots=slots, concat=concat, pres=pres, posts=posts, scores=scores[:, 0])


def forward(params: ModelParams, config: ModelConfig, feats: SampleFeatures) -> Activations:
    """Score one sample, exposing every intermediate activation."""
    cache = forward_batch(params, config, FeatureBatch.from_samples([feats], config))
    i = 0
    e_image = None
    if config.use_image:
        e_image = cache.slots[i][0]
        i += 1
    e_gen = cache.slots[i][0]
    e_ref = cache.slots[i + 1][0]
    i += 2
    e_gen_coh = e_ref_coh = None
    if config.use_coherence:
        e_gen_coh = cache.slots[i][0]
        e_ref_coh = cache.slots[i + 1][0]
    return Activations(
        e_image=e_image,
        e_gen=e_gen,
        e_ref=e_ref,
        e_gen_coh=e_gen_coh,
        e_ref_coh=e_ref_coh,
        concat=cache.concat[0],
        hidden=[p[0] for p in cache.posts],
        score=float(cache.scores[0]),
    )


def score_sample(params: ModelParams, config: ModelConfig, feats: SampleFeatures) -> float:
    return forward(params, config, feats).score


def clamp01(x: float) -> float:
    """Presentation-only clamp of the raw score to [0, 1]."""
    return min(1.0, max(0.0, x))


def lookup_features(
    feats,
    config: ModelConfig,
    image_key: str,
    gen_text: str,
    ref_text: str,
    gen_label: CoherenceLabel,
    ref_label: CoherenceLabel,
) -> SampleFeatures:
    """Resolve one sample's vectors from a feature store / feature set.

    Image vectors live under 'img:<image_key>', caption vectors under the
    content key of their exact text. A missing key fails naming the key.
    """
    image_vec = None
    if config.use_image:
        image_vec = feats.vector(image_feature_key(image_key))
    return SampleFeatures(
        image_vec=image_vec,
        gen_vec=feats.vector(text_key(gen_text)),
        ref_vec=feats.vector(text_key(ref_text)),
        gen_label=gen_label,
        ref_label=ref_label,
    )


def sample_features(feats, config: ModelConfig, sample) -> SampleFeatures:
    """lookup_features for a corpus RatedSample."""
    return lookup_features(
        feats,
        config,
        sample.image_key,
        sample.generated.text,
        sample.reference.text,
        sample.generated.label,
        sample.reference.label,
    )


# --- checkpoint format -----------------------------------------------------
#
# Checkpoints reuse the feature-store framing (magic "CSMF", version 1,
# little-endian) with the header dim field fixed to 1 as a marker, but each
# record carries an explicit element count because tensors have different
# sizes: record = key_len u16 | key | numel u32 | numel * f32. Tensors are
# flattened row-major under keys "w:<layer>" / "b:<layer>"; the model shape
# is stored in "cfg:*" records so a checkpoint is self-describing.

_CFG_KEYS = ("cfg:embed_dim", "cfg:hidden_sizes", "cfg:image_dim", "cfg:text_dim",
             "cfg:use_coherence", "cfg:use_image")


def _config_records(config: ModelConfig) -> dict[str, np.ndarray]:
    return {
        "cfg:embed_dim": np.array([config.embed_dim], dtype=np.float64),
        "cfg:hidden_sizes": np.array(config.hidden_sizes, dtype=np.float64),
        "cfg:image_dim": np.array([config.image_dim], dtype=np.float64),
        "cfg:text_dim": np.array([config.text_dim], dtype=np.float64),
        "cfg:use_coherence": np.array([1.0 if config.use_coherence else 0.0]),
        "cfg:use_image": np.array([1.0 if config.use_image else 0.0]),
    }


def write_checkpoint(sink: BinaryIO, params: ModelParams, config: ModelConfig) -> int:
    records = dict(_config_records(config))
    for key, arr in named_arrays(params):
        records[key] = arr.reshape(-1)
    written = sink.write(MAGIC)
    written += sink.write(struct.pack("<III", VERSION, 1, len(records)))
    for key in sorted(records, key=lambda k: k.encode("utf-8")):
        raw = key.encode("utf-8")
        flat = np.ascontiguousarray(records[key], dtype="<f4")
        written += sink.write(struct.pack("<H", len(raw)))
        written += sink.write(raw)
        written += sink.write(struct.pack("<I", flat.size))
        written += sink.write(flat.tobytes())
    return written


def read_checkpoint(source: BinaryIO) -> tuple[ModelParams, ModelConfig]:
    offset = 0
    magic = source.read(4)
    if magic != MAGIC:
        raise ModelError(f"bad magic at offset 0: {magic!r}")
    offset += 4
    header = source.read(12)
    if len(header) != 12:
        raise ModelError(f"truncated header at offset {offset}")
    version, dim, count = struct.unpack("<III", header)
    if version != VERSION:
        raise ModelError(f"unsupported checkpoint version {version}")
    if dim != 1:
        raise ModelError(f"checkpoint dim marker must be 1, got {dim}")
    offset += 12
    records: dict[str, np.ndarray] = {}
    for _ in range(count):
        head = source.read(2)
        if len(head) != 2:
            raise ModelError(f"truncated record at offset {offset}")
        (key_len,) = struct.unpack("<H", head)
        offset += 2
        key = source.read(key_len).decode("utf-8")
        offset += key_len
        size_raw = source.read(4)
        if len(size_raw) != 4:
            raise ModelError(f"truncated record size at offset {offset}")
        (numel,) = struct.unpack("<I", size_raw)
        offset += 4
        payload = source.read(4 * numel)
        if len(payload) != 4 * numel:
            raise ModelError(f"truncated tensor {key!r} at offset {offset}")
        offset += 4 * numel
        if key in records:
            raise ModelError(f"duplicate checkpoint key {key!r}")
        records[key] = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    missing_cfg = [k for k in _CFG_KEYS if k not in records]
    if missing_cfg:
        raise ModelError(f"checkpoint missing {missing_cfg[0]!r}")
    config = ModelConfig(
        use_image=bool(records["cfg:use_image"][0]),
        use_coherence=bool(records["cfg:use_coherence"][0]),
        image_dim=int(records["cfg:image_dim"][0]),
        text_dim=int(records["cfg:text_dim"][0]),
        embed_dim=int(records["cfg:embed_dim"][0]),
        hidden_sizes=tuple(int(h) for h in records["cfg:hidden_sizes"]),
    )
    layers = {}
    for name, fan_in, fan_out in layer_specs(config):
        for prefix, shape in (("w", (fan_out, fan_in)), ("b", (fan_out,))):
            key = f"{prefix}:{name}"
            if key not in records:
                raise ModelError(f"checkpoint missing tensor {key!r}")
            flat = records[key]
            expected = int(np.prod(shape))
            if flat.size != expected:
                raise ModelError(
                    f"tensor {key!r} has {flat.size} elements, expected {expected}"
                )
            layers.setdefault(name, {})[prefix] = flat.reshape(shape)
    def aff(name):
        return Affine(w=layers[name]["w"], b=layers[name]["b"])

    params = ModelParams(
        proj_image=aff("linear1") if config.use_image else None,
        proj_text=aff("linear2"),
        proj_coherence=aff("linear3") if config.use_coherence else None,
        mlp=[aff(f"mlp{i}") for i in range(len(config.hidden_sizes))],
        head=aff("linear4"),
    )
    return params, config


def save_checkpoint(path, params: ModelParams, config: ModelConfig) -> int:
    with open(path, "wb") as f:
        return write_checkpoint(f, params, config)


def load_checkpoint(path) -> tuple[ModelParams, ModelConfig]:
    with open(path, "rb") as f:
        return read_checkpoint(f)
