"""cosmic: a coherence-aware evaluation toolkit for image-caption
generators.

Trains and applies a learned caption-quality metric (image embedding, two
caption embeddings, two coherence labels -> score), implements the classic
n-gram baselines from scratch, and ranks captioning systems by Kendall
agreement with human ratings.
"""

from .augment import AugmentPlan, augment, plan_augmentation
from .bench import (
    RankReport,
    SystemScoreTable,
    build_report,
    kendall_tau_a,
    kendall_tau_b,
    published_benchmark_table,
    run_benchmark,
    system_score,
)
from .corpus import (
    CaptionRecord,
    CoherenceLabel,
    Dataset,
    RatedSample,
    SystemRun,
    class_means,
    load_dataset,
    normalize_rating,
    parse_dataset,
    serialize_dataset,
    split_dataset,
    write_dataset,
)
from .errors import (
    AugmentError,
    BenchmarkError,
    CosmicError,
    DatasetError,
    ModelError,
    StoreError,
    TrainingError,
)
from .features import (
    FeatureSet,
    FeatureStore,
    get_vector,
    image_feature_key,
    load_store,
    read_store,
    save_store,
    synth_store,
    text_key,
    write_store,
)
from .model import (
    Activations,
    ModelConfig,
    ModelParams,
    SampleFeatures,
    clamp01,
    embed_coherence,
    forward,
    init_params,
    load_checkpoint,
    param_count,
    save_checkpoint,
    score_sample,
)
from .textmetrics import (
    MetricScore,
    bleu_corpus,
    cider_d,
    evaluate_pairs,
    extract_ngrams,
    rouge_l,
    tokenize,
)
from .train import (
    AdamState,
    TrainConfig,
    TrainHistory,
    adam_step,
    backward,
    gradient_check,
    lr_at_epoch,
    mse_loss,
    train,
)

__version__ = "0.1.0"
