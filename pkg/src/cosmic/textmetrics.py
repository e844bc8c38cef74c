"""N-gram baseline metrics computed from scratch: BLEU-n (corpus level,
clipped precision, no smoothing), ROUGE-L (LCS F-measure, beta = 1.2), and
CIDEr-D (TF-IDF n-gram cosine with Gaussian length penalty, scaled to
[0, 10]).

All metrics operate on token sequences produced by :func:`tokenize` and
assume a single reference per candidate.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass

from .corpus import SystemRun
from .errors import BenchmarkError

TokenSeq = list[str]

# CLI-visible metric selector strings.
METRIC_NAMES = ("bleu1", "bleu2", "bleu3", "bleu4", "rougeL", "ciderD")

CIDER_MAX_N = 4
CIDER_SIGMA = 6.0
ROUGE_BETA = 1.2


@dataclass
class MetricScore:
    name: str
    per_sample: list[float]
    corpus: float


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> TokenSeq:
    """Lowercase, drop every Unicode punctuation character, split on
    whitespace runs."""
    lowered = text.lower()
    stripped = "".join(ch for ch in lowered if not _is_punct(ch))
    return stripped.split()


def extract_ngrams(seq: TokenSeq, n: int) -> Counter:
    """Multiset of contiguous n-grams as token tuples; empty when the
    sequence is shorter than n."""
    if n < 1:
        raise BenchmarkError(f"n must be >= 1, got {n}")
    return Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))


def _bleu_pair_stats(candidate: TokenSeq, reference: TokenSeq, max_n: int):
    """Clipped match / guess counts for one pair, per n-gram order."""
    matches = [0] * max_n
    guesses = [0] * max_n
    for n in range(1, max_n + 1):
        cand_counts = extract_ngrams(candidate, n)
        ref_counts = extract_ngrams(reference, n)
        matches[n - 1] = sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
        guesses[n - 1] = max(0, len(candidate) - n + 1)
    return matches, guesses


def _bleu_from_stats(matches, guesses, cand_len: int, ref_len: int, max_n: int) -> float:
    if any(g == 0 or m == 0 for m, g in zip(matches, guesses)):
        return 0.0
    log_precision = sum(math.log(m / g) for m, g in zip(matches, guesses)) / max_n
    brevity = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return brevity * math.exp(log_precision)


def bleu_corpus(candidates: list[TokenSeq], references: list[TokenSeq], max_n: int) -> float:
    """Corpus-level BLEU over single-reference pairs.

    Match and guess counts are summed over all pairs before precision is
    taken; BLEU = BP * exp(mean of log precisions over orders 1..max_n),
    with BP = exp(1 - r/c) when c <= r. Any zero precision gives 0 (no
    smoothing).
    """
    if not 1 <= max_n <= 4:
        raise BenchmarkError(f"max_n must be in 1..4, got {max_n}")
    if not candidates:
        raise BenchmarkError("empty candidate list")
    if len(candidates) != len(references):
        raise BenchmarkError(
            f"candidate/reference length mismatch: {len(candidates)} vs {len(references)}"
        )
    total_matches = [0] * max_n
    total_guesses = [0] * max_n
    cand_len = 0
    ref_len = 0
    for cand, ref in zip(candidates, references):
        matches, guesses = _bleu_pair_stats(cand, ref, max_n)
        for i in range(max_n):
            total_matches[i] += matches[i]
            total_guesses[i] += guesses[i]
        cand_len += len(cand)
        ref_len += len(ref)
    if cand_len == 0:
        return 0.0
    return _bleu_from_stats(total_matches, total_guesses, cand_len, ref_len, max_n)


def bleu_sentence(candidate: TokenSeq, reference: TokenSeq, max_n: int) -> float:
    """Single-pair BLEU (the per-sample value; corpus BLEU is not a mean of
    these)."""
    return bleu_corpus([candidate], [reference], max_n)


def _lcs_length(a: TokenSeq, b: TokenSeq) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: TokenSeq, reference: TokenSeq) -> float:
    """ROUGE-L F-measure with beta = 1.2.

    F = (1 + b^2) P R / (R + b^2 P) with P = LCS/len(candidate) and
    R = LCS/len(reference); 0 when either side is empty or nothing matches.
    """
    lcs = _lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    beta_sq = ROUGE_BETA**2
    return (1 + beta_sq) * precision * recall / (recall + beta_sq * precision)


def _tfidf_vector(counts: Counter, doc_freq: dict, log_corpus: float):
    """TF-IDF weights (raw term frequency times ln(corpus/df)) and norm."""
    vec = {}
    norm_sq = 0.0
    for gram, tf in counts.items():
        idf = log_corpus - math.log(max(1.0, doc_freq.get(gram, 0.0)))
        weight = tf * idf
        vec[gram] = weight
        norm_sq += weight * weight
    return vec, math.sqrt(norm_sq)


def cider_d(pairs: list[tuple[TokenSeq, TokenSeq]]) -> MetricScore:
    """CIDEr-D over (candidate, reference) pairs.

    Document frequencies are counted over this pair list's references (the
    evaluation corpus defines idf). For each n in 1..4 the clipped cosine
    of TF-IDF vectors is damped by a Gaussian length penalty
    exp(-(len_c - len_r)^2 / (2 * sigma^2)), sigma = 6; the per-sample
    score is 10 times the mean over n. Orders where both vectors are empty
    contribute 0.
    """
    if not pairs:
        raise BenchmarkError("empty pair list")
    n_docs = len(pairs)
    log_corpus = math.log(n_docs)
    doc_freq = [defaultdict(float) for _ in range(CIDER_MAX_N)]
    for _, ref in pairs:
        for n in range(1, CIDER_MAX_N + 1):
            for gram in set(extract_ngrams(ref, n)):
                doc_freq[n - 1][gram] += 1
    per_sample = []
    for cand, ref in pairs:
        penalty = math.exp(-((len(cand) - len(ref)) ** 2) / (2 * CIDER_SIGMA**2))
        total = 0.0
        for n in range(1, CIDER_MAX_N + 1):
            cand_vec, cand_norm = _tfidf_vector(
                extract_ngrams(cand, n), doc_freq[n - 1], log_corpus
            )
            ref_vec, ref_norm = _tfidf_vector(
                extract_ngrams(ref, n), doc_freq[n - 1], log_corpus
            )
            if cand_norm == 0.0 or ref_norm == 0.0:
                continue
            dot = sum(
                min(weight, ref_vec[gram]) * ref_vec[gram]
                for gram, weight in cand_vec.items()
                if gram in ref_vec
            )
            total += penalty * dot / (cand_norm * ref_norm)
        per_sample.append(10.0 * total / CIDER_MAX_N)
    return MetricScore(
        name="ciderD", per_sample=per_sample, corpus=sum(per_sample) / len(per_sample)
    )


def evaluate_pairs(metric: str, system: SystemRun, references: dict[str, str]) -> MetricScore:
    """Score one system's outputs against reference texts.

    Pairs are ordered by sorted image key. The corpus value is corpus-level
    BLEU for the bleu* selectors and the mean of per-sample values for
    rougeL / ciderD.
    """
    if metric not in METRIC_NAMES:
        raise BenchmarkError(f"unknown metric {metric!r} (expected one of {METRIC_NAMES})")
    missing = sorted(set(system.outputs) - set(references))
    if missing:
        raise BenchmarkError(
            f"system {system.system_name!r} has no reference for key {missing[0]!r}"
        )
    keys = sorted(system.outputs)
    candidates = [tokenize(system.outputs[k]) for k in keys]
    refs = [tokenize(references[k]) for k in keys]
    if metric.startswith("bleu"):
        max_n = int(metric[4:])
        per_sample = [bleu_sentence(c, r, max_n) for c, r in zip(candidates, refs)]
        return MetricScore(
            name=metric, per_sample=per_sample, corpus=bleu_corpus(candidates, refs, max_n)
        )
    if metric == "rougeL":
        per_sample = [rouge_l(c, r) for c, r in zip(candidates, refs)]
        return MetricScore(
            name=metric, per_sample=per_sample, corpus=sum(per_sample) / len(per_sample)
        )
    score = cider_d(list(zip(candidates, refs)))
    return MetricScore(name=metric, per_sample=score.per_sample, corpus=score.corpus)
