#!/usr/bin/env python3
"""The classic n-gram baselines, computed from scratch.

BLEU uses clipped precision with no smoothing, ROUGE-L the LCS F-measure
with beta = 1.2, and CIDEr-D TF-IDF n-gram cosines with a Gaussian length
penalty. On out-of-domain captions these metrics hand out near-zero scores
even for perfectly good text, which is the failure mode the learned metric
exists to fix.
"""

from cosmic import textmetrics

reference = "close-up of pink flowers"
paraphrase = "a tight shot of rose colored blossoms"  # same meaning, new words
verbatim = "close-up of pink flowers"

ref = textmetrics.tokenize(reference)
print("tokens:", ref)

for name, candidate in [("verbatim", verbatim), ("paraphrase", paraphrase)]:
    cand = textmetrics.tokenize(candidate)
    print(f"\n{name}: {candidate!r}")
    print("  bleu1 :", round(textmetrics.bleu_corpus([cand], [ref], 1), 4))
    print("  bleu2 :", round(textmetrics.bleu_corpus([cand], [ref], 2), 4))
    print("  rougeL:", round(textmetrics.rouge_l(cand, ref), 4))

# CIDEr-D needs a corpus: document frequencies over the reference side
# decide which n-grams are informative.
pairs = [
    (textmetrics.tokenize("a dog runs on grass"), textmetrics.tokenize("a dog runs on the grass")),
    (textmetrics.tokenize("a cat sleeps indoors"), textmetrics.tokenize("a cat sleeps on a sofa")),
    (textmetrics.tokenize(paraphrase), ref),
]
score = textmetrics.cider_d(pairs)
print("\nciderD per sample:", [round(s, 3) for s in score.per_sample])
print("ciderD corpus    :", round(score.corpus, 3))

# The paraphrase describes the same flowers but shares almost no surface
# n-grams with its reference, so bleu2 is exactly 0 and the other scores
# are tiny. That is the gap a learned, coherence-aware metric closes.
