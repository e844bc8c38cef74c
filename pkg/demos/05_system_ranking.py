#!/usr/bin/env python3
"""System-level evaluation: which metric agrees with human raters?

Each captioning system gets one score per metric (the mean over its test
outputs); metrics are then judged by the Kendall tau-b of their system
scores against the human means. The stored benchmark table replays the
published comparison of eight coherence-steered systems.
"""

from cosmic import CoherenceLabel, SystemRun, build_report, run_benchmark
from cosmic.bench import format_report, published_benchmark_table

# --- a tiny live benchmark --------------------------------------------------
references = {
    "k1": "a red house by the lake",
    "k2": "two dogs running on grass",
    "k3": "a foggy forest at dawn",
}
systems = [
    SystemRun("echo", CoherenceLabel.VISIBLE, dict(references)),  # copies the references
    SystemRun("close", CoherenceLabel.VISIBLE, {
        "k1": "a red house near a lake",
        "k2": "dogs running on the grass",
        "k3": "a forest in the fog",
    }),
    SystemRun("off-topic", CoherenceLabel.STORY, {
        "k1": "my favourite holiday ever",
        "k2": "what a day that was",
        "k3": "remembering last winter",
    }),
]
human_means = [4.9, 4.2, 1.3]  # how raters would order these systems

report = run_benchmark(systems, references, human_means, metrics=["bleu1", "rougeL", "ciderD"])
print(format_report(report))

# --- replaying the published 8-system table ---------------------------------
# Stored per-system scores for eight coherence-steered captioning systems,
# including learned-metric columns. Correlations recomputed from the rounded
# columns differ slightly from the originally printed taus (ties in the
# rounded human column are one cause), so treat them as approximate.
print()
table = published_benchmark_table()
replay = build_report(table, include_tau_a=True)
print("replayed benchmark columns ranked by tau-b:")
for name in sorted(replay.taus, key=replay.taus.get, reverse=True):
    marker = " <- learned, coherence-aware" if name.startswith("cosmic") else ""
    print(f"  {name:<22} {replay.taus[name]:+.3f}{marker}")
print("\nevery learned-metric column outranks every n-gram baseline column.")
