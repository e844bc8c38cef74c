"""System-level benchmark: per-system mean scores per metric, Kendall
rank correlation of every metric column against the human column, and
ranking reports.

The correlation is tie-corrected (tau-b): (C - D) / sqrt((n0 - n1)(n0 - n2))
with C/D counted over all pairs and n1/n2 the tie-pair counts of each side.
A tau-a variant (no tie correction) is available for diagnostics because
published correlations recomputed from rounded score tables can differ from
their printed values.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

from .corpus import CoherenceLabel, SystemRun
from .errors import BenchmarkError
from .model import ModelConfig, ModelParams, clamp01, lookup_features, score_sample
from .textmetrics import METRIC_NAMES, evaluate_pairs

# Canonical system order used when reproducing the published protocol.
CANONICAL_SYSTEMS = (
    "Base-Visible",
    "Base-Meta",
    "Base-Subjective",
    "Base-Story",
    "Lite-Visible",
    "Lite-Meta",
    "Lite-Subjective",
    "Lite-Story",
)

MODEL_COLUMN = "cosmic"


@dataclass
class SystemScoreTable:
    systems: list[str]
    columns: dict[str, list[float]]
    human: list[float]

    def validate(self) -> None:
        n = len(self.systems)
        if len(self.human) != n:
            raise BenchmarkError(f"human column has {len(self.human)} rows, expected {n}")
        for name, col in self.columns.items():
            if len(col) != n:
                raise BenchmarkError(f"column {name!r} has {len(col)} rows, expected {n}")


@dataclass
class RankReport:
    table: SystemScoreTable
    taus: dict[str, float]
    best_metric: str
    taus_a: dict[str, float] | None = None
    extras: dict[str, list[float]] = field(default_factory=dict)


def system_score(per_sample: Sequence[float]) -> float:
    """Arithmetic mean of a system's per-sample scores."""
    if len(per_sample) == 0:
        raise BenchmarkError("cannot aggregate an empty score list")
    return float(sum(per_sample) / len(per_sample))


def _pair_counts(x: Sequence[float], y: Sequence[float]):
    n = len(x)
    concordant = discordant = ties_x = ties_y = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0:
                ties_x += 1
            if dy == 0:
                ties_y += 1
            prod = dx * dy
            if prod > 0:
                concordant += 1
            elif prod < 0:
                discordant += 1
    return concordant, discordant, ties_x, ties_y


def _check_lengths(x, y):
    if len(x) != len(y):
        raise BenchmarkError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise BenchmarkError("need at least 2 observations")


def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> float:
    """Tie-corrected Kendall correlation; errors (rather than NaN) when a
    side is all ties."""
    _check_lengths(x, y)
    concordant, discordant, ties_x, ties_y = _pair_counts(x, y)
    n0 = len(x) * (len(x) - 1) // 2
    denom_sq = (n0 - ties_x) * (n0 - ties_y)
    if denom_sq == 0:
        raise BenchmarkError("tau-b undefined: one side is constant (all pairs tied)")
    return (concordant - discordant) / math.sqrt(denom_sq)


def kendall_tau_a(x: Sequence[float], y: Sequence[float]) -> float:
    """Uncorrected variant: (C - D) / n0."""
    _check_lengths(x, y)
    concordant, discordant, _, _ = _pair_counts(x, y)
    n0 = len(x) * (len(x) - 1) // 2
    return (concordant - discordant) / n0


def build_report(table: SystemScoreTable, include_tau_a: bool = False) -> RankReport:
    """Tau of every metric column against the human column; best metric is
    the argmax with lexicographic tie-breaking."""
    table.validate()
    if not table.columns:
        raise BenchmarkError("no metric columns to rank")
    taus = {name: kendall_tau_b(col, table.human) for name, col in table.columns.items()}
    best_metric = min(taus, key=lambda name: (-taus[name], name))
    taus_a = None
    if include_tau_a:
        taus_a = {name: kendall_tau_a(col, table.human) for name, col in table.columns.items()}
    return RankReport(table=table, taus=taus, best_metric=best_metric, taus_a=taus_a)


def run_benchmark(
    systems: Sequence[SystemRun],
    references: dict[str, str],
    human_means: Sequence[float],
    metrics: Sequence[str] = METRIC_NAMES,
    model: ModelParams | None = None,
    model_config: ModelConfig | None = None,
    feature_store=None,
    ref_label: CoherenceLabel = CoherenceLabel.VISIBLE,
    include_tau_a: bool = False,
) -> RankReport:
    """Score every system with the selected n-gram metrics (and the learned
    metric when a model plus feature store are supplied), then rank.

    All systems must cover the same image keys. For the learned column each
    output is scored with the system's coherence label on the generated
    side and ``ref_label`` (Visible by default, matching how the reference
    captions were written) on the reference side; the column holds raw mean
    scores and a clamped copy is attached as an extra.
    """
    if not systems:
        raise BenchmarkError("no systems to benchmark")
    if len(human_means) != len(systems):
        raise BenchmarkError(
            f"{len(human_means)} human means for {len(systems)} systems"
        )
    key_set = set(systems[0].outputs)
    for run in systems[1:]:
        if set(run.outputs) != key_set:
            raise BenchmarkError(
                f"system {run.system_name!r} covers different image keys than "
                f"{systems[0].system_name!r}"
            )
    columns: dict[str, list[float]] = {}
    for metric in metrics:
        scores = [evaluate_pairs(metric, run, references) for run in systems]
        columns[metric] = [s.corpus for s in scores]
    extras: dict[str, list[float]] = {}
    if model is not None:
        if model_config is None or feature_store is None:
            raise BenchmarkError("learned-metric column needs both a config and features")
        raw_col = []
        clamped_col = []
        for run in systems:
            per_sample = []
            for key in sorted(run.outputs):
                feats = lookup_features(
                    feature_store,
                    model_config,
                    key,
                    run.outputs[key],
                    references[key],
                    run.coherence,
                    ref_label,
                )
                per_sample.append(score_sample(model, model_config, feats))
            raw_col.append(system_score(per_sample))
            clamped_col.append(system_score([clamp01(s) for s in per_sample]))
        columns[MODEL_COLUMN] = raw_col
        extras[MODEL_COLUMN + "_clamped"] = clamped_col
    table = SystemScoreTable(
        systems=[run.system_name for run in systems],
        columns=columns,
        human=list(human_means),
    )
    report = build_report(table, include_tau_a=include_tau_a)
    report.extras = extras
    return report


def load_score_table_csv(lines) -> SystemScoreTable:
    """Parse a stored score table: CSV with a ``system`` column, a ``human``
    column, and one column per metric."""
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or "system" not in reader.fieldnames or "human" not in reader.fieldnames:
        raise BenchmarkError("score CSV needs 'system' and 'human' columns")
    metric_names = [f for f in reader.fieldnames if f not in ("system", "human")]
    systems: list[str] = []
    human: list[float] = []
    columns: dict[str, list[float]] = {name: [] for name in metric_names}
    for row in reader:
        systems.append(row["system"])
        try:
            human.append(float(row["human"]))
            for name in metric_names:
                columns[name].append(float(row[name]))
        except (TypeError, ValueError):
            raise BenchmarkError(f"non-numeric score in row for system {row['system']!r}") from None
    if not systems:
        raise BenchmarkError("score CSV has no rows")
    return SystemScoreTable(systems=systems, columns=columns, human=human)


def published_benchmark_table() -> SystemScoreTable:
    """The stored score table for the 8 coherence-steered captioning
    systems (printed values; correlations recomputed from these rounded
    columns are approximate)."""
    text = resources.files("cosmic.data").joinpath("coin_system_scores.csv").read_text("utf-8")
    return load_score_table_csv(text.splitlines())


def report_to_dict(report: RankReport) -> dict:
    payload = {
        "systems": report.table.systems,
        "human": report.table.human,
        "columns": report.table.columns,
        "taus": report.taus,
        "best_metric": report.best_metric,
    }
    if report.taus_a is not None:
        payload["taus_a"] = report.taus_a
    if report.extras:
        payload["extras"] = report.extras
    return payload


def format_report(report: RankReport) -> str:
    """Aligned text table: one row per system plus the tau row."""
    names = list(report.table.columns)
    header = ["system", "human"] + names
    rows = [header]
    for i, system in enumerate(report.table.systems):
        rows.append(
            [system, f"{report.table.human[i]:.3f}"]
            + [f"{report.table.columns[name][i]:.3f}" for name in names]
        )
    rows.append(["tau", ""] + [f"{report.taus[name]:+.3f}" for name in names])
    if report.taus_a is not None:
        rows.append(["tau_a", ""] + [f"{report.taus_a[name]:+.3f}" for name in names])
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip() for row in rows]
    lines.append(f"best metric: {report.best_metric} (tau {report.taus[report.best_metric]:+.3f})")
    return "\n".join(lines)
