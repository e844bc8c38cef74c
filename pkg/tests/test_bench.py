import itertools
import math
from collections import Counter

import numpy as np
import pytest

from cosmic.bench import (
    CANONICAL_SYSTEMS,
    SystemScoreTable,
    build_report,
    format_report,
    kendall_tau_a,
    kendall_tau_b,
    load_score_table_csv,
    published_benchmark_table,
    report_to_dict,
    run_benchmark,
    system_score,
)
from cosmic.corpus import CoherenceLabel, SystemRun
from cosmic.errors import BenchmarkError
from cosmic.features import FeatureSet, image_feature_key, synth_store, text_key
from cosmic.model import ModelConfig, init_params


def oracle_tau_b(x, y):
    """Exhaustive pair counting with tie groups counted from value counts."""
    n = len(x)
    concordant = discordant = 0
    for i, j in itertools.combinations(range(n), 2):
        prod = (x[i] - x[j]) * (y[i] - y[j])
        if prod > 0:
            concordant += 1
        elif prod < 0:
            discordant += 1
    n0 = n * (n - 1) // 2
    n1 = sum(c * (c - 1) // 2 for c in Counter(x).values())
    n2 = sum(c * (c - 1) // 2 for c in Counter(y).values())
    if (n0 - n1) * (n0 - n2) == 0:
        return None
    return (concordant - discordant) / math.sqrt((n0 - n1) * (n0 - n2))


class TestSystemScore:
    def test_singleton(self):
        assert system_score([0.5]) == 0.5

    def test_mean(self):
        assert system_score([0.0, 1.0]) == 0.5

    def test_constant(self):
        assert system_score([0.3] * 7) == pytest.approx(0.3)

    def test_empty(self):
        with pytest.raises(BenchmarkError):
            system_score([])

    def test_concatenation_is_weighted_mean(self):
        a, b = [0.2, 0.4, 0.9], [0.1, 0.5]
        combined = system_score(a + b)
        weighted = (system_score(a) * len(a) + system_score(b) * len(b)) / (len(a) + len(b))
        assert combined == pytest.approx(weighted)


class TestKendall:
    def test_perfect_concordance(self):
        assert kendall_tau_b([1, 2, 3], [1, 2, 3]) == 1.0

    def test_reversal(self):
        assert kendall_tau_b([1, 2, 3], [3, 2, 1]) == -1.0

    def test_pair_enumeration_fixture(self):
        assert kendall_tau_b([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(4 / 6)

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = list(rng.integers(0, 6, 7))
            y = list(rng.integers(0, 6, 7))
            if oracle_tau_b(x, y) is None:
                continue
            assert kendall_tau_b(x, y) == kendall_tau_b(y, x)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            x = list(rng.uniform(-5, 5, 8))
            y = list(rng.uniform(-5, 5, 8))
            assert kendall_tau_b(x, y) == kendall_tau_b([math.exp(v) for v in x], y)

    def test_negation_antisymmetry(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            x = list(rng.uniform(-5, 5, 8))
            y = list(rng.uniform(-5, 5, 8))
            assert kendall_tau_b(x, [-v for v in y]) == pytest.approx(-kendall_tau_b(x, y))

    def test_all_ties_is_error_not_nan(self):
        with pytest.raises(BenchmarkError, match="constant"):
            kendall_tau_b([1.0, 1.0, 1.0], [1, 2, 3])

    def test_length_mismatch_and_too_short(self):
        with pytest.raises(BenchmarkError):
            kendall_tau_b([1, 2], [1, 2, 3])
        with pytest.raises(BenchmarkError):
            kendall_tau_b([1], [1])

    def test_matches_oracle_on_random_tied_vectors(self):
        rng = np.random.default_rng(3)
        checked = 0
        while checked < 200:
            n = int(rng.integers(2, 11))
            x = list(rng.integers(0, 4, n).astype(float))
            y = list(rng.integers(0, 4, n).astype(float))
            expected = oracle_tau_b(x, y)
            if expected is None:
                with pytest.raises(BenchmarkError):
                    kendall_tau_b(x, y)
            else:
                assert kendall_tau_b(x, y) == expected
                checked += 1

    def test_matches_scipy(self):
        scipy_stats = pytest.importorskip("scipy.stats")
        rng = np.random.default_rng(4)
        for _ in range(50):
            x = rng.integers(0, 5, 8).astype(float)
            y = rng.integers(0, 5, 8).astype(float)
            if oracle_tau_b(list(x), list(y)) is None:
                continue
            assert kendall_tau_b(list(x), list(y)) == pytest.approx(
                float(scipy_stats.kendalltau(x, y).statistic), abs=1e-12
            )

    def test_tau_a_ignores_ties(self):
        x, y = [1, 1, 2, 3], [1, 2, 2, 3]
        assert kendall_tau_a(x, y) == pytest.approx((4 - 0) / 6)


class TestBuildReport:
    def table(self):
        return SystemScoreTable(
            systems=["s1", "s2", "s3"],
            columns={"good": [0.1, 0.2, 0.3], "bad": [0.3, 0.2, 0.1]},
            human=[1.0, 2.0, 3.0],
        )

    def test_matching_column_wins(self):
        report = build_report(self.table())
        assert report.taus["good"] == 1.0
        assert report.best_metric == "good"

    def test_reversed_column_still_reported(self):
        report = build_report(self.table())
        assert report.taus["bad"] == -1.0

    def test_tie_breaks_lexicographically(self):
        table = SystemScoreTable(
            systems=["a", "b", "c"],
            columns={"zeta": [1, 2, 3], "alpha": [4, 5, 6]},
            human=[1.0, 2.0, 3.0],
        )
        assert build_report(table).best_metric == "alpha"

    def test_permutation_equivariance(self):
        table = self.table()
        report = build_report(table)
        perm = [2, 0, 1]
        permuted = SystemScoreTable(
            systems=[table.systems[i] for i in perm],
            columns={k: [v[i] for i in perm] for k, v in table.columns.items()},
            human=[table.human[i] for i in perm],
        )
        assert build_report(permuted).taus == report.taus

    def test_ragged_table_rejected(self):
        table = self.table()
        table.columns["good"] = [0.1]
        with pytest.raises(BenchmarkError, match="good"):
            build_report(table)

    def test_tau_a_included_on_request(self):
        report = build_report(self.table(), include_tau_a=True)
        assert report.taus_a is not None and report.taus_a["good"] == 1.0


class TestPublishedReplay:
    def test_fixture_shape(self):
        table = published_benchmark_table()
        assert tuple(table.systems) == CANONICAL_SYSTEMS
        assert len(table.human) == 8

    def test_recomputed_taus_match_pair_count_oracle(self):
        table = published_benchmark_table()
        report = build_report(table)
        for name, col in table.columns.items():
            assert report.taus[name] == pytest.approx(oracle_tau_b(col, table.human)), name

    def test_learned_metric_columns_beat_ngram_columns(self):
        report = build_report(published_benchmark_table())
        learned = [v for k, v in report.taus.items() if k.startswith("cosmic")]
        ngram = [report.taus[k] for k in ("bleu1", "bleu2", "meteor", "rougeL", "cider", "spice")]
        assert min(learned) > max(ngram)

    def test_augmented_vanilla_tau(self):
        report = build_report(published_benchmark_table())
        assert report.taus["cosmic_vanilla_plus"] == pytest.approx(0.618, abs=0.005)


class TestLoadScoreCsv:
    def test_missing_required_columns(self):
        with pytest.raises(BenchmarkError, match="human"):
            load_score_table_csv(["system,bleu1", "a,0.5"])

    def test_non_numeric(self):
        with pytest.raises(BenchmarkError, match="non-numeric"):
            load_score_table_csv(["system,human,m", "a,1.0,oops"])

    def test_empty(self):
        with pytest.raises(BenchmarkError, match="no rows"):
            load_score_table_csv(["system,human,m"])


def toy_setup():
    references = {"k1": "a red house by the lake", "k2": "two dogs running on grass"}
    copying = SystemRun("copycat", CoherenceLabel.VISIBLE, dict(references))
    noisy = SystemRun(
        "noisy", CoherenceLabel.STORY,
        {"k1": "something entirely different", "k2": "two dogs running on grass"},
    )
    return references, [copying, noisy]


class TestRunBenchmark:
    def test_copying_system_ranks_first_on_bleu1(self):
        references, systems = toy_setup()
        report = run_benchmark(systems, references, human_means=[5.0, 2.0], metrics=["bleu1"])
        col = report.table.columns["bleu1"]
        assert col[0] == 1.0 and col[0] > col[1]
        assert report.best_metric == "bleu1"

    def test_column_count(self):
        references, systems = toy_setup()
        report = run_benchmark(systems, references, [5.0, 2.0], metrics=["bleu1", "rougeL"])
        assert len(report.table.columns) == 2
        config = ModelConfig(image_dim=8, text_dim=8, embed_dim=4, hidden_sizes=(4,))
        feats = FeatureSet(
            synth_store([image_feature_key(k) for k in references], 8, seed=0),
            synth_store(
                sorted({text_key(t) for run in systems for t in run.outputs.values()}
                       | {text_key(t) for t in references.values()}),
                8, seed=1,
            ),
        )
        report = run_benchmark(
            systems, references, [5.0, 2.0], metrics=["bleu1", "rougeL"],
            model=init_params(config, 0), model_config=config, feature_store=feats,
        )
        assert len(report.table.columns) == 3
        assert "cosmic" in report.table.columns
        assert "cosmic_clamped" in report.extras
        assert all(0.0 <= v <= 1.0 for v in report.extras["cosmic_clamped"])

    def test_coverage_mismatch(self):
        references, systems = toy_setup()
        broken = SystemRun("partial", CoherenceLabel.META, {"k1": "just one"})
        with pytest.raises(BenchmarkError, match="partial"):
            run_benchmark([systems[0], broken], references, [1.0, 2.0], metrics=["bleu1"])

    def test_missing_model_features(self):
        references, systems = toy_setup()
        config = ModelConfig(image_dim=8, text_dim=8, embed_dim=4, hidden_sizes=(4,))
        with pytest.raises(BenchmarkError, match="features"):
            run_benchmark(systems, references, [1.0, 2.0], metrics=["bleu1"],
                          model=init_params(config, 0), model_config=config)

    def test_human_means_length(self):
        references, systems = toy_setup()
        with pytest.raises(BenchmarkError, match="human"):
            run_benchmark(systems, references, [1.0], metrics=["bleu1"])


class TestRendering:
    def test_report_round_trip_dict(self):
        report = build_report(published_benchmark_table(), include_tau_a=True)
        payload = report_to_dict(report)
        assert payload["best_metric"] == report.best_metric
        assert set(payload["taus"]) == set(report.table.columns)
        assert "taus_a" in payload

    def test_format_report_mentions_best(self):
        report = build_report(published_benchmark_table())
        text = format_report(report)
        assert "best metric: cosmic_vilbert_plus" in text
        assert "Base-Visible" in text.splitlines()[1]
