"""Metrics against brute-force oracles, the logistic baseline, and the
comparison table."""

import io
import math
import random

import pytest

from helpers import rel_close
from nodeclf.errors import (ConfigError, DataFormatError, DimensionError,
                            UndefinedMetricError)
from nodeclf.evaluation import (EvalResult, accuracy, auroc,
                                balanced_accuracy, benchmark,
                                binary_logistic_gradient, f1, f1_macro,
                                format_benchmark_table, logistic_scorer,
                                parse_score_file, result_from_scores,
                                train_logistic, write_benchmark_csv)
from nodeclf.linalg import Vector
from nodeclf.model import LabeledDataset, TrainConfig
from nodeclf.text import fit, transform


def brute_force_auroc(labels, scores):
    wins = 0.0
    pairs = 0
    for i, yi in enumerate(labels):
        if yi != 1:
            continue
        for j, yj in enumerate(labels):
            if yj == 1:
                continue
            pairs += 1
            if scores[i] > scores[j]:
                wins += 1.0
            elif scores[i] == scores[j]:
                wins += 0.5
    return wins / pairs


class TestAccuracy:
    def test_perfect(self):
        assert accuracy([1, 0, 1], [1, 0, 1]) == 1.0

    def test_disjoint(self):
        assert accuracy([1, 1, 1], [0, 0, 0]) == 0.0

    def test_hand_count(self):
        assert accuracy([1, 0, 1, 0], [1, 1, 1, 0]) == 0.75

    def test_errors(self):
        with pytest.raises(DimensionError):
            accuracy([1], [1, 0])
        with pytest.raises(ConfigError):
            accuracy([], [])


class TestF1:
    def test_perfect(self):
        assert f1([1, 0, 1], [1, 0, 1]) == 1.0

    def test_hand_computation(self):
        # TP=2, FP=1, FN=1 -> precision = recall = 2/3 -> F1 = 2/3
        labels = [1, 1, 1, 0, 0]
        preds = [1, 1, 0, 1, 0]
        assert f1(labels, preds) == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_no_positives_convention(self):
        assert f1([0, 0], [0, 0]) == 0.0

    def test_permutation_invariance(self):
        rng = random.Random(71)
        labels = [rng.randrange(2) for _ in range(30)]
        preds = [rng.randrange(2) for _ in range(30)]
        order = list(range(30))
        rng.shuffle(order)
        assert f1(labels, preds) == f1([labels[i] for i in order],
                                       [preds[i] for i in order])

    def test_macro(self):
        labels = [0, 0, 1, 1, 2, 2]
        preds = [0, 0, 1, 0, 2, 2]
        per_class = [f1(labels, preds, c) for c in (0, 1, 2)]
        assert f1_macro(labels, preds) == pytest.approx(sum(per_class) / 3)


class TestAuroc:
    def test_perfectly_separated(self):
        assert auroc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == 1.0

    def test_all_ties(self):
        assert auroc([0, 1, 0, 1], [0.5, 0.5, 0.5, 0.5]) == 0.5

    def test_worked_example(self):
        assert auroc([1, 0, 1, 0], [0.9, 0.8, 0.4, 0.2]) == 0.75

    def test_single_class_undefined(self):
        with pytest.raises(UndefinedMetricError):
            auroc([1, 1], [0.2, 0.3])

    def test_matches_brute_force_exactly(self):
        rng = random.Random(72)
        for trial in range(50):
            n = rng.randint(2, 50)
            labels = [rng.randrange(2) for _ in range(n)]
            if len(set(labels)) < 2:
                labels[0] = 0
                labels[1] = 1
            # coarse scores so ties actually happen
            scores = [rng.choice((0.0, 0.25, 0.5, 0.75, 1.0)) for _ in range(n)]
            assert auroc(labels, scores) == brute_force_auroc(labels, scores), \
                f"trial {trial}"

    def test_monotone_transform_invariance(self):
        rng = random.Random(73)
        labels = [rng.randrange(2) for _ in range(40)]
        labels[0], labels[1] = 0, 1
        scores = [rng.uniform(-5, 5) for _ in range(40)]
        transformed = [math.tanh(s) * 3.0 + 7.0 for s in scores]
        assert auroc(labels, scores) == auroc(labels, transformed)


class TestBalancedAccuracy:
    def test_perfect(self):
        assert balanced_accuracy([0, 1, 2], [0, 1, 2]) == 1.0

    def test_hand_computation(self):
        assert balanced_accuracy([1, 1, 0], [1, 0, 0]) == 0.75

    def test_majority_class_predictor(self):
        labels = [0] * 90 + [1] * 10
        preds = [0] * 100
        assert balanced_accuracy(labels, preds) == 0.5

    def test_equals_accuracy_on_balanced_equal_recalls(self):
        labels = [0, 0, 1, 1]
        preds = [0, 1, 1, 0]  # both recalls 0.5
        assert balanced_accuracy(labels, preds) == accuracy(labels, preds)


SEPARABLE = [
    ("admit ward severe", 1), ("admit oxygen acute", 1),
    ("ward admit monitor", 1), ("admit severe oxygen", 1),
    ("home rest walk", 0), ("walk home mild", 0),
    ("rest mild home", 0), ("home walk rest", 0),
]


class TestLogistic:
    def test_zero_init_scores_half(self):
        tfidf = fit([t for t, _ in SEPARABLE])
        lm = train_logistic(LabeledDataset(SEPARABLE), tfidf,
                            TrainConfig(epochs=0))
        for text, _ in SEPARABLE:
            assert lm.probabilities(transform(tfidf, text))[1] == 0.5

    def test_gradient_matches_finite_differences(self):
        rng = random.Random(74)
        nv = 5
        w = Vector.of(rng.uniform(-1, 1) for _ in range(nv))
        b = rng.uniform(-1, 1)
        batch = []
        for _ in range(6):
            x = Vector.of(rng.uniform(0, 1) for _ in range(nv))
            batch.append((x, rng.randrange(2)))
        gw, gb = binary_logistic_gradient(w, b, batch)

        def loss_at(ww, bb):
            total = 0.0
            for x, y in batch:
                z = sum(ww[i] * x[i] for i in range(nv)) + bb
                p = 1.0 / (1.0 + math.exp(-z))
                total -= math.log(p) if y == 1 else math.log(1.0 - p)
            return total / len(batch)

        eps = 1e-6
        for i in range(nv):
            wp = w.copy()
            wp.data[i] += eps
            wm = w.copy()
            wm.data[i] -= eps
            fd = (loss_at(wp, b) - loss_at(wm, b)) / (2 * eps)
            assert rel_close(gw[i], fd, 1e-6, floor=1e-10)
        fd_b = (loss_at(w, b + eps) - loss_at(w, b - eps)) / (2 * eps)
        assert rel_close(gb, fd_b, 1e-6, floor=1e-10)

    def test_separable_set_fits_in_500_iterations(self):
        tfidf = fit([t for t, _ in SEPARABLE])
        lm = train_logistic(LabeledDataset(SEPARABLE), tfidf,
                            TrainConfig(epochs=500, learning_rate=1.0))
        scorer = logistic_scorer(lm, tfidf)
        hits = sum(1 for text, label in SEPARABLE if scorer(text)[0] == label)
        assert hits == len(SEPARABLE)

    def test_multiclass(self):
        texts = [
            ("alpha alpha", 0), ("alpha beta alpha", 0),
            ("beta beta gamma", 1), ("beta beta", 1),
            ("gamma gamma delta", 2), ("gamma delta gamma", 2),
        ]
        tfidf = fit([t for t, _ in texts])
        lm = train_logistic(LabeledDataset(texts), tfidf,
                            TrainConfig(epochs=800, learning_rate=2.0))
        scorer = logistic_scorer(lm, tfidf)
        hits = sum(1 for text, label in texts if scorer(text)[0] == label)
        assert hits == len(texts)
        probs = scorer("alpha alpha")[1]
        assert abs(sum(probs) - 1.0) <= 1e-12

    def test_single_class_rejected(self):
        tfidf = fit(["a", "b"])
        with pytest.raises(ConfigError):
            train_logistic(LabeledDataset([("a", 0), ("b", 0)]), tfidf,
                           TrainConfig())


class TestBenchmark:
    def test_perfect_scorer_row(self):
        texts = [("admit now", 1), ("go home", 0), ("admit ward", 1),
                 ("home rest", 0)]
        tfidf = fit([t for t, _ in texts])
        truth = dict(texts)

        def oracle(text):
            label = truth[text]
            return label, [1.0 - label, float(label)]

        rows = benchmark([("oracle", True, oracle)], LabeledDataset(texts),
                         tfidf)
        assert len(rows) == 1
        row = rows[0]
        assert row.accuracy == 1.0 and row.f1 == 1.0 and row.auroc == 1.0
        assert row.balanced_accuracy == 1.0

    def test_empty_model_list(self):
        texts = [("a", 0), ("b", 1)]
        tfidf = fit(["a b"])
        assert benchmark([], LabeledDataset(texts), tfidf) == []

    def test_errors_name_the_model(self):
        texts = [("a", 0), ("b", 1)]
        tfidf = fit(["a b"])

        def broken(text):
            raise ValueError("boom")

        with pytest.raises(ValueError) as err:
            benchmark([("bad", False, broken)], LabeledDataset(texts), tfidf)
        assert "bad" in str(err.value)

    def test_multiclass_ovr_auroc(self):
        texts = [("a", 0), ("b", 1), ("c", 2), ("a a", 0), ("b b", 1),
                 ("c c", 2)]
        tfidf = fit(["a b c"])
        truth = {t: l for t, l in texts}

        def oracle(text):
            label = truth[text]
            probs = [0.1, 0.1, 0.1]
            probs[label] = 0.8
            return label, probs

        rows = benchmark([("oracle", True, oracle)], LabeledDataset(texts),
                         tfidf, ovr_auroc=True)
        assert rows[0].auroc == 1.0
        rows = benchmark([("oracle", True, oracle)], LabeledDataset(texts),
                         tfidf)
        assert rows[0].auroc is None


class TestScoreFiles:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "scores.csv"
        path.write_text("# comment\n1,0.9\n0,0.1\n1,0.8\n0,0.3\n")
        labels, scores = parse_score_file(str(path))
        assert labels == [1, 0, 1, 0]
        row = result_from_scores("ext", False, labels, scores)
        assert row.auroc == 1.0 and row.accuracy == 1.0

    def test_malformed_line_number(self, tmp_path):
        path = tmp_path / "scores.csv"
        path.write_text("1,0.9\nnot-a-row\n")
        with pytest.raises(DataFormatError) as err:
            parse_score_file(str(path))
        assert err.value.line == 2

    def test_threshold(self):
        row = result_from_scores("ext", False, [1, 0], [0.6, 0.55],
                                 threshold=0.58)
        assert row.accuracy == 1.0


class TestTableOutput:
    def rows(self):
        return [
            EvalResult("neural_ode", True, 0.95, 0.9450001, 0.97, 0.95),
            EvalResult("baseline", True, 0.9, 0.9, None, 0.9),
        ]

    def test_aligned_table(self):
        table = format_benchmark_table(self.rows())
        lines = table.splitlines()
        assert lines[0].startswith("model")
        assert "neural_ode" in lines[1]
        assert "-" in lines[2]  # missing auroc

    def test_csv(self):
        buf = io.StringIO()
        write_benchmark_csv(self.rows(), buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "model,interpretable,accuracy,f1,auroc,balanced_accuracy"
        assert lines[1].startswith("neural_ode,yes,")
        assert lines[2].split(",")[4] == ""
