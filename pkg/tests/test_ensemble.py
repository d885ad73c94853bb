import numpy as np
import pytest

from modelmarket.data import Dataset
from modelmarket.ensemble import evaluate_team, fuse, vote
from modelmarket.errors import InvalidInputError, NotFoundError
from modelmarket.market import ModelRecord
from modelmarket.selection import EnsembleTeam
from modelmarket.training import LayerParams, ModelParams, accuracy

from oracles import lookup_record, weighted_vote_bruteforce


def constant_record(record_id, klass, n_classes, n_train=1, score=0.9,
                    input_dim=2):
    """A model that predicts ``klass`` for every input (bias-only)."""
    bias = np.zeros(n_classes)
    bias[klass] = 10.0
    params = ModelParams(
        "softmax", input_dim, n_classes,
        (
            LayerParams("out", (input_dim, n_classes), np.zeros(input_dim * n_classes)),
            LayerParams("out_bias", (n_classes,), bias),
        ),
    )
    return ModelRecord(id=record_id, params=params, n_train=n_train, score=score)


def team_of(records, method="rs"):
    return EnsembleTeam(method, tuple(r.id for r in records),
                        tuple(r.n_train for r in records))


class TestVote:
    def test_weight_dominant_member_wins(self):
        records = [
            constant_record("a", 2, 3, n_train=3),
            constant_record("b", 1, 3, n_train=1),
            constant_record("c", 1, 3, n_train=1),
        ]
        result = vote(team_of(records), records, np.zeros((4, 2)))
        np.testing.assert_array_equal(result.labels, np.full(4, 2))
        np.testing.assert_allclose(result.tallies[0], [0.0, 0.4, 0.6])

    def test_unanimous_vote(self):
        records = [constant_record(f"r{i}", 1, 3, n_train=i + 1) for i in range(4)]
        result = vote(team_of(records), records, np.zeros((3, 2)))
        np.testing.assert_array_equal(result.labels, np.ones(3))

    def test_tie_breaks_to_lower_class(self):
        records = [
            constant_record("a", 0, 2, n_train=5),
            constant_record("b", 1, 2, n_train=5),
        ]
        result = vote(team_of(records), records, np.zeros((2, 2)))
        np.testing.assert_array_equal(result.labels, np.zeros(2))

    def test_unknown_member_id(self):
        records = [constant_record("a", 0, 2)]
        team = EnsembleTeam("rs", ("a", "ghost"), (1, 1))
        with pytest.raises(NotFoundError):
            vote(team, records, np.zeros((1, 2)))

    def test_weight_scale_invariance(self):
        rng = np.random.default_rng(0)
        preds = rng.integers(0, 4, size=(3, 12))
        records = [lookup_record(f"m{j}", preds[j], 4, n_train=(j + 1) * 3)
                   for j in range(3)]
        X = np.eye(12)
        base = vote(team_of(records), records, X)
        scaled_team = EnsembleTeam("rs", tuple(r.id for r in records),
                                   tuple(r.n_train * 11 for r in records))
        scaled = vote(scaled_team, records, X)
        np.testing.assert_array_equal(base.labels, scaled.labels)

    def test_member_order_invariance(self):
        rng = np.random.default_rng(1)
        preds = rng.integers(0, 3, size=(4, 10))
        records = [lookup_record(f"m{j}", preds[j], 3, n_train=j + 2)
                   for j in range(4)]
        X = np.eye(10)
        forward = vote(team_of(records), records, X)
        backward = vote(team_of(records[::-1]), records, X)
        np.testing.assert_array_equal(forward.labels, backward.labels)

    def test_duplicate_member_shifts_argmax(self):
        # Two members disagree with equal weight (tie -> class 0); a third
        # ballot duplicating member b flips the argmax to b's class.
        a = lookup_record("a", [0, 0], 2, n_train=1)
        b = lookup_record("b", [1, 1], 2, n_train=1)
        b2 = lookup_record("b2", [1, 1], 2, n_train=1)
        X = np.eye(2)
        tied = vote(team_of([a, b]), [a, b], X)
        np.testing.assert_array_equal(tied.labels, [0, 0])
        shifted = vote(team_of([a, b, b2]), [a, b, b2], X)
        np.testing.assert_array_equal(shifted.labels, [1, 1])

    def test_matches_bruteforce_on_random_fixtures(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            n_members = int(rng.integers(1, 6))
            n_samples = int(rng.integers(1, 9))
            n_classes = int(rng.integers(2, 5))
            preds = rng.integers(0, n_classes, size=(n_members, n_samples))
            weights = rng.integers(1, 20, size=n_members)
            records = [
                lookup_record(f"m{j}", preds[j], n_classes, n_train=int(weights[j]))
                for j in range(n_members)
            ]
            result = vote(team_of(records), records, np.eye(n_samples))
            expected = weighted_vote_bruteforce(preds, weights, n_classes)
            np.testing.assert_array_equal(result.labels, expected)


class TestFuse:
    def two_records(self, values_a, values_b, n_a=3, n_b=1):
        def rec(rid, values, n):
            params = ModelParams(
                "softmax", 2, 2,
                (
                    LayerParams("out", (2, 2), np.full(4, values)),
                    LayerParams("out_bias", (2,), np.full(2, values)),
                ),
            )
            return ModelRecord(id=rid, params=params, n_train=n, score=0.5)

        return [rec("a", values_a, n_a), rec("b", values_b, n_b)]

    def test_identical_models_unchanged(self):
        records = self.two_records(1.5, 1.5)
        for method in ("fedavg", "meanavg"):
            fused = fuse(records, method)
            for layer in fused.layers:
                np.testing.assert_allclose(layer.values, 1.5)

    def test_fedavg_weighted_average(self):
        records = self.two_records(0.0, 1.0, n_a=3, n_b=1)
        fused = fuse(records, "fedavg")
        for layer in fused.layers:
            np.testing.assert_allclose(layer.values, 0.25)

    def test_equal_sizes_match_meanavg(self):
        records = self.two_records(0.2, 0.8, n_a=4, n_b=4)
        fed = fuse(records, "fedavg")
        mean = fuse(records, "meanavg")
        for fl, ml in zip(fed.layers, mean.layers):
            np.testing.assert_allclose(fl.values, ml.values, atol=1e-12)

    def test_shape_mismatch_names_layer(self):
        records = self.two_records(0.0, 1.0)
        other = ModelParams(
            "softmax", 3, 2,
            (
                LayerParams("out", (3, 2), np.zeros(6)),
                LayerParams("out_bias", (2,), np.zeros(2)),
            ),
        )
        records[1] = ModelRecord(id="b", params=other, n_train=1, score=0.5)
        with pytest.raises(InvalidInputError, match="'out'"):
            fuse(records, "fedavg")


class TestEvaluateTeam:
    def test_singleton_team_equals_model_accuracy(self):
        rng = np.random.default_rng(3)
        preds = rng.integers(0, 3, size=8)
        record = lookup_record("solo", preds, 3, n_train=5)
        y = rng.integers(0, 3, size=8)
        ds = Dataset(np.eye(8), y, 3)
        team = team_of([record])
        assert evaluate_team(team, [record], ds) == accuracy(record.params, ds)

    def test_all_correct_team(self):
        y = np.array([0, 1, 2, 1])
        records = [lookup_record(f"m{j}", y, 3, n_train=j + 1) for j in range(3)]
        ds = Dataset(np.eye(4), y, 3)
        assert evaluate_team(team_of(records), records, ds) == 1.0

    def test_matches_bruteforce_accuracy(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            n_samples = int(rng.integers(3, 10))
            preds = rng.integers(0, 3, size=(3, n_samples))
            weights = rng.integers(1, 9, size=3)
            y = rng.integers(0, 3, size=n_samples)
            records = [
                lookup_record(f"m{j}", preds[j], 3, n_train=int(weights[j]))
                for j in range(3)
            ]
            ds = Dataset(np.eye(n_samples), y, 3)
            got = evaluate_team(team_of(records), records, ds)
            expected = float(np.mean(
                weighted_vote_bruteforce(preds, weights, 3) == y
            ))
            assert got == expected

    def test_empty_testset_rejected(self):
        record = constant_record("a", 0, 2)
        ds = Dataset(np.zeros((0, 2)), np.zeros(0, dtype=int), 2)
        with pytest.raises(InvalidInputError):
            evaluate_team(team_of([record]), [record], ds)
