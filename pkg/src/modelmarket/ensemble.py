"""Team inference by size-weighted plurality voting, plus the two
parameter-fusion baselines (size-weighted and plain averaging).

Each member casts a hard-label ballot per sample, weighted by its share of
the team's total training data; the predicted class is the tally argmax
with ties going to the lower class index. Per-sample votes are independent,
so concurrent evaluation gives results identical to sequential order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import InvalidInputError, NotFoundError
from .market import ModelRecord
from .selection import EnsembleTeam
from .training import LayerParams, ModelParams, predict


@dataclass(frozen=True)
class VoteResult:
    """Predicted labels plus the per-class weight tally behind each one."""

    labels: np.ndarray    # (n_samples,)
    tallies: np.ndarray   # (n_samples, n_classes), rows sum to 1


def _resolve_members(team: EnsembleTeam, records: list[ModelRecord]):
    by_id = {r.id: r for r in records}
    members = []
    for member_id in team.member_ids:
        if member_id not in by_id:
            raise NotFoundError(f"team member {member_id!r} not in records")
        members.append(by_id[member_id])
    return members


def vote(team: EnsembleTeam, records: list[ModelRecord], X) -> VoteResult:
    """Size-weighted plurality vote of the team's members over rows of X."""
    members = _resolve_members(team, records)
    weights = np.asarray(team.weights, dtype=np.float64)
    weights = weights / weights.sum()

    n_classes = members[0].params.n_classes
    A = np.asarray(X, dtype=np.float64)
    tallies = np.zeros((A.shape[0], n_classes))
    for member, w in zip(members, weights):
        preds = predict(member.params, A)
        tallies[np.arange(A.shape[0]), preds] += w
    return VoteResult(np.argmax(tallies, axis=1), tallies)


def fuse(records: list[ModelRecord], method: str) -> ModelParams:
    """Layer-wise parameter average: ``fedavg`` weights by training-set
    size, ``meanavg`` weights uniformly."""
    if method not in ("fedavg", "meanavg"):
        raise InvalidInputError(f"unknown fusion method: {method!r}")
    if not records:
        raise InvalidInputError("need at least one record to fuse")

    first = records[0].params
    for rec in records[1:]:
        if rec.params.arch != first.arch:
            raise InvalidInputError(
                f"record {rec.id!r}: architecture {rec.params.arch!r} "
                f"does not match {first.arch!r}"
            )
        for layer, ref in zip(rec.params.layers, first.layers):
            if layer.name != ref.name or layer.shape != ref.shape:
                raise InvalidInputError(
                    f"record {rec.id!r} layer {layer.name!r}: shape "
                    f"{layer.shape} does not match {ref.shape}"
                )

    if method == "fedavg":
        weights = np.asarray([r.n_train for r in records], dtype=np.float64)
        weights = weights / weights.sum()
    else:
        weights = np.full(len(records), 1.0 / len(records))

    layers = []
    for idx, ref in enumerate(first.layers):
        stacked = np.stack([r.params.layers[idx].values for r in records])
        layers.append(LayerParams(ref.name, ref.shape, weights @ stacked))
    return ModelParams(first.arch, first.input_dim, first.n_classes, tuple(layers))


def evaluate_team(team: EnsembleTeam, records: list[ModelRecord],
                  testset: Dataset) -> float:
    """Accuracy of the team's weighted vote on the given samples."""
    if testset.n == 0:
        raise InvalidInputError("test set is empty")
    result = vote(team, records, testset.X)
    return float(np.mean(result.labels == testset.y))
