"""Diversity metrics, exhaustive team inspection, K sweeps, and reports.

Complete inspection scores every non-empty subset of the records (2^m - 1
teams) under the same size-weighted vote used for inference. Subsets are
enumerated in Gray-code order so each step updates the running tally by a
single member; tallies are integer-valued, so the enumeration is exact.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import InvalidInputError, ResourceError, StorageError
from .market import ModelRecord
from .selection import EnsembleTeam, SelectionConfig, dedes_select
from .ensemble import evaluate_team
from .training import predict

DEFAULT_INSPECTION_CAP = 16


def binary_disagreement(preds_a, preds_b) -> float:
    """Fraction of positions where the two prediction sequences differ."""
    a = np.asarray(preds_a)
    b = np.asarray(preds_b)
    if a.shape != b.shape or a.size == 0:
        raise InvalidInputError("prediction sequences must share a non-zero length")
    return float(np.mean(a != b))


def cohens_kappa(preds_a, preds_b, n_classes: int) -> float:
    """Chance-corrected agreement; 1 when expected agreement is already 1."""
    a = np.asarray(preds_a, dtype=np.int64)
    b = np.asarray(preds_b, dtype=np.int64)
    if a.shape != b.shape or a.size == 0:
        raise InvalidInputError("prediction sequences must share a non-zero length")
    if a.min() < 0 or b.min() < 0 or a.max() >= n_classes or b.max() >= n_classes:
        raise InvalidInputError(f"labels must lie in [0, {n_classes})")
    p_o = float(np.mean(a == b))
    marg_a = np.bincount(a, minlength=n_classes) / a.size
    marg_b = np.bincount(b, minlength=n_classes) / b.size
    p_e = float(marg_a @ marg_b)
    if p_e == 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def team_diversity(team: EnsembleTeam, records: list[ModelRecord],
                   testset: Dataset) -> tuple[float, float]:
    """Mean pairwise (binary disagreement, Cohen's kappa) over the team."""
    if len(team) < 2:
        raise InvalidInputError("diversity needs at least two team members")
    by_id = {r.id: r for r in records}
    preds = [predict(by_id[mid].params, testset.X) for mid in team.member_ids]
    n_classes = by_id[team.member_ids[0]].params.n_classes

    bd_values, ck_values = [], []
    for i in range(len(preds)):
        for j in range(i + 1, len(preds)):
            bd_values.append(binary_disagreement(preds[i], preds[j]))
            ck_values.append(cohens_kappa(preds[i], preds[j], n_classes))
    return float(np.mean(bd_values)), float(np.mean(ck_values))


@dataclass(frozen=True)
class InspectionResult:
    """All non-empty teams ranked by vote accuracy (ties: smaller mask)."""

    ids: tuple[str, ...]                      # bit i of a mask <-> ids[i]
    ranked: tuple[tuple[int, float], ...]     # (mask, accuracy), best first

    @property
    def total(self) -> int:
        return len(self.ranked)

    def mask_of(self, member_ids) -> int:
        bit = {rid: i for i, rid in enumerate(self.ids)}
        mask = 0
        for rid in member_ids:
            if rid not in bit:
                raise InvalidInputError(f"unknown record id {rid!r}")
            mask |= 1 << bit[rid]
        return mask

    def rank_of(self, team) -> int:
        """1-based rank of the team (an EnsembleTeam or iterable of ids)."""
        member_ids = team.member_ids if isinstance(team, EnsembleTeam) else team
        mask = self.mask_of(member_ids)
        for position, (candidate, _) in enumerate(self.ranked, start=1):
            if candidate == mask:
                return position
        raise InvalidInputError("team not found in inspection")

    def accuracy_of(self, team) -> float:
        member_ids = team.member_ids if isinstance(team, EnsembleTeam) else team
        mask = self.mask_of(member_ids)
        for candidate, acc in self.ranked:
            if candidate == mask:
                return acc
        raise InvalidInputError("team not found in inspection")


def complete_inspection(records: list[ModelRecord], testset: Dataset,
                        m_cap: int = DEFAULT_INSPECTION_CAP) -> InspectionResult:
    """Vote accuracy of every non-empty subset of ``records``.

    Guarded by ``m_cap`` since the team count grows as 2^m - 1.
    """
    m = len(records)
    if m < 1:
        raise InvalidInputError("need at least one record")
    if m > m_cap:
        raise ResourceError(
            f"complete inspection of {m} records means {2 ** m - 1} teams; "
            f"cap is {m_cap}"
        )
    if testset.n == 0:
        raise InvalidInputError("test set is empty")

    preds = np.stack([predict(r.params, testset.X) for r in records])
    weights = [int(r.n_train) for r in records]
    n = testset.n

    # Integer tallies updated one member at a time in Gray-code order keep
    # the enumeration exact: no float drift across 2^m updates.
    tally = np.zeros((n, records[0].params.n_classes), dtype=np.int64)
    rows = np.arange(n)
    entries: list[tuple[int, float]] = []
    prev_mask = 0
    for i in range(1, 2 ** m):
        mask = i ^ (i >> 1)
        bit = (mask ^ prev_mask).bit_length() - 1
        if mask & (1 << bit):
            tally[rows, preds[bit]] += weights[bit]
        else:
            tally[rows, preds[bit]] -= weights[bit]
        prev_mask = mask
        predicted = np.argmax(tally, axis=1)
        entries.append((mask, float(np.mean(predicted == testset.y))))

    entries.sort(key=lambda e: (-e[1], e[0]))
    return InspectionResult(tuple(r.id for r in records), tuple(entries))


@dataclass(frozen=True)
class SweepPoint:
    K: int
    accuracy: float


@dataclass(frozen=True)
class SweepSeries:
    points: tuple[SweepPoint, ...]
    failures: tuple[tuple[int, str], ...] = ()

    def as_lists(self) -> dict:
        return {
            "K": [p.K for p in self.points],
            "accuracy": [p.accuracy for p in self.points],
            "failures": [{"K": k, "error": msg} for k, msg in self.failures],
        }


def k_sweep(records: list[ModelRecord], testset: Dataset,
            cfg: SelectionConfig, Ks) -> SweepSeries:
    """Select and evaluate one team per requested K; failures are recorded
    per K and do not abort the remaining points."""
    points, failures = [], []
    for K in sorted(Ks):
        try:
            team = dedes_select(records, int(K), cfg)
            points.append(SweepPoint(int(K), evaluate_team(team, records, testset)))
        except InvalidInputError as exc:
            failures.append((int(K), str(exc)))
    return SweepSeries(tuple(points), tuple(failures))


REPORT_COLUMNS = (
    "dataset", "partition", "m", "K", "method", "seed",
    "accuracy", "mean_bd", "mean_ck", "rank", "total_teams",
)


@dataclass(frozen=True)
class ReportRow:
    """One evaluated method on one seed; diversity and rank are optional."""

    dataset: str
    partition: str
    m: int
    K: int
    method: str
    seed: int
    accuracy: float
    mean_bd: float | None = None
    mean_ck: float | None = None
    rank: int | None = None
    total_teams: int | None = None

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in REPORT_COLUMNS}


@dataclass(frozen=True)
class ReportBundle:
    rows: tuple[ReportRow, ...]
    sweeps: tuple[dict, ...] = ()       # sweep series dicts, plot-ready
    aggregates: tuple[dict, ...] = ()   # per-method stats across seeds

    def as_dict(self) -> dict:
        return {
            "schema_version": 1,
            "rows": [row.as_dict() for row in self.rows],
            "sweeps": list(self.sweeps),
            "aggregates": list(self.aggregates),
        }


def emit_report(bundle: ReportBundle, path, fmt: str) -> None:
    """Write the report as ``csv`` (rows only) or ``json`` (everything)."""
    if fmt not in ("csv", "json"):
        raise InvalidInputError(f"unknown report format: {fmt!r}")
    try:
        if fmt == "csv":
            with open(path, "w", newline="", encoding="utf-8") as handle:
                writer = csv.writer(handle)
                writer.writerow(REPORT_COLUMNS)
                for row in bundle.rows:
                    record = row.as_dict()
                    writer.writerow(
                        ["" if record[c] is None else record[c]
                         for c in REPORT_COLUMNS]
                    )
        else:
            with open(path, "w", encoding="utf-8") as handle:
                json.dump(bundle.as_dict(), handle, indent=1, sort_keys=True)
                handle.write("\n")
    except OSError as exc:
        raise StorageError(f"failed to write report to {path}: {exc}") from exc
