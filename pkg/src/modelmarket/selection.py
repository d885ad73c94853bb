"""Ensemble-team selection.

``dedes_select`` runs the data-free diversity pipeline: filter outlier
models by score, build a parameter-based representation row per survivor,
cluster the rows into K groups, then pick one representative per cluster.
``baseline_select`` provides the reference selectors: top-K by validation
score (cv), top-K by training-set size (ds), seeded random (rs), everything
(as), and the ground-truth variant that clusters label distributions
instead of parameters (lds).

The whole pipeline is pure: evaluating several configs concurrently over a
shared record list is safe.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .clustering import ClusterAssignment, cluster
from .errors import InvalidInputError
from .linalg import fit_apply_scaler, kernel_pca, pca
from .market import ModelRecord

SELECTION_METHODS = ("dedes", "cv", "ds", "rs", "as", "lds")
LAYER_STRATEGIES = ("last", "first", "middle", "later", "random_fraction")
DR_METHODS = ("none", "pca", "kpca")

# Default clustering per partition tag; anything unknown falls back to
# k-means.  Spectral suits the near-identical models produced by the two
# IID partitions, k-means the skewed ones.
_CLUSTERING_BY_PARTITION = {
    "homo": "spectral",
    "iid_dq": "spectral",
    "noniid_lds": "kmeans",
    "noniid_lk": "kmeans",
}


@dataclass(frozen=True)
class SelectionConfig:
    """Knobs for the selection pipeline (defaults follow the standard recipe)."""

    K: int = 1
    tau: float = 0.3
    outlier_low: float = 0.25
    outlier_high: float = 0.75
    outlier_scale: float = 1.5
    layer_strategy: str = "last"
    layer_fraction: float = 0.1   # used by random_fraction
    dr_method: str = "none"
    dr_dim: int | None = None     # None = auto (min of flat dim and survivors)
    clustering: str = "auto"      # auto resolves from the records' partition tag
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise InvalidInputError("K must be at least 1")
        if not 0.0 < self.tau <= 1.0:
            raise InvalidInputError("tau must lie in (0, 1]")
        if not 0.0 <= self.outlier_low < self.outlier_high <= 1.0:
            raise InvalidInputError("need 0 <= outlier_low < outlier_high <= 1")
        if self.outlier_scale < 0.0:
            raise InvalidInputError("outlier_scale must be non-negative")
        if self.layer_strategy not in LAYER_STRATEGIES:
            raise InvalidInputError(f"unknown layer strategy: {self.layer_strategy!r}")
        if self.layer_strategy == "random_fraction" and not 0.0 < self.layer_fraction <= 1.0:
            raise InvalidInputError("layer_fraction must lie in (0, 1]")
        if self.dr_method not in DR_METHODS:
            raise InvalidInputError(f"unknown dr method: {self.dr_method!r}")
        if self.clustering not in ("auto", "kmeans", "spectral", "agglomerative"):
            raise InvalidInputError(f"unknown clustering method: {self.clustering!r}")


@dataclass(frozen=True)
class RepresentationMatrix:
    """One row per surviving model, aligned with ``ids``."""

    ids: tuple[str, ...]
    matrix: np.ndarray


@dataclass(frozen=True)
class EnsembleTeam:
    """Selected member ids with their training-set sizes as voting weights."""

    method: str
    member_ids: tuple[str, ...]
    weights: tuple[int, ...]

    def __post_init__(self):
        if self.method not in SELECTION_METHODS:
            raise InvalidInputError(f"unknown selection method: {self.method!r}")
        if len(set(self.member_ids)) != len(self.member_ids):
            raise InvalidInputError("team member ids must be distinct")
        if len(self.weights) != len(self.member_ids):
            raise InvalidInputError("one weight per member required")
        if any(w <= 0 for w in self.weights):
            raise InvalidInputError("weights must be positive")

    def __len__(self) -> int:
        return len(self.member_ids)


@dataclass(frozen=True)
class SelectionDebug:
    """Everything the pipeline saw, for inspection tooling."""

    team: EnsembleTeam
    outlier_ids: tuple[str, ...]
    representation: RepresentationMatrix
    assignment: ClusterAssignment
    clustering_method: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "method": self.team.method,
                "team": list(self.team.member_ids),
                "weights": list(self.team.weights),
                "outliers": list(self.outlier_ids),
                "clustering_method": self.clustering_method,
                "cluster_labels": {
                    rid: int(label)
                    for rid, label in zip(self.representation.ids,
                                          self.assignment.labels)
                },
                "representation": {
                    "ids": list(self.representation.ids),
                    "matrix": self.representation.matrix.tolist(),
                },
            },
            indent=1,
            sort_keys=True,
        )


def outlier_filter(records: list[ModelRecord], cfg: SelectionConfig) -> set[str]:
    """Ids of records whose score falls strictly below the box threshold.

    With scores sorted ascending, the quantile positions are index
    floor(p * (m - 1)); the threshold is q_low - scale * (q_high - q_low).
    """
    if not records:
        raise InvalidInputError("need at least one record")
    scores = sorted(r.score for r in records)
    m = len(scores)
    q_low = scores[math.floor(cfg.outlier_low * (m - 1))]
    q_high = scores[math.floor(cfg.outlier_high * (m - 1))]
    threshold = q_low - cfg.outlier_scale * (q_high - q_low)
    return {r.id for r in records if r.score < threshold}


def _logical_layer_names(records: list[ModelRecord], cfg: SelectionConfig) -> list[str]:
    """Which logical layers feed the representation, per the layer strategy."""
    groups = records[0].params.logical_layers()
    n = len(groups)
    if cfg.layer_strategy == "last":
        picked = [n - 1]
    elif cfg.layer_strategy == "first":
        picked = [0]
    elif cfg.layer_strategy == "middle":
        picked = [(n - 1) // 2]
    elif cfg.layer_strategy == "later":
        picked = [max(n - 2, 0)]
    else:  # random_fraction: same seeded draw for every model
        count = math.ceil(cfg.layer_fraction * n)
        rng = np.random.default_rng(cfg.seed)
        picked = sorted(rng.choice(n, size=count, replace=False).tolist())
    return [groups[i][0] for i in picked]


def represent(records: list[ModelRecord], cfg: SelectionConfig) -> RepresentationMatrix:
    """Flatten the selected layer(s) of each model into a scaled, reduced row.

    Records must share one architecture and layer shapes. Columns are
    minmax-scaled; the optional dimension reduction defaults its target to
    min(flat dim, record count).
    """
    if len(records) < 2:
        raise InvalidInputError("need at least two records to represent")
    first = records[0].params
    for rec in records[1:]:
        shapes = [(l.name, l.shape) for l in rec.params.layers]
        if rec.params.arch != first.arch or shapes != [(l.name, l.shape) for l in first.layers]:
            raise InvalidInputError(
                f"record {rec.id!r} has a different architecture or layer shapes"
            )

    group_names = _logical_layer_names(records, cfg)
    groups = dict(first.logical_layers())
    flat_names = [name for group in group_names for name in groups[group]]

    rows = []
    for rec in records:
        pieces = [layer.values for layer in rec.params.layers if layer.name in flat_names]
        rows.append(np.concatenate(pieces))
    raw = np.vstack(rows)

    scaled, _ = fit_apply_scaler(raw, "minmax")
    reduced = _reduce(scaled, cfg, len(records))
    return RepresentationMatrix(tuple(r.id for r in records), reduced)


def _reduce(matrix: np.ndarray, cfg: SelectionConfig, n_records: int) -> np.ndarray:
    if cfg.dr_method == "none":
        return matrix
    flat_dim = matrix.shape[1]
    d = cfg.dr_dim if cfg.dr_dim is not None else min(flat_dim, n_records)
    if cfg.dr_method == "pca":
        return pca(matrix, d)
    return kernel_pca(matrix, d, gamma=1.0 / flat_dim)


def _resolve_clustering(records: list[ModelRecord], cfg: SelectionConfig) -> str:
    if cfg.clustering != "auto":
        return cfg.clustering
    tags = {r.partition for r in records}
    if len(tags) == 1:
        return _CLUSTERING_BY_PARTITION.get(tags.pop(), "kmeans")
    return "kmeans"


def _pick_representative(members: list[ModelRecord], tau: float) -> ModelRecord:
    """One model per cluster: the biggest trainer when sizes are lopsided,
    otherwise the best scorer (deterministic tie-breaks, lower id last)."""
    sizes = [m.n_train for m in members]
    if float(np.median(sizes)) / max(sizes) < tau:
        return min(members, key=lambda r: (-r.n_train, -r.score, r.id))
    return min(members, key=lambda r: (-r.score, -r.n_train, r.id))


def _cluster_pipeline(records: list[ModelRecord], K: int, cfg: SelectionConfig,
                      rows_for, method: str) -> SelectionDebug:
    outliers = outlier_filter(records, cfg)
    survivors = [r for r in records if r.id not in outliers]
    if K > len(survivors):
        raise InvalidInputError(
            f"K={K} exceeds the {len(survivors)} surviving records "
            f"({len(outliers)} filtered as outliers)"
        )
    representation = rows_for(survivors)
    clustering_method = _resolve_clustering(survivors, cfg)
    assignment = cluster(representation.matrix, K, clustering_method, cfg.seed)

    by_id = {r.id: r for r in survivors}
    member_ids, weights = [], []
    for label in range(K):
        members = [
            by_id[rid]
            for rid, lab in zip(representation.ids, assignment.labels)
            if lab == label
        ]
        chosen = _pick_representative(members, cfg.tau)
        member_ids.append(chosen.id)
        weights.append(chosen.n_train)
    team = EnsembleTeam(method, tuple(member_ids), tuple(weights))
    return SelectionDebug(team, tuple(sorted(outliers)), representation,
                          assignment, clustering_method)


def dedes_select_debug(records: list[ModelRecord], K: int,
                       cfg: SelectionConfig) -> SelectionDebug:
    return _cluster_pipeline(records, K, cfg,
                             lambda survivors: represent(survivors, cfg), "dedes")


def dedes_select(records: list[ModelRecord], K: int,
                 cfg: SelectionConfig) -> EnsembleTeam:
    """The diversity pipeline: filter, represent, cluster, pick one per cluster."""
    return dedes_select_debug(records, K, cfg).team


def _lds_rows(records: list[ModelRecord], label_dists: np.ndarray,
              row_of: dict[str, int]) -> RepresentationMatrix:
    rows = np.asarray([label_dists[row_of[r.id]] for r in records], dtype=np.float64)
    scaled, _ = fit_apply_scaler(rows, "gaussian")
    return RepresentationMatrix(tuple(r.id for r in records), scaled)


def baseline_select(records: list[ModelRecord], method: str, K: int, seed: int,
                    label_dists=None,
                    cfg: SelectionConfig | None = None) -> EnsembleTeam:
    """The reference selectors: cv, ds, rs, as, and the ground-truth lds.

    ``cfg`` only matters for lds, which reruns the full clustering pipeline
    on label-distribution rows; when omitted the default pipeline knobs are
    used with the given K and seed.
    """
    if method not in ("cv", "ds", "rs", "as", "lds"):
        raise InvalidInputError(f"unknown baseline method: {method!r}")
    if not records:
        raise InvalidInputError("need at least one record")
    m = len(records)

    if method == "as":
        return EnsembleTeam("as", tuple(r.id for r in records),
                            tuple(r.n_train for r in records))

    if not 1 <= K <= m:
        raise InvalidInputError(f"K={K} out of range [1, {m}]")

    if method == "cv":
        chosen = sorted(records, key=lambda r: (-r.score, r.id))[:K]
    elif method == "ds":
        chosen = sorted(records, key=lambda r: (-r.n_train, r.id))[:K]
    elif method == "rs":
        rng = np.random.default_rng(seed)
        picks = sorted(rng.choice(m, size=K, replace=False).tolist())
        chosen = [records[i] for i in picks]
    else:  # lds
        if label_dists is None:
            raise InvalidInputError("lds requires label distributions")
        dists = np.asarray(label_dists, dtype=np.float64)
        if dists.shape[0] != m:
            raise InvalidInputError(
                f"label_dists has {dists.shape[0]} rows for {m} records"
            )
        row_of = {r.id: i for i, r in enumerate(records)}
        pipeline_cfg = cfg if cfg is not None else SelectionConfig(K=K, seed=seed)
        debug = _cluster_pipeline(
            records, K, pipeline_cfg,
            lambda survivors: _lds_rows(survivors, dists, row_of), "lds",
        )
        return debug.team

    return EnsembleTeam(method, tuple(r.id for r in chosen),
                        tuple(r.n_train for r in chosen))
