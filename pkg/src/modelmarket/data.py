"""Datasets and party partitioning.

A :class:`Dataset` is a feature matrix with integer class labels. The
partitioner assigns disjoint sample indices to ``m`` parties under one of
four strategies, then splits each party's indices into train/validation/test:

* ``homo`` - equal sizes, per-party class mix matching the global mix;
* ``iid_dq`` - same class mix but party sizes drawn from a power law;
* ``noniid_lds`` - per-class Dirichlet allocation (label-distribution skew);
* ``noniid_lk`` - each party holds exactly ``k_classes`` of the C classes.

Everything is deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, ParseError, PartitionError

STRATEGIES = ("homo", "iid_dq", "noniid_lds", "noniid_lk")

DEFAULT_SPLIT = (0.8, 0.1, 0.1)

# Parties are topped up to this many samples (when the dataset is large
# enough) so every party can fund a non-empty train/val/test split.
MIN_PARTY_SIZE = 3


@dataclass(frozen=True)
class Dataset:
    """Feature matrix ``X`` (n x d) with integer labels ``y`` in [0, C)."""

    X: np.ndarray
    y: np.ndarray
    C: int

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int64)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if X.ndim != 2:
            raise InvalidInputError("X must be 2-dimensional")
        if y.shape != (X.shape[0],):
            raise InvalidInputError("y length must match the number of rows of X")
        if self.C < 1:
            raise InvalidInputError("C must be at least 1")
        if y.size and (y.min() < 0 or y.max() >= self.C):
            raise InvalidInputError(f"labels must lie in [0, {self.C})")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], self.C)


@dataclass(frozen=True)
class PartitionSpec:
    """Which strategy to partition with, plus its knobs."""

    strategy: str
    beta: float = 0.5            # Dirichlet concentration (noniid_lds)
    k_classes: int = 2           # classes per party (noniid_lk)
    quantity_skew: float = 1.5   # power-law exponent (iid_dq)

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise InvalidInputError(f"unknown strategy: {self.strategy!r}")
        if self.beta <= 0.0:
            raise InvalidInputError("beta must be positive")
        if self.quantity_skew <= 0.0:
            raise InvalidInputError("quantity_skew must be positive")
        if self.k_classes < 1:
            raise InvalidInputError("k_classes must be at least 1")


@dataclass(frozen=True)
class PartitionPlan:
    """Disjoint per-party train/val/test index lists for one dataset."""

    m: int
    strategy: str
    train: tuple[tuple[int, ...], ...]
    val: tuple[tuple[int, ...], ...]
    test: tuple[tuple[int, ...], ...]

    def party_indices(self, i: int) -> np.ndarray:
        return np.asarray(self.train[i] + self.val[i] + self.test[i], dtype=np.int64)

    def global_test_indices(self) -> np.ndarray:
        out: list[int] = []
        for part in self.test:
            out.extend(part)
        return np.asarray(out, dtype=np.int64)

    def all_indices(self) -> np.ndarray:
        out: list[int] = []
        for i in range(self.m):
            out.extend(self.train[i])
            out.extend(self.val[i])
            out.extend(self.test[i])
        return np.asarray(out, dtype=np.int64)

    def to_json_dict(self) -> dict:
        return {
            "m": self.m,
            "strategy": self.strategy,
            "train": [list(p) for p in self.train],
            "val": [list(p) for p in self.val],
            "test": [list(p) for p in self.test],
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "PartitionPlan":
        return PartitionPlan(
            m=int(doc["m"]),
            strategy=str(doc["strategy"]),
            train=tuple(tuple(int(i) for i in p) for p in doc["train"]),
            val=tuple(tuple(int(i) for i in p) for p in doc["val"]),
            test=tuple(tuple(int(i) for i in p) for p in doc["test"]),
        )


def make_synthetic(C: int, d: int, n: int, separation: float, seed: int) -> Dataset:
    """Isotropic unit-variance Gaussian blob per class.

    Class means are placed on coordinate axes at multiples of ``separation``
    so every pair of means is at least ``separation`` apart. Class counts
    differ by at most one; row order is shuffled.
    """
    if C < 2:
        raise InvalidInputError("C must be at least 2")
    if d < 1:
        raise InvalidInputError("d must be at least 1")
    if n < C:
        raise InvalidInputError(f"need n >= C, got n={n}, C={C}")
    if separation <= 0.0:
        raise InvalidInputError("separation must be positive")

    rng = np.random.default_rng(seed)
    counts = [n // C + (1 if c < n % C else 0) for c in range(C)]
    rows, labels = [], []
    for c in range(C):
        mean = np.zeros(d)
        mean[c % d] = separation * (1 + c // d)
        rows.append(rng.normal(loc=mean, scale=1.0, size=(counts[c], d)))
        labels.extend([c] * counts[c])
    X = np.vstack(rows)
    y = np.asarray(labels, dtype=np.int64)
    order = rng.permutation(n)
    return Dataset(X[order], y[order], C)


def load_csv(path, header: bool = False) -> Dataset:
    """Read a dataset from CSV: numeric feature columns, integral label last.

    Raises :class:`ParseError` with a 1-based line number on ragged rows,
    non-numeric cells, non-integral or negative labels, or an empty file.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    start = 1 if header else 0
    rows: list[list[float]] = []
    labels: list[int] = []
    width = None
    for lineno, line in enumerate(lines, start=1):
        if lineno == 1 and header:
            continue
        if not line.strip():
            continue
        cells = line.split(",")
        if width is None:
            width = len(cells)
            if width < 2:
                raise ParseError(f"line {lineno}: need at least one feature and a label")
        elif len(cells) != width:
            raise ParseError(
                f"line {lineno}: expected {width} columns, got {len(cells)}"
            )
        try:
            values = [float(cell) for cell in cells]
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric cell") from None
        label = values[-1]
        if label != int(label):
            raise ParseError(f"line {lineno}: label {label} is not integral")
        if label < 0:
            raise ParseError(f"line {lineno}: label {int(label)} is negative")
        rows.append(values[:-1])
        labels.append(int(label))
    if not rows:
        raise ParseError(f"{path}: no data rows")
    y = np.asarray(labels, dtype=np.int64)
    return Dataset(np.asarray(rows, dtype=np.float64), y, C=int(y.max()) + 1)


def _largest_remainder(pool: int, weights: np.ndarray) -> np.ndarray:
    """Integer allocation of ``pool`` items proportional to ``weights``.

    Remainders go to the largest fractional parts, ties to lower indices.
    """
    target = weights / weights.sum() * pool
    base = np.floor(target).astype(np.int64)
    leftover = pool - int(base.sum())
    if leftover > 0:
        order = np.argsort(-(target - base), kind="stable")
        base[order[:leftover]] += 1
    return base


def _class_pools(y: np.ndarray, C: int, rng: np.random.Generator) -> list[np.ndarray]:
    return [rng.permutation(np.where(y == c)[0]) for c in range(C)]


def _deal_by_class_quota(pools, quotas) -> list[list[int]]:
    """Hand each party its per-class quota from the shuffled class pools."""
    m = quotas.shape[0]
    parties: list[list[int]] = [[] for _ in range(m)]
    for c, pool in enumerate(pools):
        cursor = 0
        for i in range(m):
            take = int(quotas[i, c])
            parties[i].extend(int(v) for v in pool[cursor:cursor + take])
            cursor += take
    return parties


def _repair_small_parties(parties: list[list[int]], floor: int) -> None:
    """Top up parties below ``floor`` samples by taking from the largest."""
    while True:
        sizes = [len(p) for p in parties]
        needy = [i for i, s in enumerate(sizes) if s < floor]
        if not needy:
            return
        donor = int(np.argmax(sizes))
        if sizes[donor] <= floor:
            raise PartitionError(
                "cannot give every party enough samples; "
                "use a larger dataset or fewer parties"
            )
        parties[needy[0]].append(parties[donor].pop())


def _split_counts(s: int, fractions: tuple[float, float, float]) -> tuple[int, int, int]:
    target = np.asarray(fractions) * s
    base = np.floor(target).astype(np.int64)
    leftover = s - int(base.sum())
    if leftover > 0:
        order = np.argsort(-(target - base), kind="stable")
        base[order[:leftover]] += 1
    counts = base.tolist()

    def steal_for(bucket: int) -> None:
        donor = int(np.argmax([counts[0], counts[1], counts[2]]))
        if counts[donor] > 1:
            counts[donor] -= 1
            counts[bucket] += 1

    if counts[0] == 0:
        steal_for(0)
    if counts[0] == 0:
        raise PartitionError(
            "a party has an empty train split; "
            "use a larger dataset or fewer parties"
        )
    # Keep val (and test where possible) non-empty so local validation and
    # the global test union stay usable down the pipeline.
    if counts[1] == 0 and s >= 2:
        steal_for(1)
    if counts[2] == 0 and s >= 3:
        steal_for(2)
    return counts[0], counts[1], counts[2]


def partition(ds: Dataset, spec: PartitionSpec, m: int,
              split: tuple[float, float, float] = DEFAULT_SPLIT,
              seed: int = 0) -> PartitionPlan:
    """Assign the dataset's indices to ``m`` parties under ``spec``.

    After party assignment each party's indices are shuffled and split into
    train/val/test by the given fractions. Deterministic per seed.
    """
    if m < 2:
        raise InvalidInputError("m must be at least 2")
    if len(split) != 3 or any(f <= 0.0 for f in split):
        raise InvalidInputError("split must be three positive fractions")
    if abs(sum(split) - 1.0) > 1e-9:
        raise InvalidInputError("split fractions must sum to 1")
    if spec.strategy == "noniid_lk" and spec.k_classes >= ds.C:
        raise InvalidInputError("k_classes must be smaller than the class count")
    if ds.n < m:
        raise PartitionError(
            "fewer samples than parties; use a larger dataset or fewer parties"
        )

    rng = np.random.default_rng(seed)
    pools = _class_pools(ds.y, ds.C, rng)
    class_counts = np.array([pool.size for pool in pools], dtype=np.int64)

    if spec.strategy == "homo":
        parties = _deal_homo(pools, m)
    elif spec.strategy == "iid_dq":
        weights = _power_law_weights(m, spec.quantity_skew, rng)
        quotas = np.stack(
            [_largest_remainder(int(nc), weights) for nc in class_counts], axis=1
        )
        parties = _deal_by_class_quota(pools, quotas)
    elif spec.strategy == "noniid_lds":
        quotas = np.stack(
            [
                _largest_remainder(int(nc), rng.dirichlet(np.full(m, spec.beta)))
                for nc in class_counts
            ],
            axis=1,
        )
        parties = _deal_by_class_quota(pools, quotas)
    else:  # noniid_lk
        parties = _deal_label_subsets(pools, m, spec.k_classes, ds.C)

    # noniid_lk already guarantees one sample per held class, and topping a
    # party up with foreign-class samples would break its k-class invariant.
    if spec.strategy != "noniid_lk":
        floor = MIN_PARTY_SIZE if ds.n >= MIN_PARTY_SIZE * m else 1
        _repair_small_parties(parties, floor)

    train, val, test = [], [], []
    for indices in parties:
        shuffled = rng.permutation(np.asarray(indices, dtype=np.int64))
        n_tr, n_val, _ = _split_counts(len(indices), tuple(split))
        train.append(tuple(int(v) for v in shuffled[:n_tr]))
        val.append(tuple(int(v) for v in shuffled[n_tr:n_tr + n_val]))
        test.append(tuple(int(v) for v in shuffled[n_tr + n_val:]))
    return PartitionPlan(m=m, strategy=spec.strategy,
                         train=tuple(train), val=tuple(val), test=tuple(test))


def _deal_homo(pools, m: int) -> list[list[int]]:
    """Deal the class pools to parties in one continuing round-robin cycle.

    Party sizes end up within one sample of each other and every party's
    class mix matches the global mix as closely as integers allow.
    """
    parties: list[list[int]] = [[] for _ in range(m)]
    position = 0
    for pool in pools:
        for idx in pool:
            parties[position % m].append(int(idx))
            position += 1
    return parties


def _power_law_weights(m: int, skew: float, rng: np.random.Generator) -> np.ndarray:
    """Party size weights from a truncated Pareto draw with shape ``skew``."""
    raw = (1.0 - rng.random(m)) ** (-1.0 / skew)
    return np.minimum(raw, 1e6)


def _deal_label_subsets(pools, m: int, k: int, C: int) -> list[list[int]]:
    """Each party gets ``k`` consecutive classes (mod C) starting at i*k.

    The blocks tile the label ring, so with m*k >= C every class has at
    least one holder; each class pool is split near-equally among holders.
    """
    if m * k < C:
        raise PartitionError(
            f"{m} parties with {k} classes each cannot cover {C} classes; "
            "use more parties or a larger k"
        )
    holders: list[list[int]] = [[] for _ in range(C)]
    for i in range(m):
        for j in range(k):
            holders[(i * k + j) % C].append(i)

    parties: list[list[int]] = [[] for _ in range(m)]
    for c, pool in enumerate(pools):
        group = holders[c]
        if pool.size < len(group):
            raise PartitionError(
                f"class {c} has {pool.size} samples for {len(group)} holders; "
                "use a larger dataset or fewer parties"
            )
        chunks = np.array_split(pool, len(group))
        for party, chunk in zip(group, chunks):
            parties[party].extend(int(v) for v in chunk)
    return parties


def label_distributions(ds: Dataset, plan: PartitionPlan) -> np.ndarray:
    """Per-party class counts over local training data (m x C)."""
    out = np.zeros((plan.m, ds.C), dtype=np.int64)
    for i in range(plan.m):
        for idx in plan.train[i]:
            out[i, ds.y[idx]] += 1
    return out
