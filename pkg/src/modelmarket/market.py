"""Persistent model-market store.

Each uploaded model lives in its own bundle directory::

    <root>/records/<id>/manifest.json   # metadata + layer index
    <root>/records/<id>/<layer>.bin     # little-endian float64, row-major

``manifest.json`` carries: id, party, n_train, score, arch, partition and
``layers`` as a list of {name, shape, file, checksum}. Checksums are 64-bit
FNV-1a over the raw blob bytes, verified on load. Bundles are written to a
temp directory first and renamed into place, so a failed save leaves the
store unchanged. ``<root>/manifest.json`` caches the id list; the directory
scan is the ground truth and the cache is rebuilt from it.
"""

from __future__ import annotations

import json
import os
import re
import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ConflictError,
    IntegrityError,
    InvalidInputError,
    NotFoundError,
    StorageError,
)
from .training import LayerParams, ModelParams

_ID_PATTERN = re.compile(r"^[A-Za-z0-9._-]+$")

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> str:
    """64-bit FNV-1a digest as a 16-hex-digit string."""
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return f"{h:016x}"


@dataclass(frozen=True)
class ModelRecord:
    """One party's uploaded model with its training-set size and score."""

    id: str
    params: ModelParams
    n_train: int
    score: float
    party: int = 0
    partition: str = ""

    def __post_init__(self):
        if not _ID_PATTERN.match(self.id):
            raise InvalidInputError(
                f"record id {self.id!r} must match [A-Za-z0-9._-]+"
            )
        if self.n_train < 1:
            raise InvalidInputError("n_train must be at least 1")
        if not 0.0 <= self.score <= 1.0:
            raise InvalidInputError("score must lie in [0, 1]")


class MarketStore:
    """Directory-backed store of :class:`ModelRecord` bundles."""

    def __init__(self, root):
        self.root = Path(root)
        self.records_dir = self.root / "records"
        self.records_dir.mkdir(parents=True, exist_ok=True)

    # -- helpers ---------------------------------------------------------

    def _bundle(self, record_id: str) -> Path:
        if not _ID_PATTERN.match(record_id):
            raise InvalidInputError(f"bad record id: {record_id!r}")
        return self.records_dir / record_id

    def _write_manifest_cache(self) -> None:
        cache = {"ids": self.list_ids()}
        path = self.root / "manifest.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(cache, indent=1, sort_keys=True), encoding="utf-8")
        os.replace(tmp, path)

    # -- public API ------------------------------------------------------

    def list_ids(self) -> list[str]:
        """All record ids, lexicographically sorted (directory scan)."""
        return sorted(p.name for p in self.records_dir.iterdir() if p.is_dir())

    def save_record(self, rec: ModelRecord) -> str:
        target = self._bundle(rec.id)
        if target.exists():
            raise ConflictError(f"record {rec.id!r} already exists")

        manifest = {
            "id": rec.id,
            "party": rec.party,
            "n_train": rec.n_train,
            "score": rec.score,
            "arch": rec.params.arch,
            "partition": rec.partition,
            "input_dim": rec.params.input_dim,
            "n_classes": rec.params.n_classes,
            "layers": [],
        }
        tmp = Path(tempfile.mkdtemp(prefix=".tmp-", dir=self.root))
        try:
            for layer in rec.params.layers:
                blob = layer.values.astype("<f8").tobytes()
                filename = f"{layer.name}.bin"
                (tmp / filename).write_bytes(blob)
                manifest["layers"].append(
                    {
                        "name": layer.name,
                        "shape": list(layer.shape),
                        "file": filename,
                        "checksum": fnv1a64(blob),
                    }
                )
            (tmp / "manifest.json").write_text(
                json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8"
            )
            try:
                os.rename(tmp, target)
            except OSError as exc:
                if target.exists():
                    raise ConflictError(f"record {rec.id!r} already exists") from exc
                raise
        except (ConflictError, InvalidInputError):
            raise
        except OSError as exc:
            raise StorageError(f"failed to write record {rec.id!r}: {exc}") from exc
        finally:
            if tmp.exists():
                shutil.rmtree(tmp, ignore_errors=True)
        self._write_manifest_cache()
        return rec.id

    def load_record(self, record_id: str) -> ModelRecord:
        bundle = self._bundle(record_id)
        manifest_path = bundle / "manifest.json"
        if not manifest_path.exists():
            raise NotFoundError(f"record {record_id!r} not found")
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))

        layers = []
        for entry in doc["layers"]:
            blob = (bundle / entry["file"]).read_bytes()
            shape = tuple(int(s) for s in entry["shape"])
            expected = int(np.prod(shape)) * 8
            if len(blob) != expected:
                raise IntegrityError(
                    f"record {record_id!r} layer {entry['name']!r}: "
                    f"blob is {len(blob)} bytes, expected {expected}"
                )
            if fnv1a64(blob) != entry["checksum"]:
                raise IntegrityError(
                    f"record {record_id!r} layer {entry['name']!r}: checksum mismatch"
                )
            values = np.frombuffer(blob, dtype="<f8").astype(np.float64)
            layers.append(LayerParams(entry["name"], shape, values))

        params = ModelParams(
            doc["arch"], int(doc["input_dim"]), int(doc["n_classes"]), tuple(layers)
        )
        return ModelRecord(
            id=doc["id"],
            params=params,
            n_train=int(doc["n_train"]),
            score=float(doc["score"]),
            party=int(doc["party"]),
            partition=doc.get("partition", ""),
        )

    def load_records(self, ids=None) -> list[ModelRecord]:
        """Load the given ids in order, or every record when ids is None."""
        if ids is None:
            ids = self.list_ids()
        return [self.load_record(record_id) for record_id in ids]

    def delete_record(self, record_id: str) -> None:
        bundle = self._bundle(record_id)
        if not bundle.exists():
            raise NotFoundError(f"record {record_id!r} not found")
        shutil.rmtree(bundle)
        self._write_manifest_cache()
