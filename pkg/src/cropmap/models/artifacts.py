"""Trained-model container and its versioned binary file format.

Layout: magic line, little-endian uint64 header length, UTF-8 JSON header
(sorted keys), then raw C-order array blobs concatenated in header order.
Doubles are '<f8', integers '<i8', so a file round-trips bit-exactly on any
host.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ..dataset import Fingerprint
from ..errors import DataError
from .config import ModelConfig, ModelKind

MAGIC = b"CROPMAP-MODEL-1\n"


@dataclass
class ModelArtifact:
    config: dict
    arrays: dict
    fingerprint: dict
    training_log: dict = field(default_factory=dict)
    norm_mean: np.ndarray | None = None
    norm_std: np.ndarray | None = None

    @property
    def kind(self) -> ModelKind:
        return ModelKind.parse(self.config["kind"])

    @property
    def model_config(self) -> ModelConfig:
        return ModelConfig.from_dict(self.config)

    @property
    def fingerprint_obj(self) -> Fingerprint:
        return Fingerprint.from_dict(self.fingerprint)

    def normalize(self, X: np.ndarray) -> np.ndarray:
        if self.norm_mean is None or self.norm_std is None:
            return np.asarray(X, dtype=np.float64)
        return (np.asarray(X, dtype=np.float64) - self.norm_mean) / self.norm_std

    def build_model(self, steps: int, n_channels: int):
        from .nets import SequenceModel

        return SequenceModel.from_arrays(self.model_config, n_channels, steps, self.arrays)

    def require_fingerprint(self, other: Fingerprint):
        self.fingerprint_obj.require_match(other)


def _encode_arrays(artifact: ModelArtifact) -> dict:
    out = dict(artifact.arrays)
    if artifact.norm_mean is not None:
        out["__norm_mean__"] = artifact.norm_mean
        out["__norm_std__"] = artifact.norm_std
    return out


def save_artifact(artifact: ModelArtifact, path):
    arrays = _encode_arrays(artifact)
    names = sorted(arrays)
    meta = []
    blobs = []
    for name in names:
        a = np.asarray(arrays[name])
        dtype = "<i8" if a.dtype.kind in "iu" else "<f8"
        a = np.ascontiguousarray(a.astype(dtype))
        meta.append({"name": name, "dtype": dtype, "shape": list(a.shape)})
        blobs.append(a.tobytes())
    header = {
        "config": artifact.config,
        "fingerprint": artifact.fingerprint,
        "training_log": artifact.training_log,
        "arrays": meta,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for blob in blobs:
            fh.write(blob)


def load_artifact(path) -> ModelArtifact:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise DataError(f"{path}: not a model artifact file")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        arrays = {}
        for meta in header["arrays"]:
            shape = tuple(meta["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise DataError(f"{path}: truncated array {meta['name']}")
            arrays[meta["name"]] = np.frombuffer(raw, dtype=meta["dtype"]).reshape(shape).copy()
    norm_mean = arrays.pop("__norm_mean__", None)
    norm_std = arrays.pop("__norm_std__", None)
    return ModelArtifact(
        config=header["config"],
        arrays=arrays,
        fingerprint=header["fingerprint"],
        training_log=header["training_log"],
        norm_mean=norm_mean,
        norm_std=norm_std,
    )
