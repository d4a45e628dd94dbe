"""Named float32 tensors and the ``NSG1`` weight-file format.

Layout::

    b"NSG1" | u32 header_len | header JSON (utf-8) | payload | u32 crc32

The CRC covers every byte before it. Integers are little-endian.
"""

from __future__ import annotations

import json
import struct
import zlib
from collections import OrderedDict
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np
import torch
from torch import nn

from ..errors import ConfigMismatch, CorruptFile, ValidationError, VersionMismatch

MAGIC = b"NSG1"
FORMAT_VERSION = 1


class ParameterStore(Mapping):
    """Insertion-ordered name -> float32 array map with fixed shapes."""

    def __init__(self, tensors=None, *, kind: str = "", config: dict | None = None, fingerprint: str = ""):
        self._tensors: OrderedDict[str, np.ndarray] = OrderedDict()
        self.kind = kind
        self.config = dict(config or {})
        self.fingerprint = fingerprint
        for name, value in (tensors or {}).items():
            self.add(name, value)

    def add(self, name: str, value) -> None:
        if name in self._tensors:
            raise ValidationError(f"duplicate tensor name {name!r}")
        arr = np.array(value, dtype="<f4", copy=True, order="C")
        arr.setflags(write=False)
        self._tensors[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def equals(self, other: "ParameterStore") -> bool:
        """Bitwise equality of names, shapes and data."""
        if list(self) != list(other):
            return False
        return all(self[k].shape == other[k].shape and self[k].tobytes() == other[k].tobytes() for k in self)

    @classmethod
    def from_module(cls, model: nn.Module) -> "ParameterStore":
        from .registry import model_fingerprint

        cfg = getattr(model, "config", None)
        return cls(
            {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()},
            kind=getattr(model, "kind", ""),
            config=cfg.to_dict() if cfg is not None else {},
            fingerprint=model_fingerprint(model),
        )

    def load_into(self, model: nn.Module, *, check_fingerprint: bool = True) -> nn.Module:
        from .registry import model_fingerprint

        if check_fingerprint and self.fingerprint and self.fingerprint != model_fingerprint(model):
            raise ConfigMismatch(
                f"weights were saved for config {self.fingerprint}, model has {model_fingerprint(model)}"
            )
        own = model.state_dict()
        if set(own) != set(self):
            missing = sorted(set(own) - set(self))
            extra = sorted(set(self) - set(own))
            raise ConfigMismatch(f"tensor names differ (missing {missing[:3]}, unexpected {extra[:3]})")
        for name, t in own.items():
            if tuple(t.shape) != self[name].shape:
                raise ConfigMismatch(f"{name}: shape {self[name].shape} does not fit {tuple(t.shape)}")
        model.load_state_dict({k: torch.from_numpy(self[k].copy()).to(own[k].dtype) for k in own})
        return model


def save_parameters(store: ParameterStore, path) -> None:
    directory = []
    offset = 0
    for name, arr in store.items():
        directory.append({"name": name, "dtype": "f32", "shape": list(arr.shape), "offset": offset})
        offset += arr.nbytes
    header = {
        "format_version": FORMAT_VERSION,
        "kind": store.kind,
        "fingerprint": store.fingerprint,
        "config": store.config,
        "payload_bytes": offset,
        "tensors": directory,
    }
    head = json.dumps(header, sort_keys=True).encode()
    body = MAGIC + struct.pack("<I", len(head)) + head + b"".join(a.tobytes() for a in store.values())
    Path(path).write_bytes(body + struct.pack("<I", zlib.crc32(body)))


def load_parameters(path, expected_fingerprint: str | None = None) -> ParameterStore:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != MAGIC:
        raise CorruptFile(f"{path}: not an NSG1 weight file")
    (crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) != crc:
        raise CorruptFile(f"{path}: checksum mismatch (truncated or corrupted)")
    (head_len,) = struct.unpack_from("<I", data, 4)
    try:
        header = json.loads(data[8 : 8 + head_len])
    except ValueError as exc:
        raise CorruptFile(f"{path}: unreadable header ({exc})") from None
    if header.get("format_version") != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format version {header.get('format_version')}, expected {FORMAT_VERSION}")
    if expected_fingerprint is not None and header.get("fingerprint") != expected_fingerprint:
        raise ConfigMismatch(f"{path}: fingerprint {header.get('fingerprint')} != expected {expected_fingerprint}")
    payload = data[8 + head_len : -4]
    if len(payload) != header.get("payload_bytes"):
        raise CorruptFile(f"{path}: payload is {len(payload)} bytes, header says {header.get('payload_bytes')}")
    store = ParameterStore(kind=header.get("kind", ""), config=header.get("config"), fingerprint=header.get("fingerprint", ""))
    for entry in header["tensors"]:
        if entry["dtype"] != "f32":
            raise CorruptFile(f"{path}: unsupported dtype {entry['dtype']!r}")
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        raw = payload[entry["offset"] : entry["offset"] + 4 * count]
        if len(raw) != 4 * count:
            raise CorruptFile(f"{path}: tensor {entry['name']!r} runs past the payload")
        store.add(entry["name"], np.frombuffer(raw, dtype="<f4").reshape(shape))
    return store
