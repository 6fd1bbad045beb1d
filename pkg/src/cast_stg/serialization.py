"""JSON output with floats at 17 significant digits, and a binary checkpoint container.

Container layout (all integers little-endian)::

    b"CASTCKPT"            8-byte magic
    uint32                 format version
    uint64                 header length in bytes
    header                 UTF-8 JSON, keys sorted; lists every array as
                           {"name", "shape", "offset"} with offsets into the payload
    payload                row-major little-endian float64 values, arrays back to back

Nothing time- or host-dependent is written, so identical state gives identical bytes.
"""
from __future__ import annotations

import json
import math
import struct
from pathlib import Path

import numpy as np

MAGIC = b"CASTCKPT"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def format_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = f"{x:.17g}"
    # keep a float marker so readers do not turn 3.0 into an int
    return s if any(c in s for c in ".eEn") else s + ".0"


def _encode(obj, indent, level, out):
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    sep = ", " if indent is None else ","
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        out.append(json.dumps(None if obj is None else bool(obj)))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, key in enumerate(sorted(obj, key=str)):
            out.append((sep if i else "") + pad + json.dumps(str(key)) + ": ")
            _encode(obj[key], indent, level + 1, out)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not items:
            out.append("[]")
            return
        out.append("[")
        for i, item in enumerate(items):
            out.append((sep if i else "") + pad)
            _encode(item, indent, level + 1, out)
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent: int | None = 1) -> str:
    """Like ``json.dumps(..., sort_keys=True)`` but every float uses 17 significant digits."""
    out: list[str] = []
    _encode(obj, indent, 0, out)
    return "".join(out)


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def write_container(path: str | Path, header: dict, arrays: dict[str, np.ndarray]) -> None:
    entries, chunks, offset = [], [], 0
    for name in sorted(arrays):
        arr = np.asarray(arrays[name], dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes(order="C"))
        offset += arr.nbytes
    head = dumps({"meta": header, "arrays": entries}, indent=None).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", FORMAT_VERSION, len(head)))
        fh.write(head)
        for chunk in chunks:
            fh.write(chunk)


def read_container(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    if len(raw) < 20:
        raise CheckpointError(f"{path}: truncated header")
    version, head_len = struct.unpack("<IQ", raw[8:20])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    try:
        head = json.loads(raw[20:20 + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from exc
    payload = memoryview(raw)[20 + head_len:]
    arrays = {}
    for entry in head["arrays"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        start = entry["offset"]
        if start + 8 * count > len(payload):
            raise CheckpointError(f"{path}: truncated payload for {entry['name']}")
        arr = np.frombuffer(payload[start:start + 8 * count], dtype="<f8").astype(np.float64)
        arrays[entry["name"]] = arr.reshape(entry["shape"])
    return head["meta"], arrays
