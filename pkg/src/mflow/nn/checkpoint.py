"""Versioned binary checkpoint container.

Layout (all integers little-endian):

    bytes 0..7    magic ``b"MFLWCKPT"``
    bytes 8..11   uint32 format version (currently 1)
    bytes 12..15  uint32 header length L
    bytes 16..    UTF-8 JSON header of L bytes
    then          raw float64 little-endian array data, section by section

The JSON header carries the architecture descriptor (opaque to this
module), an ordered list of sections, and per-section array shapes. Each
section is its arrays concatenated in declaration order. Typical
sections: ``params``, ``ema``, ``adam_m``, ``adam_v``.
"""

import json
import struct

import numpy as np

__all__ = ["save_checkpoint", "load_checkpoint", "CheckpointError", "MAGIC", "VERSION"]

MAGIC = b"MFLWCKPT"
VERSION = 1


class CheckpointError(RuntimeError):
    """Malformed file or architecture mismatch."""


def save_checkpoint(path, descriptor: dict, sections: dict, extra: dict | None = None):
    """Write `sections` (name -> list of float64 arrays) with `descriptor`.

    Section order in the file follows the dict's insertion order.
    """
    names = list(sections)
    header = {
        "descriptor": descriptor,
        "sections": names,
        "shapes": {n: [list(a.shape) for a in sections[n]] for n in names},
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        for name in names:
            for arr in sections[name]:
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict, dict, dict]:
    """Read a checkpoint; returns (descriptor, sections, extra)."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise CheckpointError(f"bad magic {magic!r}; not a checkpoint file")
        version, hlen = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        try:
            header = json.loads(fh.read(hlen).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc
        sections = {}
        for name in header["sections"]:
            arrays = []
            for shape in header["shapes"][name]:
                count = int(np.prod(shape)) if shape else 1
                raw = fh.read(count * 8)
                if len(raw) != count * 8:
                    raise CheckpointError(f"truncated section {name!r}")
                arrays.append(np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64))
            sections[name] = arrays
        if fh.read(1):
            raise CheckpointError("trailing bytes after final section")
    return header["descriptor"], sections, header.get("extra", {})
