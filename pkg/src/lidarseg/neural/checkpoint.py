"""Weight checkpoints: magic LLNW, u32 version, u32 JSON header length,
the JSON header (block widths and channel counts), then every parameter
in declaration order as raw little-endian float32.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..fileio import BadMagicError, TruncatedFileError, UnsupportedVersionError, _read_exact
from .network import LiLaNet

MAGIC = b"LLNW"
VERSION = 1


def save_checkpoint(path, net: LiLaNet) -> None:
    header = json.dumps(
        {"widths": list(net.widths), "in_channels": net.in_channels, "num_classes": net.num_classes}
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(header)))
        f.write(header)
        for p in net.parameters():
            f.write(np.ascontiguousarray(p.value, dtype="<f4").tobytes())


def load_checkpoint(path, dtype=np.float32) -> LiLaNet:
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "checkpoint magic")
        if magic != MAGIC:
            raise BadMagicError(f"bad checkpoint magic {magic!r}")
        version, header_len = struct.unpack("<II", _read_exact(f, 8, "checkpoint header"))
        if version != VERSION:
            raise UnsupportedVersionError(f"unsupported checkpoint version {version}")
        header = json.loads(_read_exact(f, header_len, "checkpoint header"))
        net = LiLaNet(
            widths=header["widths"],
            in_channels=header["in_channels"],
            num_classes=header["num_classes"],
            dtype=dtype,
        )
        for p in net.parameters():
            raw = _read_exact(f, p.value.size * 4, f"weights for {p.name}")
            p.value = np.frombuffer(raw, dtype="<f4").reshape(p.value.shape).astype(dtype)
        trailing = f.read(1)
        if trailing:
            raise TruncatedFileError("checkpoint has trailing bytes beyond the declared layers")
    return net
