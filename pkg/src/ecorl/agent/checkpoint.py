"""Binary checkpoint format.

Layout: the magic ``ECORL1``, a little-endian uint32 header length, a UTF-8
JSON header (sorted keys), then every parameter as little-endian float32 in
layer declaration order (grid branch, inventory branch, head; W before b).
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from .network import QNetwork

MAGIC = b"ECORL1"
_LEN = struct.Struct("<I")


class CheckpointError(IOError):
    def __init__(self, msg: str, offset: int):
        super().__init__(f"{msg} (at byte offset {offset})")
        self.offset = offset


def encode_checkpoint(net: QNetwork, task: str, global_step: int, n_channels: int) -> bytes:
    header = {
        "task": str(task),
        "C": int(n_channels),
        "n_actions": net.n_out,
        "grid_in": net.grid_in,
        "inv_in": net.inv_in,
        "arch": [list(w) for w in net.arch],
        "shapes": [list(s) for s in net.shapes],
        "global_step": int(global_step),
    }
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    body = np.asarray(net.params, dtype="<f4").tobytes()
    return MAGIC + _LEN.pack(len(raw)) + raw + body


def decode_checkpoint(data: bytes, dtype=np.float32):
    if data[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"bad magic {data[:len(MAGIC)]!r}, expected {MAGIC!r}", 0)
    off = len(MAGIC)
    if len(data) < off + _LEN.size:
        raise CheckpointError("truncated header length", off)
    (hlen,) = _LEN.unpack_from(data, off)
    off += _LEN.size
    if len(data) < off + hlen:
        raise CheckpointError(f"truncated header: need {hlen} bytes", off)
    try:
        header = json.loads(data[off : off + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"malformed header: {e}", off) from None
    off += hlen
    g, i, h = header["arch"]
    net = QNetwork(header["grid_in"], header["inv_in"], header["n_actions"], g, i, h, dtype=dtype)
    if [list(s) for s in net.shapes] != header["shapes"]:
        raise CheckpointError("layer shapes in header disagree with architecture", len(MAGIC) + _LEN.size)
    need = net.n_params * 4
    if len(data) - off != need:
        raise CheckpointError(f"parameter block is {len(data) - off} bytes, expected {need}", off)
    net.params[:] = np.frombuffer(data, dtype="<f4", count=net.n_params, offset=off)
    return net, header


def save_checkpoint(path, net: QNetwork, task: str, global_step: int, n_channels: int):
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(encode_checkpoint(net, task, global_step, n_channels))
    os.replace(tmp, path)


def load_checkpoint(path, dtype=np.float32):
    with open(path, "rb") as f:
        return decode_checkpoint(f.read(), dtype)
