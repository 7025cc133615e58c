"""Binary checkpoint container.

Layout, all little-endian:

    melbert-ckpt v1\n
    <one-line JSON metadata>\n
    param <name> <dim0> <dim1> ...\n
    <row-major float64 bytes>
    ... more param blocks ...
    end\n

Parameter blocks are written in sorted-name order so that saving is a
canonical function of the content, making save/load/save bit-exact.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import FormatError

MAGIC = b"melbert-ckpt v1\n"


def save_checkpoint(path, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += json.dumps(meta, sort_keys=True).encode("utf-8") + b"\n"
    for name in sorted(arrays):
        if " " in name or "\n" in name:
            raise FormatError(f"parameter name {name!r} cannot be serialized")
        arr = np.asarray(arrays[name], dtype="<f8")  # asarray keeps 0-d shapes intact
        dims = " ".join(str(d) for d in arr.shape)
        header = f"param {name} {dims}".rstrip() + "\n"
        blob += header.encode("utf-8")
        blob += arr.tobytes(order="C")
    blob += b"end\n"
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(MAGIC):
        raise FormatError(f"bad checkpoint header, expected {MAGIC!r}")
    cursor = len(MAGIC)

    def read_line() -> bytes:
        nonlocal cursor
        nl = blob.find(b"\n", cursor)
        if nl < 0:
            raise FormatError("unterminated line in checkpoint (truncated file?)")
        line = blob[cursor:nl]
        cursor = nl + 1
        return line

    try:
        meta = json.loads(read_line().decode("utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"checkpoint metadata is not valid JSON: {e}") from e

    arrays: dict[str, np.ndarray] = {}
    while True:
        line = read_line()
        if line == b"end":
            break
        parts = line.decode("utf-8").split(" ")
        if parts[0] != "param" or len(parts) < 2:
            raise FormatError(f"expected a param block, got {line!r}")
        name = parts[1]
        try:
            shape = tuple(int(d) for d in parts[2:])
        except ValueError as e:
            raise FormatError(f"bad dimensions in block {name!r}") from e
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if cursor + nbytes > len(blob):
            raise FormatError(f"block {name!r} truncated")
        arrays[name] = np.frombuffer(blob[cursor : cursor + nbytes], dtype="<f8").reshape(shape).copy()
        cursor += nbytes
    return meta, arrays
