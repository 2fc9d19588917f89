"""Binary checkpoint container for infinite MPS states.

Layout: an 8-byte magic ``FMPSCKPT``, a uint32 format version, a
length-prefixed UTF-8 JSON header (cell_k, dim_d, couplings, free-form run
metadata, array order), then one record per array: length-prefixed name,
uint32 rank, uint64 dims, and the raw row-major little-endian float64
payload.  Floats are written verbatim, so save -> load round-trips
bit-exactly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .imps import InfiniteMPS

MAGIC = b"FMPSCKPT"
VERSION = 1


def _write_array(fh, name: str, arr: np.ndarray) -> None:
    data = np.ascontiguousarray(arr, dtype="<f8")
    raw_name = name.encode("utf-8")
    fh.write(struct.pack("<I", len(raw_name)))
    fh.write(raw_name)
    fh.write(struct.pack("<I", data.ndim))
    fh.write(struct.pack(f"<{data.ndim}Q", *data.shape))
    fh.write(data.tobytes())


def _read_exact(fh, n: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise ValueError("truncated checkpoint file")
    return buf


def _read_array(fh) -> tuple[str, np.ndarray]:
    (name_len,) = struct.unpack("<I", _read_exact(fh, 4))
    name = _read_exact(fh, name_len).decode("utf-8")
    (ndim,) = struct.unpack("<I", _read_exact(fh, 4))
    shape = struct.unpack(f"<{ndim}Q", _read_exact(fh, 8 * ndim))
    count = int(np.prod(shape)) if ndim else 1
    arr = np.frombuffer(_read_exact(fh, 8 * count), dtype="<f8").reshape(shape)
    return name, arr.astype(np.float64).copy()


def save_checkpoint(
    path: str | Path,
    psi: InfiniteMPS,
    gamma: float,
    gamma3: float = 0.0,
    meta: dict | None = None,
) -> None:
    """Write the state plus run metadata to ``path``."""
    names = [f"tensor_{k}" for k in range(psi.cell_k)]
    names += [f"spectrum_{k}" for k in range(psi.cell_k)]
    header = {
        "cell_k": psi.cell_k,
        "dim_d": psi.dim_d,
        "gamma": gamma,
        "gamma3": gamma3,
        "arrays": names,
        "meta": meta or {},
    }
    raw_header = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(raw_header)))
        fh.write(raw_header)
        for k in range(psi.cell_k):
            _write_array(fh, f"tensor_{k}", psi.tensors[k])
        for k in range(psi.cell_k):
            _write_array(fh, f"spectrum_{k}", psi.spectra[k])


def load_checkpoint(path: str | Path) -> tuple[InfiniteMPS, dict]:
    """Read a checkpoint; returns the state and the full header dict."""
    with open(path, "rb") as fh:
        if _read_exact(fh, len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        (header_len,) = struct.unpack("<Q", _read_exact(fh, 8))
        header = json.loads(_read_exact(fh, header_len).decode("utf-8"))
        arrays = {}
        for _ in header["arrays"]:
            name, arr = _read_array(fh)
            arrays[name] = arr
    cell_k = header["cell_k"]
    psi = InfiniteMPS(
        tensors=[arrays[f"tensor_{k}"] for k in range(cell_k)],
        spectra=[arrays[f"spectrum_{k}"] for k in range(cell_k)],
    )
    psi.validate()
    return psi, header
