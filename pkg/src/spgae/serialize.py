"""Binary/CSV serialization: packed variables, data matrices, key-value reports.

Formats are deliberately simple:

* variables: magic ``SPGAEZ1\\n``, three little-endian int64 (N, N0, N1), then
  the packed coefficients as little-endian float64 in pack order;
* matrix: magic ``SPGAEM1\\n``, two little-endian int64 (rows, cols), then
  row-major little-endian float64;
* reports/configs: ``key = value`` lines, ``#`` comments allowed.
"""

from __future__ import annotations

import struct

import numpy as np

from .model import Variables

VAR_MAGIC = b"SPGAEZ1\n"
MAT_MAGIC = b"SPGAEM1\n"


class FormatError(ValueError):
    """Bad magic / truncation; message carries the byte offset."""


def _read_exact(fh, count, path, what):
    buf = fh.read(count)
    if len(buf) != count:
        raise FormatError(f"{path}: truncated {what}: wanted {count} bytes at "
                          f"offset {fh.tell() - len(buf)}, got {len(buf)}")
    return buf


def save_variables(path, z: Variables, dims) -> None:
    """dims is (N, N0, N1) or an object with a .dims tuple."""
    if hasattr(dims, "dims"):
        dims = dims.dims
    n, n0, n1 = (int(d) for d in dims)
    vec = z.pack().astype("<f8")
    expected = n0 * n1 + n1 + n0 + n1 * n
    if vec.size != expected:
        raise ValueError(f"variables do not match dims {dims}: "
                         f"{vec.size} != {expected}")
    with open(path, "wb") as fh:
        fh.write(VAR_MAGIC)
        fh.write(struct.pack("<qqq", n, n0, n1))
        fh.write(vec.tobytes())


def load_variables(path) -> tuple[Variables, tuple[int, int, int]]:
    with open(path, "rb") as fh:
        magic = _read_exact(fh, len(VAR_MAGIC), path, "magic")
        if magic != VAR_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r} at offset 0")
        n, n0, n1 = struct.unpack("<qqq", _read_exact(fh, 24, path, "header"))
        if min(n, n0, n1) < 1:
            raise FormatError(f"{path}: nonpositive dimension in header at offset 8")
        expected = n0 * n1 + n1 + n0 + n1 * n
        raw = _read_exact(fh, 8 * expected, path, "payload")
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes at offset {fh.tell() - 1}")
    vec = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    return Variables.unpack(vec, (n, n0, n1)), (n, n0, n1)


def save_matrix(path, M) -> None:
    M = np.ascontiguousarray(np.asarray(M, dtype=np.float64))
    if M.ndim != 2:
        raise ValueError("matrix must be 2-d")
    with open(path, "wb") as fh:
        fh.write(MAT_MAGIC)
        fh.write(struct.pack("<qq", M.shape[0], M.shape[1]))
        fh.write(M.astype("<f8").tobytes())


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = _read_exact(fh, len(MAT_MAGIC), path, "magic")
        if magic != MAT_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r} at offset 0")
        rows, cols = struct.unpack("<qq", _read_exact(fh, 16, path, "header"))
        if rows < 0 or cols < 0:
            raise FormatError(f"{path}: negative dimension in header at offset 8")
        raw = _read_exact(fh, 8 * rows * cols, path, "payload")
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes at offset {fh.tell() - 1}")
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(rows, cols)


def save_matrix_csv(path, M) -> None:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("matrix must be 2-d")
    np.savetxt(path, M, fmt="%.17g", delimiter=",")


def load_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)


def save_kv(path, mapping: dict) -> None:
    """Write ``key = value`` lines; values are stringified, floats at full precision."""
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in mapping.items():
            if isinstance(value, float):
                value = format(value, ".17g")
            fh.write(f"{key} = {value}\n")


def load_kv(path) -> dict:
    """Read ``key = value`` lines into a str -> str dict."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out
