"""File formats: 16-bit PGM maps, raw float64 phase grids, atomic writes."""

from __future__ import annotations

import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fields import GridSpec

_PGM_HEADER = re.compile(
    rb"^P5\s(?:\s*#.*[\r\n])*\s*(\d+)\s(?:\s*#.*[\r\n])*\s*(\d+)\s(?:\s*#.*[\r\n])*\s*(\d+)\s"
)


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def encode_pgm16(values: np.ndarray, comments: list[str] | tuple[str, ...] = ()) -> bytes:
    """Scale a non-negative map so its peak is 65535 and encode as binary PGM."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError("PGM data must be 2D")
    peak = values.max()
    scaled = values / peak * 65535.0 if peak > 0 else np.zeros_like(values)
    pixels = np.rint(np.clip(scaled, 0, 65535)).astype(">u2")
    h, w = pixels.shape
    header = "P5\n" + "".join(f"# {c}\n" for c in comments) + f"{w} {h}\n65535\n"
    return header.encode("ascii") + pixels.tobytes()


def write_pgm16(path, values: np.ndarray, comments=()) -> None:
    atomic_write_bytes(path, encode_pgm16(values, comments))


def read_pgm(path) -> np.ndarray:
    """Binary PGM (8 or 16 bit) as floats in [0, 1]."""
    buf = Path(path).read_bytes()
    match = _PGM_HEADER.match(buf)
    if not match:
        raise ConfigError(f"{path}: not a binary (P5) PGM file")
    width, height, maxval = (int(g) for g in match.groups())
    dtype = "u1" if maxval < 256 else ">u2"
    count = width * height
    if len(buf) - match.end() < count * np.dtype(dtype).itemsize:
        raise ConfigError(f"{path}: truncated pixel data")
    data = np.frombuffer(buf, dtype=dtype, count=count, offset=match.end())
    return data.reshape(height, width).astype(float) / maxval


def _header_path(raw_path: Path) -> Path:
    return raw_path.with_suffix(".hdr")


def write_phase_raw(path, phase: np.ndarray, spec: GridSpec) -> None:
    """Little-endian row-major float64 grid plus ``<stem>.hdr`` giving n and pitch."""
    path = Path(path)
    phase = np.asarray(phase, dtype="<f8")
    if phase.shape != (spec.n, spec.n):
        raise ValueError("phase grid does not match spec")
    atomic_write_bytes(path, phase.tobytes(order="C"))
    atomic_write_text(_header_path(path), f"n = {spec.n}\npitch = {spec.pitch!r}\n")


def read_phase_raw(path) -> tuple[np.ndarray, GridSpec]:
    path = Path(path)
    hdr = _header_path(path)
    if not hdr.exists():
        raise ConfigError(f"{path}: missing header file {hdr.name}")
    fields = {}
    for lineno, line in enumerate(hdr.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{hdr}:{lineno}: expected 'key = value'")
        fields[key.strip()] = value.strip()
    try:
        spec = GridSpec(int(fields["n"]), float(fields["pitch"]))
    except KeyError as exc:
        raise ConfigError(f"{hdr}: missing field {exc.args[0]}") from None
    except ValueError as exc:
        raise ConfigError(f"{hdr}: {exc}") from None
    data = np.fromfile(path, dtype="<f8")
    if data.size != spec.n * spec.n:
        raise ConfigError(f"{path}: expected {spec.n * spec.n} float64 values, found {data.size}")
    return data.reshape(spec.n, spec.n).astype(float), spec
