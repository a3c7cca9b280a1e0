"""File formats: ``.t3b`` tensors, PPM frames, CSV/JSON reports, TOML configs.

``.t3b`` layout (all little-endian)::

    offset  size  field
    0       4     magic  b"T3B1"
    4       4     version  u32 = 1
    8       8     n  u64
    16      8     m  u64
    24      8     s  u64
    32      8nms  payload  f64, slice-major and column-major within a slice
"""

from __future__ import annotations

import csv
import json
import math
import os
import struct
import sys
import tempfile
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    ConfigError,
    DimOverflow,
    InconsistentDimensions,
    TruncatedPayload,
    UnsupportedFormat,
    ValidationError,
)
from .system import MarkovSequence
from .tensor3 import Tensor3

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

MAGIC = b"T3B1"
VERSION = 1
HEADER = struct.Struct("<4sIQQQ")
MAX_ELEMENTS = 1 << 40
REPORT_FIELDS = ("method", "k", "time_s", "params", "bytes", "rel_err", "bound")


def _atomic_write(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- .t3b -----------------------------------------------------------------


def encode_tensor(A: Tensor3) -> bytes:
    n, m, s = A.shape
    payload = np.asarray(A.data, dtype="<f8").tobytes(order="F")
    return HEADER.pack(MAGIC, VERSION, n, m, s) + payload


def decode_tensor(buf: bytes) -> Tensor3:
    if len(buf) < HEADER.size:
        if buf[:4] != MAGIC[: len(buf[:4])]:
            raise BadMagic(f"bad magic {buf[:4]!r}")
        raise TruncatedPayload(f"header needs {HEADER.size} bytes, got {len(buf)}")
    magic, version, n, m, s = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedFormat(f"unsupported .t3b version {version}")
    if min(n, m, s) == 0:
        raise ValidationError(f"zero dimension in header ({n}, {m}, {s})")
    if n * m * s > MAX_ELEMENTS:
        raise DimOverflow(f"dimensions ({n}, {m}, {s}) exceed {MAX_ELEMENTS} elements")
    need = 8 * n * m * s
    have = len(buf) - HEADER.size
    if have < need:
        raise TruncatedPayload(f"payload needs {need} bytes, got {have}")
    if have > need:
        raise TruncatedPayload(f"{have - need} trailing bytes after payload")
    data = np.frombuffer(buf, dtype="<f8", count=n * m * s, offset=HEADER.size)
    return Tensor3(data.astype(np.float64).reshape((n, m, s), order="F"))


def write_tensor(path, A: Tensor3) -> None:
    _atomic_write(path, encode_tensor(A))


def read_tensor(path) -> Tensor3:
    return decode_tensor(Path(path).read_bytes())


# -- PPM frames -----------------------------------------------------------


def _ppm_tokens(buf: bytes, count: int):
    """First ``count`` header tokens and the offset just past them."""
    tokens, i = [], 0
    while len(tokens) < count:
        while i < len(buf) and buf[i:i + 1].isspace():
            i += 1
        if buf[i:i + 1] == b"#":
            while i < len(buf) and buf[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(buf) and not buf[j:j + 1].isspace() and buf[j:j + 1] != b"#":
            j += 1
        if j == i:
            raise UnsupportedFormat("truncated PPM header")
        tokens.append(buf[i:j])
        i = j
    return tokens, i + 1    # exactly one whitespace byte before the raster


def decode_ppm(buf: bytes) -> Tensor3:
    """P6 image to a ``height x width x 3`` tensor with values in [0, 1]."""
    if buf[:2] != b"P6":
        raise UnsupportedFormat("only binary PPM (P6) is supported")
    tokens, off = _ppm_tokens(buf, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise UnsupportedFormat(f"bad PPM header {tokens!r}") from exc
    if maxval != 255:
        raise UnsupportedFormat(f"only 8-bit PPM is supported (maxval {maxval})")
    need = width * height * 3
    raster = buf[off:off + need]
    if len(raster) < need or width < 1 or height < 1:
        raise UnsupportedFormat("truncated PPM raster")
    img = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
    return Tensor3(img.astype(np.float64) / 255.0)


def encode_ppm(frame: Tensor3) -> bytes:
    h, w, c = frame.shape
    if c != 3:
        raise InconsistentDimensions(f"PPM frames need 3 channels, got {c}")
    img = np.clip(np.round(frame.data * 255.0), 0, 255).astype(np.uint8)
    return f"P6\n{w} {h}\n255\n".encode() + img.tobytes()


def read_frames(paths) -> MarkovSequence:
    frames = [decode_ppm(Path(p).read_bytes()) for p in paths]
    if not frames:
        raise ValidationError("no frames given")
    shape = frames[0].shape
    for p, f in zip(paths, frames):
        if f.shape != shape:
            raise InconsistentDimensions(f"{p}: frame shape {f.shape} differs from {shape}")
    return MarkovSequence(frames)


def frame_paths(directory) -> list[Path]:
    """``*.ppm`` files in ``directory``, sorted by name."""
    paths = sorted(Path(directory).glob("*.ppm"))
    if not paths:
        raise ValidationError(f"no .ppm files in {directory}")
    return paths


def write_frames(directory, frames: MarkovSequence, prefix: str = "frame") -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(len(frames) - 1)))
    out = []
    for j, f in enumerate(frames.Z):
        p = d / f"{prefix}_{j:0{width}d}.ppm"
        _atomic_write(p, encode_ppm(f))
        out.append(p)
    return out


# -- reports --------------------------------------------------------------


def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _json_num(x) -> str:
    s = _num(x)
    return "null" if s in ("nan", "inf", "-inf") else s


def report_csv(rows) -> str:
    lines = [",".join(REPORT_FIELDS)]
    for r in rows:
        lines.append(",".join([r.method] + [_num(getattr(r, f)) for f in REPORT_FIELDS[1:]]))
    return "\n".join(lines) + "\n"


def report_json(rows) -> str:
    items = []
    for r in rows:
        parts = [f'"method": {json.dumps(r.method)}']
        parts += [f'"{f}": {_json_num(getattr(r, f))}' for f in REPORT_FIELDS[1:]]
        parts.append(f'"status": {json.dumps(r.status)}')
        items.append("  {" + ", ".join(parts) + "}")
    return "[\n" + ",\n".join(items) + "\n]\n"


def emit_report(rows, fmt: str = "csv", path=None) -> str:
    """Serialize rows as CSV or JSON; write to ``path`` if given."""
    rows = list(rows)
    if not rows:
        raise ValidationError("report has no rows")
    if fmt == "csv":
        text = report_csv(rows)
    elif fmt == "json":
        text = report_json(rows)
    else:
        raise ValidationError(f"unknown report format {fmt!r}")
    if path is not None:
        _atomic_write(path, text.encode())
    return text


def parse_report(text: str, fmt: str = "csv"):
    """Inverse of :func:`emit_report` (used for round-trip checks)."""
    from .bench import ReportRow

    def num(v, kind):
        if v is None or v == "nan":
            return -1 if kind is int else float("nan")
        return kind(v)

    if fmt == "json":
        raw = json.loads(text)
        return [ReportRow(d["method"], int(d["k"]), num(d["time_s"], float), num(d["params"], int),
                          num(d["bytes"], int), num(d["rel_err"], float), num(d["bound"], float),
                          d.get("status", "ok")) for d in raw]
    reader = csv.DictReader(text.splitlines())
    if tuple(reader.fieldnames or ()) != REPORT_FIELDS:
        raise ValidationError(f"unexpected CSV header {reader.fieldnames}")
    return [ReportRow(d["method"], int(d["k"]), float(d["time_s"]), int(d["params"]),
                      int(d["bytes"]), float(d["rel_err"]), float(d["bound"]),
                      "ok" if d["rel_err"] != "nan" else "failed") for d in reader]


# -- config ---------------------------------------------------------------


def load_config(path):
    """Read an :class:`~tprod_mor.bench.ExperimentConfig` from a TOML file.

    Keys may sit at the top level or under an ``[experiment]`` table;
    unknown keys are rejected.
    """
    from .bench import ExperimentConfig

    try:
        with open(path, "rb") as fh:
            d = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if set(d) == {"experiment"}:
        d = d["experiment"]
    for key in ("ks", "methods"):
        if key in d and not isinstance(d[key], list):
            raise ConfigError(f"{key} must be a list")
    try:
        return ExperimentConfig.from_dict(d)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
