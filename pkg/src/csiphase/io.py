"""Bit-exact interchange formats for CSI matrices and feature exports.

Three formats live here:

* CSIF, a tiny binary container: a 16-byte little-endian header
  (magic ``CSIF``, version, payload-kind flags, row and column counts)
  followed by the matrix row-major as 64-bit floats, interleaved
  (re, im) pairs for complex payloads. Round trips are byte-identical.
* CSV tables with 1-based ``s,k`` coordinates and 17-significant-digit
  values, so a CSIF -> CSV -> CSIF round trip is lossless.
* Raw feature payloads with a key=value sidecar describing shape,
  element type, byte order and the producing pipeline parameters.

Readers reject malformed input instead of repairing it; the exception
classes below say what was wrong and where.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .core import AmplitudeMatrix, CsiMatrix, PhaseMatrix

__all__ = [
    "CsifError",
    "CsifMagicError",
    "CsifVersionError",
    "CsifTruncatedError",
    "write_csif",
    "read_csif",
    "write_csv",
    "read_csv",
    "write_table",
    "export_features",
    "import_features",
]

_MAGIC = b"CSIF"
_VERSION = 1
_FLAG_COMPLEX = 0x0001
_FLAG_REAL = 0x0002
_HEADER = struct.Struct("<4sHHII")


class CsifError(ValueError):
    """A CSIF file violates the format."""


class CsifMagicError(CsifError):
    """The four magic bytes at offset 0 are wrong."""


class CsifVersionError(CsifError):
    """The version field at offset 4 names an unsupported format version."""


class CsifTruncatedError(CsifError):
    """The file ends before the declared payload does."""


def _payload_array(matrix) -> tuple[np.ndarray, int]:
    if isinstance(matrix, CsiMatrix):
        return np.ascontiguousarray(matrix.values, dtype="<c16"), _FLAG_COMPLEX
    if isinstance(matrix, (PhaseMatrix, AmplitudeMatrix)):
        return np.ascontiguousarray(matrix.values, dtype="<f8"), _FLAG_REAL
    arr = np.asarray(matrix)
    if arr.ndim != 2:
        raise ValueError(f"need a 2-D matrix, got shape {arr.shape}")
    if np.iscomplexobj(arr):
        return np.ascontiguousarray(arr, dtype="<c16"), _FLAG_COMPLEX
    return np.ascontiguousarray(arr, dtype="<f8"), _FLAG_REAL


def write_csif(path: str | Path, matrix) -> None:
    """Write a complex or real matrix as a CSIF file.

    ``CsiMatrix`` payloads are flagged complex; ``PhaseMatrix``,
    ``AmplitudeMatrix`` and plain real arrays are flagged real.
    """
    arr, flags = _payload_array(matrix)
    s, k = arr.shape
    header = _HEADER.pack(_MAGIC, _VERSION, flags, s, k)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes(order="C"))


def read_csif(path: str | Path) -> CsiMatrix | np.ndarray:
    """Read a CSIF file.

    Returns:
        A ``CsiMatrix`` for complex payloads, or a plain read-only
        float64 array for real payloads (the file does not record
        whether a real payload was phase or amplitude).

    Raises:
        CsifMagicError: the file does not start with ``CSIF``.
        CsifVersionError: the version field is not 1.
        CsifTruncatedError: header or payload is shorter than declared,
            or trailing bytes follow the payload.
        CsifError: the flags or dimension fields are invalid.
    """
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise CsifTruncatedError(
            f"header needs {_HEADER.size} bytes, file has only {len(blob)}"
        )
    magic, version, flags, s, k = _HEADER.unpack_from(blob, 0)
    if magic != _MAGIC:
        raise CsifMagicError(f"bad magic {magic!r} at offset 0, expected {_MAGIC!r}")
    if version != _VERSION:
        raise CsifVersionError(
            f"unsupported version {version} at offset 4, expected {_VERSION}"
        )
    if flags not in (_FLAG_COMPLEX, _FLAG_REAL):
        raise CsifError(
            f"flags 0x{flags:04x} at offset 6 must set exactly one of "
            f"bit0 (complex) or bit1 (real)"
        )
    if s < 1 or k < 1:
        raise CsifError(f"dimensions {s}x{k} in header must both be at least 1")

    width = 16 if flags == _FLAG_COMPLEX else 8
    expected = s * k * width
    actual = len(blob) - _HEADER.size
    if actual < expected:
        raise CsifTruncatedError(
            f"payload at offset {_HEADER.size} needs {expected} bytes, found {actual}"
        )
    if actual > expected:
        raise CsifTruncatedError(
            f"payload at offset {_HEADER.size} declares {expected} bytes but "
            f"{actual - expected} trailing bytes follow"
        )

    if flags == _FLAG_COMPLEX:
        values = np.frombuffer(blob, dtype="<c16", offset=_HEADER.size).reshape(s, k)
        return CsiMatrix(values)
    values = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).reshape(s, k).copy()
    values.setflags(write=False)
    return values


_CSV_WHAT = {"complex": ("s", "k", "re", "im"), "phase": ("s", "k", "value"), "amplitude": ("s", "k", "value")}


def _fmt(x: float) -> str:
    return "%.17g" % x


def write_csv(path: str | Path, matrix, what: str | None = None) -> None:
    """Write a matrix as a CSV table with 1-based (s, k) coordinates.

    ``what`` picks the schema: "complex" (columns s,k,re,im) for a
    ``CsiMatrix``, "phase" or "amplitude" (columns s,k,value) for the
    matching real container. When omitted it is inferred from the
    matrix type. Values carry 17 significant digits, enough for an
    exact float64 round trip.
    """
    if what is None:
        what = {CsiMatrix: "complex", PhaseMatrix: "phase", AmplitudeMatrix: "amplitude"}.get(type(matrix))
        if what is None:
            raise ValueError(f"cannot infer CSV schema for {type(matrix).__name__}")
    if what not in _CSV_WHAT:
        raise ValueError(f"what must be one of {sorted(_CSV_WHAT)}, got {what!r}")
    expected_type = {"complex": CsiMatrix, "phase": PhaseMatrix, "amplitude": AmplitudeMatrix}[what]
    if not isinstance(matrix, expected_type):
        raise ValueError(
            f"schema {what!r} needs a {expected_type.__name__}, got {type(matrix).__name__}"
        )

    values = matrix.values
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_WHAT[what])
        for si in range(values.shape[0]):
            for ki in range(values.shape[1]):
                v = values[si, ki]
                if what == "complex":
                    writer.writerow([si + 1, ki + 1, _fmt(v.real), _fmt(v.imag)])
                else:
                    writer.writerow([si + 1, ki + 1, _fmt(v)])


def _parse_coord(text: str, name: str, line: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ValueError(f"line {line}: {name}={text!r} is not an integer") from None
    if value < 1:
        raise ValueError(f"line {line}: {name}={value} must be at least 1")
    return value


def _parse_value(text: str, name: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"line {line}: {name}={text!r} is not a number") from None
    if not np.isfinite(value):
        raise ValueError(f"line {line}: {name}={text!r} is not finite")
    return value


def read_csv(path: str | Path) -> CsiMatrix | np.ndarray:
    """Read a CSV table written by :func:`write_csv`.

    The header row decides the payload kind: ``s,k,re,im`` yields a
    ``CsiMatrix``, ``s,k,value`` a read-only float64 array. Every (s, k)
    cell of the implied grid must appear exactly once; ragged rows,
    non-numeric cells and duplicate coordinates are rejected with their
    line number.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError("empty CSV file")
    header = tuple(h.strip() for h in rows[0])
    if header == _CSV_WHAT["complex"]:
        n_fields = 4
    elif header == _CSV_WHAT["phase"]:
        n_fields = 3
    else:
        raise ValueError(
            f"line 1: header {','.join(header)!r} is neither 's,k,re,im' nor 's,k,value'"
        )

    cells: dict[tuple[int, int], complex | float] = {}
    for offset, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != n_fields:
            raise ValueError(
                f"line {offset}: expected {n_fields} fields, got {len(row)}"
            )
        s = _parse_coord(row[0], "s", offset)
        k = _parse_coord(row[1], "k", offset)
        if (s, k) in cells:
            raise ValueError(f"line {offset}: duplicate cell (s={s}, k={k})")
        if n_fields == 4:
            cells[(s, k)] = complex(
                _parse_value(row[2], "re", offset), _parse_value(row[3], "im", offset)
            )
        else:
            cells[(s, k)] = _parse_value(row[2], "value", offset)

    if not cells:
        raise ValueError("CSV file has a header but no data rows")
    s_max = max(s for s, _ in cells)
    k_max = max(k for _, k in cells)
    if len(cells) != s_max * k_max:
        raise ValueError(
            f"incomplete grid: found {len(cells)} cells, the coordinates imply "
            f"{s_max}x{k_max} = {s_max * k_max}"
        )

    if n_fields == 4:
        values = np.empty((s_max, k_max), dtype=np.complex128)
    else:
        values = np.empty((s_max, k_max), dtype=np.float64)
    for (s, k), v in cells.items():
        values[s - 1, k - 1] = v
    if n_fields == 4:
        return CsiMatrix(values)
    values.setflags(write=False)
    return values


def write_table(
    path: str | Path,
    header: tuple[str, ...],
    rows,
    *,
    comments: tuple[str, ...] = (),
) -> None:
    """Write a small CSV table, optionally preceded by ``#`` comment lines.

    Floats are rendered with 17 significant digits like :func:`write_csv`;
    everything else with ``str``. Comment lines carry metadata (fitted
    moments, group means) without disturbing the column grid.
    """
    with open(path, "w", newline="") as fh:
        for comment in comments:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [_fmt(c) if isinstance(c, float) else str(c) for c in row]
            )


_FEATURE_DTYPES = {"float64": "<f8", "float32": "<f4"}


def export_features(
    path: str | Path,
    features: np.ndarray,
    *,
    dtype: str = "float64",
    params: dict | None = None,
) -> None:
    """Write a feature matrix as a raw payload plus a text sidecar.

    The payload at ``path`` is the matrix row-major in the chosen
    element type, little-endian. The sidecar at ``path + ".meta"``
    records rows, cols, dtype, byte order and the producing pipeline
    parameters (sorted by key), with nothing time-dependent, so equal
    inputs export byte-identical files.
    """
    if dtype not in _FEATURE_DTYPES:
        raise ValueError(f"dtype must be one of {sorted(_FEATURE_DTYPES)}, got {dtype!r}")
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"need a non-empty 2-D feature matrix, got shape {arr.shape}")
    payload = np.ascontiguousarray(arr, dtype=_FEATURE_DTYPES[dtype])
    Path(path).write_bytes(payload.tobytes(order="C"))

    lines = [
        f"rows={arr.shape[0]}",
        f"cols={arr.shape[1]}",
        f"dtype={dtype}",
        "byte_order=little",
    ]
    for key in sorted(params or {}):
        lines.append(f"param.{key}={params[key]}")
    Path(f"{path}.meta").write_text("\n".join(lines) + "\n")


def import_features(path: str | Path) -> tuple[np.ndarray, dict[str, str]]:
    """Read a feature export back: (float64 matrix, pipeline parameters).

    The sidecar is the authority on shape and element type; a payload
    whose size disagrees with it is rejected.
    """
    meta_path = Path(f"{path}.meta")
    fields: dict[str, str] = {}
    params: dict[str, str] = {}
    for n, line in enumerate(meta_path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{meta_path.name} line {n}: expected key=value, got {line!r}")
        if key.startswith("param."):
            params[key[len("param."):]] = value
        else:
            fields[key] = value

    missing = {"rows", "cols", "dtype", "byte_order"} - fields.keys()
    if missing:
        raise ValueError(f"{meta_path.name}: missing fields {sorted(missing)}")
    if fields["byte_order"] != "little":
        raise ValueError(f"{meta_path.name}: unsupported byte_order {fields['byte_order']!r}")
    if fields["dtype"] not in _FEATURE_DTYPES:
        raise ValueError(f"{meta_path.name}: unsupported dtype {fields['dtype']!r}")
    rows, cols = int(fields["rows"]), int(fields["cols"])
    if rows < 1 or cols < 1:
        raise ValueError(f"{meta_path.name}: rows and cols must be at least 1")

    np_dtype = np.dtype(_FEATURE_DTYPES[fields["dtype"]])
    blob = Path(path).read_bytes()
    expected = rows * cols * np_dtype.itemsize
    if len(blob) != expected:
        raise ValueError(
            f"payload is {len(blob)} bytes, sidecar implies {rows}x{cols} "
            f"{fields['dtype']} = {expected}"
        )
    arr = np.frombuffer(blob, dtype=np_dtype).reshape(rows, cols).astype(np.float64)
    return arr, params
