"""Minimal single-file NIfTI-1 I/O plus a raw float32 + JSON-header format.

Covers exactly what this toolkit needs: little- or big-endian .nii/.nii.gz
with uint8/int16/int32/float32/float64 voxels, scl_slope/scl_inter scaling,
and 3D grids. Arrays are (D, H, W) = (z, y, x) with x varying fastest on
disk, matching the NIfTI convention; spacing tuples are (sz, sy, sx) mm.

The raw format is a bare little-endian C-order array next to a JSON sidecar
{"shape": [D,H,W], "spacing": [sz,sy,sx], "dtype": "float32"} and exists so
tests and scripted pipelines never depend on header packing.
"""

from __future__ import annotations

import gzip
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import SchemaError

_DTYPE_CODES = {2: np.uint8, 4: np.int16, 8: np.int32, 16: np.float32, 64: np.float64}
_CODE_FOR_DTYPE = {np.dtype(v): k for k, v in _DTYPE_CODES.items()}
_BITPIX = {2: 8, 4: 16, 8: 32, 16: 32, 64: 64}

HEADER_SIZE = 348


def _open_maybe_gz(path: Path, mode: str):
    if str(path).endswith(".gz"):
        return gzip.open(path, mode)
    return open(path, mode)


def read_nifti(path: str | Path) -> tuple[np.ndarray, tuple[float, float, float]]:
    """Read a .nii/.nii.gz file; returns (data (D,H,W), spacing (sz,sy,sx))."""
    path = Path(path)
    with _open_maybe_gz(path, "rb") as f:
        blob = f.read()
    if len(blob) < HEADER_SIZE + 4:
        raise SchemaError(f"{path}: file too short for a NIfTI-1 header")

    sizeof_hdr = struct.unpack_from("<i", blob, 0)[0]
    endian = "<"
    if sizeof_hdr != HEADER_SIZE:
        endian = ">"
        sizeof_hdr = struct.unpack_from(">i", blob, 0)[0]
        if sizeof_hdr != HEADER_SIZE:
            raise SchemaError(f"{path}: not a NIfTI-1 file (sizeof_hdr={sizeof_hdr})")
    magic = blob[344:348]
    if magic[:3] not in (b"n+1", b"ni1"):
        raise SchemaError(f"{path}: bad NIfTI magic {magic!r}")

    dim = struct.unpack_from(endian + "8h", blob, 40)
    ndim = dim[0]
    if ndim < 3 or any(d <= 0 for d in dim[1:4]) or any(d > 1 for d in dim[4 : 1 + max(3, ndim)]):
        raise SchemaError(f"{path}: only 3D volumes are supported, dim={dim}")
    nx, ny, nz = dim[1], dim[2], dim[3]

    datatype = struct.unpack_from(endian + "h", blob, 70)[0]
    if datatype not in _DTYPE_CODES:
        raise SchemaError(f"{path}: unsupported NIfTI datatype code {datatype}")
    pixdim = struct.unpack_from(endian + "8f", blob, 76)
    vox_offset = int(struct.unpack_from(endian + "f", blob, 108)[0])
    scl_slope = struct.unpack_from(endian + "f", blob, 112)[0]
    scl_inter = struct.unpack_from(endian + "f", blob, 116)[0]

    dtype = np.dtype(_DTYPE_CODES[datatype]).newbyteorder(endian)
    count = nx * ny * nz
    data = np.frombuffer(blob, dtype=dtype, count=count, offset=vox_offset)
    data = data.reshape(nz, ny, nx)  # x fastest on disk -> (D,H,W) in C-order

    if scl_slope not in (0.0, 1.0) or scl_inter != 0.0:
        slope = scl_slope if scl_slope != 0.0 else 1.0
        data = data.astype(np.float32) * slope + scl_inter
    else:
        data = data.astype(dtype.newbyteorder("="))

    spacing = (float(pixdim[3]) or 1.0, float(pixdim[2]) or 1.0, float(pixdim[1]) or 1.0)
    return np.ascontiguousarray(data), spacing


def write_nifti(
    path: str | Path,
    data: np.ndarray,
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> Path:
    """Write (D,H,W) data as single-file NIfTI-1; gzips when path ends in .gz."""
    path = Path(path)
    data = np.asarray(data)
    if data.ndim != 3:
        raise SchemaError(f"can only write 3D volumes, got ndim={data.ndim}")
    if data.dtype == np.bool_:
        data = data.astype(np.uint8)
    if np.dtype(data.dtype) not in _CODE_FOR_DTYPE:
        data = data.astype(np.float32)
    code = _CODE_FOR_DTYPE[np.dtype(data.dtype)]

    nz, ny, nx = data.shape
    sz, sy, sx = (float(s) for s in spacing)

    hdr = bytearray(HEADER_SIZE)
    struct.pack_into("<i", hdr, 0, HEADER_SIZE)
    struct.pack_into("<8h", hdr, 40, 3, nx, ny, nz, 1, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, code)
    struct.pack_into("<h", hdr, 72, _BITPIX[code])
    struct.pack_into("<8f", hdr, 76, 1.0, sx, sy, sz, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", hdr, 108, float(HEADER_SIZE + 4))  # vox_offset
    struct.pack_into("<f", hdr, 112, 1.0)  # scl_slope
    struct.pack_into("<f", hdr, 116, 0.0)  # scl_inter
    struct.pack_into("<h", hdr, 252, 1)  # sform_code: scanner
    # identity sform rows scaled by spacing
    struct.pack_into("<4f", hdr, 280, sx, 0.0, 0.0, 0.0)
    struct.pack_into("<4f", hdr, 296, 0.0, sy, 0.0, 0.0)
    struct.pack_into("<4f", hdr, 312, 0.0, 0.0, sz, 0.0)
    hdr[344:348] = b"n+1\x00"

    payload = bytes(hdr) + b"\x00\x00\x00\x00" + np.ascontiguousarray(data).tobytes()
    path.parent.mkdir(parents=True, exist_ok=True)
    with _open_maybe_gz(path, "wb") as f:
        f.write(payload)
    return path


def read_raw(path: str | Path) -> tuple[np.ndarray, tuple[float, float, float]]:
    """Read the raw+sidecar format; sidecar is `<path>.json`."""
    path = Path(path)
    sidecar = Path(str(path) + ".json")
    if not sidecar.exists():
        raise SchemaError(f"{path}: missing JSON header sidecar {sidecar}")
    header = json.loads(sidecar.read_text())
    try:
        shape = tuple(int(v) for v in header["shape"])
        spacing = tuple(float(v) for v in header.get("spacing", (1.0, 1.0, 1.0)))
        dtype = np.dtype(header.get("dtype", "float32")).newbyteorder("<")
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{sidecar}: malformed raw header: {exc}") from exc
    if len(shape) != 3:
        raise SchemaError(f"{sidecar}: shape must have 3 entries, got {shape}")
    data = np.fromfile(path, dtype=dtype)
    if data.size != int(np.prod(shape)):
        raise SchemaError(
            f"{path}: raw payload has {data.size} values, header shape {shape} needs {int(np.prod(shape))}"
        )
    return data.reshape(shape).astype(dtype.newbyteorder("=")), spacing


def write_raw(
    path: str | Path,
    data: np.ndarray,
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0),
    dtype: str = "float32",
) -> Path:
    path = Path(path)
    data = np.ascontiguousarray(np.asarray(data), dtype=np.dtype(dtype).newbyteorder("<"))
    path.parent.mkdir(parents=True, exist_ok=True)
    data.tofile(path)
    Path(str(path) + ".json").write_text(
        json.dumps(
            {"shape": list(data.shape), "spacing": [float(s) for s in spacing], "dtype": dtype}
        )
    )
    return path


def read_volume(path: str | Path) -> tuple[np.ndarray, tuple[float, float, float]]:
    """Dispatch on extension: .nii/.nii.gz -> NIfTI, .raw -> raw+sidecar."""
    name = str(path)
    if name.endswith((".nii", ".nii.gz")):
        return read_nifti(path)
    if name.endswith(".raw"):
        return read_raw(path)
    raise SchemaError(f"unrecognized volume extension: {name}")


def write_volume(path: str | Path, data: np.ndarray, spacing=(1.0, 1.0, 1.0)) -> Path:
    name = str(path)
    if name.endswith((".nii", ".nii.gz")):
        return write_nifti(path, data, spacing)
    if name.endswith(".raw"):
        dtype = "uint8" if np.asarray(data).dtype == np.uint8 else "float32"
        return write_raw(path, data, spacing, dtype=dtype)
    raise SchemaError(f"unrecognized volume extension: {name}")
