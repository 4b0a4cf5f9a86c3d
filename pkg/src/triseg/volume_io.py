"""NIfTI-1 volume and mask I/O plus intensity normalization.

Reads and writes single-frame 3D NIfTI-1 files (.nii / .nii.gz, plus the
two-file .hdr/.img layout on read). Only canonical axis-aligned volumes are
handled; inputs are assumed already registered to a common space or synthetic.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionalityError,
    NiftiFormatError,
    ShapeError,
    UnsupportedDtypeError,
)

HEADER_SIZE = 348
_MAGIC_SINGLE = b"n+1\x00"
_MAGIC_PAIR = b"ni1\x00"

# NIfTI-1 datatype code -> numpy dtype. Deliberately restricted to the scalar
# types this pipeline produces or consumes.
_DTYPES = {
    2: np.uint8,
    4: np.int16,
    16: np.float32,
    64: np.float64,
}
_DTYPE_CODES = {np.dtype(v): k for k, v in _DTYPES.items()}


@dataclass
class ScalarVolume:
    """3D intensity grid with voxel geometry and source-range metadata.

    ``source_range`` keeps the (min, max) of the data before normalization so
    the original intensity scale stays recoverable.
    """

    data: np.ndarray
    voxel_size: tuple[float, float, float] = (1.0, 1.0, 1.0)
    source_range: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 3:
            raise DimensionalityError(
                f"ScalarVolume requires 3D data, got shape {self.data.shape}"
            )

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass
class BinaryMask:
    """3D {0,1} grid paired with a ScalarVolume of equal dims."""

    data: np.ndarray = field()

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise DimensionalityError(
                f"BinaryMask requires 3D data, got shape {arr.shape}"
            )
        uniq = np.unique(arr)
        if not np.isin(uniq, (0, 1)).all():
            raise ValueError(f"mask values must be binary, found {uniq[:8]}")
        self.data = arr.astype(np.uint8)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    def foreground_count(self) -> int:
        return int(self.data.sum())


def _open_maybe_gzip(path: Path):
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _parse_header(raw: bytes) -> dict:
    if len(raw) < HEADER_SIZE:
        raise NiftiFormatError(
            f"sizeof_hdr: file holds only {len(raw)} header bytes, need {HEADER_SIZE}"
        )
    order = "<"
    sizeof_hdr = struct.unpack_from("<i", raw, 0)[0]
    if sizeof_hdr != HEADER_SIZE:
        order = ">"
        sizeof_hdr = struct.unpack_from(">i", raw, 0)[0]
        if sizeof_hdr != HEADER_SIZE:
            raise NiftiFormatError(
                f"sizeof_hdr is {sizeof_hdr} in either byte order, expected {HEADER_SIZE}"
            )
    magic = raw[344:348]
    if magic not in (_MAGIC_SINGLE, _MAGIC_PAIR):
        raise NiftiFormatError(
            f"magic is {magic!r}, expected {_MAGIC_SINGLE!r} or {_MAGIC_PAIR!r}"
        )
    hdr = {
        "byteorder": order,
        "magic": magic,
        "dim": struct.unpack_from(order + "8h", raw, 40),
        "datatype": struct.unpack_from(order + "h", raw, 70)[0],
        "bitpix": struct.unpack_from(order + "h", raw, 72)[0],
        "pixdim": struct.unpack_from(order + "8f", raw, 76),
        "vox_offset": struct.unpack_from(order + "f", raw, 108)[0],
        "scl_slope": struct.unpack_from(order + "f", raw, 112)[0],
        "scl_inter": struct.unpack_from(order + "f", raw, 116)[0],
    }
    return hdr


def _spatial_dims(hdr: dict) -> tuple[int, int, int]:
    dim = hdr["dim"]
    ndim = dim[0]
    if not 1 <= ndim <= 7:
        raise NiftiFormatError(f"dim[0] is {ndim}, expected 1..7")
    axes = [int(d) for d in dim[1 : 1 + ndim]]
    if any(d < 1 for d in axes):
        raise NiftiFormatError(f"dim holds non-positive axis lengths: {axes}")
    if ndim < 3:
        raise DimensionalityError(f"expected a 3D volume, header declares {ndim}D")
    extra = [d for d in axes[3:] if d != 1]
    if extra:
        raise DimensionalityError(
            f"single 3D frame required; trailing axes {axes[3:]} are not all 1"
        )
    return axes[0], axes[1], axes[2]


def _read_raw(path: str | Path) -> tuple[dict, np.ndarray]:
    path = Path(path)
    with _open_maybe_gzip(path) as fh:
        raw = fh.read(HEADER_SIZE)
        hdr = _parse_header(raw)
        dims = _spatial_dims(hdr)
        code = hdr["datatype"]
        if code not in _DTYPES:
            raise UnsupportedDtypeError(
                f"datatype code {code} unsupported; supported codes: "
                f"{sorted(_DTYPES)} (uint8, int16, float32, float64)"
            )
        dt = np.dtype(_DTYPES[code]).newbyteorder(hdr["byteorder"])
        nbytes = int(np.prod(dims)) * dt.itemsize
        if hdr["magic"] == _MAGIC_SINGLE:
            offset = int(round(hdr["vox_offset"]))
            fh.read(max(offset - HEADER_SIZE, 0))
            buf = fh.read(nbytes)
        else:
            img_path = _sibling_img(path)
            with _open_maybe_gzip(img_path) as img:
                img.read(int(round(hdr["vox_offset"])))
                buf = img.read(nbytes)
    if len(buf) < nbytes:
        raise NiftiFormatError(
            f"vox_offset/dim: expected {nbytes} data bytes, file holds {len(buf)}"
        )
    data = np.frombuffer(buf, dtype=dt).reshape(dims, order="F")
    return hdr, data


def _sibling_img(path: Path) -> Path:
    stem = path.name
    for suffix in (".hdr.gz", ".hdr"):
        if stem.endswith(suffix):
            stem = stem[: -len(suffix)]
            break
    for candidate in (path.with_name(stem + ".img"), path.with_name(stem + ".img.gz")):
        if candidate.exists():
            return candidate
    raise NiftiFormatError(f"magic 'ni1' header but no data file next to {path}")


def load_volume(path: str | Path) -> ScalarVolume:
    """Load a 3D NIfTI-1 volume, applying scl_slope/scl_inter if set.

    Integer data is promoted to float32 (compute precision is at least 32-bit
    regardless of on-disk storage); float64 stays float64.
    """
    hdr, data = _read_raw(path)
    if data.dtype.kind in "ui" or data.dtype.itemsize < 4:
        data = data.astype(np.float32)
    else:
        data = data.astype(data.dtype.newbyteorder("="))
    slope, inter = hdr["scl_slope"], hdr["scl_inter"]
    if slope != 0.0 and (slope, inter) != (1.0, 0.0):
        data = data * slope + inter
    pixdim = hdr["pixdim"]
    voxel_size = tuple(float(abs(p)) if p != 0 else 1.0 for p in pixdim[1:4])
    return ScalarVolume(
        data=data,
        voxel_size=voxel_size,
        source_range=(float(data.min()), float(data.max())),
    )


def load_mask(path: str | Path) -> BinaryMask:
    """Load a binary segmentation mask; values must be exactly {0,1}."""
    _, data = _read_raw(path)
    return BinaryMask(data=np.ascontiguousarray(data))


def minmax_normalize(vol: ScalarVolume) -> ScalarVolume:
    """Rescale intensities to [0, 1] via (v - min) / (max - min).

    A constant volume maps to all zeros; the pre-normalization range is kept
    in ``source_range``.
    """
    data = vol.data
    if data.size == 0:
        raise ValueError("cannot normalize an empty volume")
    if data.dtype != np.float64:
        data = data.astype(np.float32)
    mn = float(data.min())
    mx = float(data.max())
    if mx == mn:
        out = np.zeros_like(data)
    else:
        out = (data - mn) / (mx - mn)
    return ScalarVolume(data=out, voxel_size=vol.voxel_size, source_range=(mn, mx))


def _build_header(dims: tuple[int, int, int], voxel_size, datatype_code: int) -> bytes:
    dt = np.dtype(_DTYPES[datatype_code])
    hdr = bytearray(HEADER_SIZE)
    struct.pack_into("<i", hdr, 0, HEADER_SIZE)
    hdr[38] = ord("r")  # regular
    struct.pack_into("<8h", hdr, 40, 3, dims[0], dims[1], dims[2], 1, 1, 1, 1)
    struct.pack_into("<h", hdr, 70, datatype_code)
    struct.pack_into("<h", hdr, 72, dt.itemsize * 8)
    struct.pack_into(
        "<8f", hdr, 76, 1.0, voxel_size[0], voxel_size[1], voxel_size[2], 0, 0, 0, 0
    )
    struct.pack_into("<f", hdr, 108, float(HEADER_SIZE + 4))  # vox_offset
    struct.pack_into("<f", hdr, 112, 1.0)  # scl_slope
    struct.pack_into("<f", hdr, 116, 0.0)  # scl_inter
    hdr[123] = 2  # xyzt_units: millimetres
    struct.pack_into("<80s", hdr, 148, b"triseg")
    struct.pack_into("<h", hdr, 254, 1)  # sform_code
    struct.pack_into("<4f", hdr, 280, voxel_size[0], 0, 0, 0)
    struct.pack_into("<4f", hdr, 296, 0, voxel_size[1], 0, 0)
    struct.pack_into("<4f", hdr, 312, 0, 0, voxel_size[2], 0)
    struct.pack_into("<4s", hdr, 344, _MAGIC_SINGLE)
    return bytes(hdr)


def _write_nifti(path: Path, data: np.ndarray, voxel_size) -> None:
    code = _DTYPE_CODES[data.dtype]
    payload = _build_header(data.shape, voxel_size, code) + b"\x00\x00\x00\x00"
    payload += data.tobytes(order="F")
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.name.endswith(".gz"):
        # mtime and name pinned so identical volumes produce identical bytes
        with open(path, "wb") as fh:
            with gzip.GzipFile(filename="", fileobj=fh, mode="wb", mtime=0) as gz:
                gz.write(payload)
    else:
        with open(path, "wb") as fh:
            fh.write(payload)


def save_volume(vol: ScalarVolume, path: str | Path) -> None:
    """Write a ScalarVolume as a float NIfTI-1 file (.nii or .nii.gz)."""
    data = vol.data
    if data.dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        data = data.astype(np.float32)
    _write_nifti(Path(path), data, vol.voxel_size)


def save_mask(mask: BinaryMask, geometry_from: ScalarVolume, path: str | Path) -> None:
    """Write a mask as unsigned 8-bit NIfTI, copying geometry from its volume."""
    if mask.dims != geometry_from.dims:
        raise ShapeError(
            f"mask dims {mask.dims} do not match source volume dims {geometry_from.dims}"
        )
    _write_nifti(Path(path), mask.data.astype(np.uint8), geometry_from.voxel_size)
