"""Orientation handling, slicing, and in-plane crop/pad bookkeeping.

Axis convention over (x, y, z) volumes: sagittal slices vary along axis 0,
coronal along axis 1, axial along axis 2. A slice keeps its remaining two
axes in original order.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .errors import GeometryError

CROP_SIZE = 160


class Orientation(str, Enum):
    SAGITTAL = "sagittal"
    CORONAL = "coronal"
    AXIAL = "axial"

    @property
    def axis(self) -> int:
        return _AXIS[self]

    @classmethod
    def parse(cls, value: "str | Orientation") -> "Orientation":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise GeometryError(
                f"unknown orientation {value!r}; expected one of "
                f"{[o.value for o in cls]}"
            ) from None


_AXIS = {
    Orientation.SAGITTAL: 0,
    Orientation.CORONAL: 1,
    Orientation.AXIAL: 2,
}

ALL_ORIENTATIONS = (Orientation.SAGITTAL, Orientation.CORONAL, Orientation.AXIAL)


def num_slices(dims: tuple[int, int, int], orientation: Orientation) -> int:
    return dims[Orientation.parse(orientation).axis]


def take_slice(data: np.ndarray, orientation: Orientation, k: int) -> np.ndarray:
    """Return slice k of a 3D array along the orientation's axis."""
    orientation = Orientation.parse(orientation)
    axis = orientation.axis
    if not 0 <= k < data.shape[axis]:
        raise GeometryError(
            f"slice index {k} out of range for axis {axis} with "
            f"{data.shape[axis]} slices"
        )
    idx = [slice(None)] * 3
    idx[axis] = k
    return data[tuple(idx)]


def stack_slices(slices, orientation: Orientation) -> np.ndarray:
    """Inverse of take_slice over a full sweep: rebuild the 3D array."""
    return np.stack(slices, axis=Orientation.parse(orientation).axis)


def e2d_channels(data: np.ndarray, orientation: Orientation, k: int) -> np.ndarray:
    """Stack slices k-1, k, k+1 as a (3, H, W) array, clamping at the ends.

    The first and last slice duplicate their lone neighbor, so the center
    channel is always slice k.
    """
    orientation = Orientation.parse(orientation)
    n = data.shape[orientation.axis]
    if not 0 <= k < n:
        raise GeometryError(f"slice index {k} out of range for {n} slices")
    lo = max(k - 1, 0)
    hi = min(k + 1, n - 1)
    return np.stack(
        [
            take_slice(data, orientation, lo),
            take_slice(data, orientation, k),
            take_slice(data, orientation, hi),
        ]
    )


def crop_offsets(shape: tuple[int, int], crop_size: int = CROP_SIZE) -> tuple[int, int]:
    """Per-axis start offsets of a centered crop window.

    Negative offsets mean the source is smaller than the window along that
    axis and zero padding fills the overhang.
    """
    if crop_size < 1:
        raise GeometryError(f"crop_size must be positive, got {crop_size}")
    return tuple((d - crop_size) // 2 for d in shape)


def center_crop(
    arr: np.ndarray, crop_size: int = CROP_SIZE
) -> tuple[np.ndarray, tuple[int, int]]:
    """Centered crop of a 2D array to crop_size squared, zero-padding where short.

    Returns the window and the recorded offsets; out[i, j] equals
    arr[i + off0, j + off1] wherever that lands in bounds, else 0.
    """
    if arr.ndim != 2:
        raise GeometryError(f"center_crop expects a 2D slice, got shape {arr.shape}")
    offs = crop_offsets(arr.shape, crop_size)
    out = np.zeros((crop_size, crop_size), dtype=arr.dtype)
    src_lo = [max(o, 0) for o in offs]
    src_hi = [min(o + crop_size, d) for o, d in zip(offs, arr.shape)]
    dst_lo = [s - o for s, o in zip(src_lo, offs)]
    dst_hi = [h - o for h, o in zip(src_hi, offs)]
    out[dst_lo[0] : dst_hi[0], dst_lo[1] : dst_hi[1]] = arr[
        src_lo[0] : src_hi[0], src_lo[1] : src_hi[1]
    ]
    return out, offs


def pad_back(
    cropped: np.ndarray, full_shape: tuple[int, int], offsets: tuple[int, int]
) -> np.ndarray:
    """Place a cropped window back into a zero array of the original shape.

    Exact inverse of center_crop inside the window; voxels outside it are 0.
    """
    if cropped.ndim != 2:
        raise GeometryError(f"pad_back expects a 2D window, got shape {cropped.shape}")
    out = np.zeros(full_shape, dtype=cropped.dtype)
    crop = cropped.shape
    dst_lo = [max(o, 0) for o in offsets]
    dst_hi = [min(o + c, d) for o, c, d in zip(offsets, crop, full_shape)]
    src_lo = [d - o for d, o in zip(dst_lo, offsets)]
    src_hi = [h - o for h, o in zip(dst_hi, offsets)]
    if all(h > l for l, h in zip(dst_lo, dst_hi)):
        out[dst_lo[0] : dst_hi[0], dst_lo[1] : dst_hi[1]] = cropped[
            src_lo[0] : src_hi[0], src_lo[1] : src_hi[1]
        ]
    return out
