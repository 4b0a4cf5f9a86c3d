"""Slice-sweep prediction, tri-planar heatmap fusion, and mask cleanup.

Each orientation's network sweeps its slice axis to produce a probability
volume; the three volumes are averaged voxelwise, thresholded, and cleaned
by keeping the two largest connected components.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import ConfigurationError, ShapeError
from .geometry import (
    Orientation,
    center_crop,
    e2d_channels,
    num_slices,
    pad_back,
    stack_slices,
    take_slice,
)
from .labeling import keep_largest
from .volume_io import BinaryMask, ScalarVolume

THRESHOLD = 0.5
KEEP_COMPONENTS = 2
EQUAL_WEIGHTS = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)


def predict_heatmap(
    model,
    volume: ScalarVolume,
    orientation,
    crop_size: int = 160,
    e2d: bool = True,
    chunk: int = 8,
) -> np.ndarray:
    """Probability volume from one network sweeping one orientation.

    Every slice is center-cropped to the evaluation window, pushed through
    the network, and padded back, so voxels outside the window get
    probability 0.
    """
    orientation = Orientation.parse(orientation)
    data = volume.data.astype(np.float32, copy=False)
    n = num_slices(volume.dims, orientation)
    model.eval()
    out_slices: list[np.ndarray] = []
    pending: list[tuple[np.ndarray, tuple[int, int], tuple[int, int]]] = []

    def flush():
        if not pending:
            return
        x = torch.from_numpy(np.stack([p[0] for p in pending]))
        with torch.no_grad():
            probs = model(x).numpy()
        for prob, (_, offs, shape) in zip(probs, pending):
            out_slices.append(pad_back(prob[0], shape, offs))
        pending.clear()

    for k in range(n):
        if e2d:
            chans = e2d_channels(data, orientation, k)
        else:
            chans = take_slice(data, orientation, k)[None]
        cropped = []
        offs = (0, 0)
        for c in chans:
            win, offs = center_crop(c, crop_size)
            cropped.append(win)
        pending.append(
            (np.stack(cropped).astype(np.float32), offs, chans[0].shape)
        )
        if len(pending) >= chunk:
            flush()
    flush()
    return stack_slices(out_slices, orientation).astype(np.float32)


def fuse(heatmaps, weights=None) -> np.ndarray:
    """Voxelwise weighted mean of probability volumes.

    Weights default to the equal consensus (1/3 each) and must sum to 1.
    Accumulation runs in float64; with equal weights the maps are summed
    before scaling, so the result is invariant to input order.
    """
    maps = [np.asarray(h) for h in heatmaps]
    if not maps:
        raise ConfigurationError("fuse needs at least one heatmap")
    shape = maps[0].shape
    for m in maps[1:]:
        if m.shape != shape:
            raise ShapeError(f"heatmap shapes differ: {shape} vs {m.shape}")
    if weights is None:
        weights = tuple(1.0 / len(maps) for _ in maps)
    weights = tuple(float(w) for w in weights)
    if len(weights) != len(maps):
        raise ConfigurationError(
            f"{len(weights)} weights for {len(maps)} heatmaps"
        )
    if any(w < 0 for w in weights):
        raise ConfigurationError(f"weights must be non-negative, got {weights}")
    if abs(sum(weights) - 1.0) > 1e-6:
        raise ConfigurationError(f"weights must sum to 1, got sum {sum(weights)}")
    if len(set(weights)) == 1:
        acc = np.zeros(shape, dtype=np.float64)
        for m in maps:
            acc += m.astype(np.float64)
        fused = acc * weights[0]
    else:
        fused = np.zeros(shape, dtype=np.float64)
        for w, m in zip(weights, maps):
            fused += w * m.astype(np.float64)
    return fused.astype(np.float32)


def threshold_heatmap(fused: np.ndarray, ths: float = THRESHOLD) -> np.ndarray:
    """Binarize strictly above the threshold (exactly ths maps to 0)."""
    if not 0.0 <= ths < 1.0:
        raise ConfigurationError(f"threshold must lie in [0, 1), got {ths}")
    return (np.asarray(fused) > ths).astype(np.uint8)


def postprocess(binary: np.ndarray, keep: int = KEEP_COMPONENTS) -> np.ndarray:
    """Drop all but the largest connected components (26-neighborhood)."""
    return keep_largest(binary, k=keep, connectivity=26)


@dataclass
class SegmentationResult:
    mask: BinaryMask
    fused: np.ndarray
    heatmaps: dict[str, np.ndarray] = field(default_factory=dict)


def segment_volume(
    models: dict,
    volume: ScalarVolume,
    crop_size: int = 160,
    e2d: bool = True,
    weights=None,
    ths: float = THRESHOLD,
    keep: int = KEEP_COMPONENTS,
) -> SegmentationResult:
    """Full consensus pipeline over a normalized volume.

    ``models`` maps orientation to a trained network; all three orientations
    must be present. Weights follow the order sagittal, coronal, axial.
    """
    ordered = []
    for o in (Orientation.SAGITTAL, Orientation.CORONAL, Orientation.AXIAL):
        key = o if o in models else o.value
        if key not in models:
            raise ConfigurationError(f"missing model for orientation {o.value!r}")
        ordered.append((o, models[key]))
    heatmaps = {
        o.value: predict_heatmap(m, volume, o, crop_size=crop_size, e2d=e2d)
        for o, m in ordered
    }
    fused = fuse([heatmaps[o.value] for o, _ in ordered], weights)
    mask = postprocess(threshold_heatmap(fused, ths), keep=keep)
    return SegmentationResult(
        mask=BinaryMask(data=mask), fused=fused, heatmaps=heatmaps
    )
