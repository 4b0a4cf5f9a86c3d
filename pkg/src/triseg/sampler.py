"""Border-centered patch sampling and train-time augmentation.

Training draws square patches whose centers sit on the in-plane border of
the target mask, with a fixed fraction of fully random positions mixed in.
Augmentation order is flip, then brightness, then noise; there are no
vertical flips.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, ShapeError
from .geometry import Orientation, e2d_channels, num_slices, take_slice
from .volume_io import BinaryMask, ScalarVolume

PATCH_SIZE = 64
RANDOM_PATCH_PROB = 0.2
FLIP_PROB = 0.2
NOISE_PROB = 0.2
BRIGHTNESS_RANGE = (0.9, 1.1)
NOISE_VARIANCE = 2e-4


def border_pixels_2d(mask: np.ndarray) -> np.ndarray:
    """(n, 2) coordinates of foreground pixels 4-adjacent to background.

    Pixels on the image edge count as adjacent to background, so a mask
    touching the edge still has a border there.
    """
    mask = np.asarray(mask) != 0
    if mask.ndim != 2:
        raise ShapeError(f"expected a 2D mask slice, got shape {mask.shape}")
    interior = np.zeros_like(mask)
    interior[1:-1, 1:-1] = (
        mask[1:-1, 1:-1]
        & mask[:-2, 1:-1]
        & mask[2:, 1:-1]
        & mask[1:-1, :-2]
        & mask[1:-1, 2:]
    )
    return np.argwhere(mask & ~interior)


def extract_window(arr: np.ndarray, center: tuple[int, int], size: int) -> np.ndarray:
    """Square window centered on a pixel, zero-padded past the image edge.

    The center pixel lands at index size // 2 along both axes.
    """
    half = size // 2
    out = np.zeros((size, size), dtype=arr.dtype)
    r0, c0 = center[0] - half, center[1] - half
    src_r = slice(max(r0, 0), min(r0 + size, arr.shape[0]))
    src_c = slice(max(c0, 0), min(c0 + size, arr.shape[1]))
    if src_r.stop > src_r.start and src_c.stop > src_c.start:
        out[
            src_r.start - r0 : src_r.stop - r0, src_c.start - c0 : src_c.stop - c0
        ] = arr[src_r, src_c]
    return out


class PatchSource:
    """One volume/mask pair viewed along a fixed orientation.

    Precomputes the (slice, row, col) coordinates of every border pixel so
    sampling never rescans the mask.
    """

    def __init__(self, volume: ScalarVolume, mask: BinaryMask, orientation):
        if volume.dims != mask.dims:
            raise ShapeError(
                f"volume dims {volume.dims} do not match mask dims {mask.dims}"
            )
        self.orientation = Orientation.parse(orientation)
        self.volume = volume
        self.mask = mask
        coords = []
        for k in range(num_slices(mask.dims, self.orientation)):
            pix = border_pixels_2d(take_slice(mask.data, self.orientation, k))
            if len(pix):
                coords.append(
                    np.column_stack([np.full(len(pix), k, dtype=np.int64), pix])
                )
        self.border = (
            np.concatenate(coords) if coords else np.zeros((0, 3), dtype=np.int64)
        )

    @property
    def n_border(self) -> int:
        return len(self.border)

    def channels(self, k: int, e2d: bool) -> np.ndarray:
        if e2d:
            return e2d_channels(self.volume.data, self.orientation, k)
        return take_slice(self.volume.data, self.orientation, k)[None]

    def target(self, k: int) -> np.ndarray:
        return take_slice(self.mask.data, self.orientation, k)


class TrainingSampler:
    """Draws augmented patch batches from a pool of sources.

    Border centers are sampled uniformly over the pooled border pixels of
    all sources; with probability ``random_patch_prob`` a sample instead
    uses a uniform random slice and center. With ``augment=False`` every
    sample is border-centered and no augmentation is applied.
    """

    def __init__(
        self,
        sources,
        patch_size: int = PATCH_SIZE,
        e2d: bool = True,
        augment: bool = True,
        random_patch_prob: float = RANDOM_PATCH_PROB,
        flip_prob: float = FLIP_PROB,
        noise_prob: float = NOISE_PROB,
        brightness_range: tuple[float, float] = BRIGHTNESS_RANGE,
        noise_variance: float = NOISE_VARIANCE,
    ):
        sources = list(sources)
        if not sources:
            raise ConfigurationError("sampler needs at least one source")
        if patch_size < 1:
            raise ConfigurationError(f"patch_size must be positive, got {patch_size}")
        self.sources = sources
        self.patch_size = patch_size
        self.e2d = e2d
        self.augment = augment
        self.random_patch_prob = random_patch_prob
        self.flip_prob = flip_prob
        self.noise_prob = noise_prob
        self.brightness_range = brightness_range
        self.noise_std = float(np.sqrt(noise_variance))
        counts = np.array([s.n_border for s in sources], dtype=np.int64)
        self._cum = np.cumsum(counts)
        if self.total_border == 0:
            raise ConfigurationError(
                "no border pixels in any source; masks are empty"
            )

    @property
    def total_border(self) -> int:
        return int(self._cum[-1])

    def _pick_border(self, rng) -> tuple[PatchSource, int, int, int]:
        idx = int(rng.integers(self.total_border))
        si = int(np.searchsorted(self._cum, idx, side="right"))
        local = idx - (self._cum[si - 1] if si else 0)
        k, i, j = self.sources[si].border[local]
        return self.sources[si], int(k), int(i), int(j)

    def _pick_random(self, rng) -> tuple[PatchSource, int, int, int]:
        src = self.sources[int(rng.integers(len(self.sources)))]
        dims = src.mask.dims
        axis = src.orientation.axis
        plane = [d for a, d in enumerate(dims) if a != axis]
        k = int(rng.integers(dims[axis]))
        return src, k, int(rng.integers(plane[0])), int(rng.integers(plane[1]))

    def _one(self, rng) -> tuple[np.ndarray, np.ndarray]:
        if self.augment and rng.random() < self.random_patch_prob:
            src, k, i, j = self._pick_random(rng)
        else:
            src, k, i, j = self._pick_border(rng)
        chans = src.channels(k, self.e2d)
        x = np.stack(
            [extract_window(c, (i, j), self.patch_size) for c in chans]
        ).astype(np.float32)
        y = extract_window(src.target(k), (i, j), self.patch_size).astype(np.float32)
        if self.augment:
            x, y = self._augment(rng, x, y)
        return x, y[None]

    def _augment(self, rng, x: np.ndarray, y: np.ndarray):
        if rng.random() < self.flip_prob:
            x = x[:, :, ::-1]
            y = y[:, ::-1]
        factor = rng.uniform(*self.brightness_range)
        x = np.clip(x * factor, 0.0, 1.0)
        if rng.random() < self.noise_prob:
            x = np.clip(x + rng.normal(0.0, self.noise_std, x.shape), 0.0, 1.0)
        return np.ascontiguousarray(x, dtype=np.float32), np.ascontiguousarray(y)

    def sample_batch(self, rng, batch_size: int) -> tuple[np.ndarray, np.ndarray]:
        if batch_size < 1:
            raise ConfigurationError(f"batch_size must be positive, got {batch_size}")
        xs, ys = zip(*(self._one(rng) for _ in range(batch_size)))
        return np.stack(xs), np.stack(ys)


def build_sources(pairs, orientation, e2d: bool = True) -> list[PatchSource]:
    """PatchSources for (volume, mask) pairs along one orientation."""
    return [PatchSource(v, m, orientation) for v, m in pairs]
