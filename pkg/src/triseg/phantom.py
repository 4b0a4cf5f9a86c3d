"""Synthetic bilateral-structure phantoms with exact ground-truth masks.

Each phantom is a smooth background plus two bright ellipsoid targets (one
per hemisphere-like half) and a few dimmer distractor blobs. The mask is the
exact pre-blur, pre-noise union of the two target ellipsoids, so every
downstream stage can be scored against a known answer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ConfigurationError
from .volume_io import BinaryMask, ScalarVolume


@dataclass(frozen=True)
class PhantomConfig:
    dims: tuple[int, int, int] = (64, 64, 64)
    n_distractors: int = 3
    background: float = 0.25
    gradient_amplitude: float = 0.08
    target_boost: float = 0.4
    distractor_boost: float = 0.2
    noise_std: float = 0.02
    blur_sigma: float = 0.7
    # semi-axis ranges as fractions of the volume dims
    target_radius: tuple[float, float] = (0.06, 0.10)
    distractor_radius: tuple[float, float] = (0.04, 0.08)

    def __post_init__(self):
        if len(self.dims) != 3 or any(d < 16 for d in self.dims):
            raise ConfigurationError(
                f"phantom dims must be 3 axes of at least 16, got {self.dims}"
            )
        if self.n_distractors < 0:
            raise ConfigurationError("n_distractors must be non-negative")
        if self.noise_std < 0 or self.blur_sigma < 0:
            raise ConfigurationError("noise_std and blur_sigma must be non-negative")


def _ellipsoid(dims, center, semi) -> np.ndarray:
    grids = np.ogrid[tuple(slice(0, d) for d in dims)]
    acc = np.zeros(dims, dtype=np.float64)
    for g, c, a in zip(grids, center, semi):
        acc = acc + ((g - c) / a) ** 2
    return acc <= 1.0


def _boxes_overlap(c0, a0, c1, a1) -> bool:
    return all(abs(x0 - x1) <= (r0 + r1) for x0, r0, x1, r1 in zip(c0, a0, c1, a1))


def generate_phantom(
    config: PhantomConfig = PhantomConfig(), seed: int = 0
) -> tuple[ScalarVolume, BinaryMask]:
    """Build one phantom volume and its exact mask, deterministic in seed.

    The two targets sit in opposite halves along axis 0 with enough margin
    that the mask always has exactly two separate components.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1)]))
    dims = config.dims
    x, y, z = dims

    zs = np.linspace(-0.5, 0.5, z, dtype=np.float64)
    intensity = np.full(dims, config.background, dtype=np.float64)
    intensity += config.gradient_amplitude * zs[None, None, :]

    mask = np.zeros(dims, dtype=bool)
    target_boxes = []
    # center x-ranges [0.22, 0.34] and [0.66, 0.78] keep the targets apart
    # by more than the largest possible semi-axis sum
    for x_lo, x_hi in ((0.22, 0.34), (0.66, 0.78)):
        center = (
            rng.uniform(x_lo, x_hi) * x,
            rng.uniform(0.30, 0.70) * y,
            rng.uniform(0.30, 0.70) * z,
        )
        semi = tuple(rng.uniform(*config.target_radius) * d for d in dims)
        blob = _ellipsoid(dims, center, semi)
        mask |= blob
        intensity += config.target_boost * blob
        target_boxes.append((center, semi))

    placed = 0
    attempts = 0
    while placed < config.n_distractors and attempts < 100 * max(config.n_distractors, 1):
        attempts += 1
        center = tuple(rng.uniform(0.15, 0.85) * d for d in dims)
        semi = tuple(rng.uniform(*config.distractor_radius) * d for d in dims)
        if any(_boxes_overlap(center, semi, c, a) for c, a in target_boxes):
            continue
        intensity += config.distractor_boost * _ellipsoid(dims, center, semi)
        placed += 1

    if config.blur_sigma > 0:
        intensity = gaussian_filter(intensity, sigma=config.blur_sigma, mode="nearest")
    if config.noise_std > 0:
        intensity = intensity + rng.normal(0.0, config.noise_std, size=dims)
    intensity = np.clip(intensity, 0.0, 1.0).astype(np.float32)

    vol = ScalarVolume(
        data=intensity,
        voxel_size=(1.0, 1.0, 1.0),
        source_range=(float(intensity.min()), float(intensity.max())),
    )
    return vol, BinaryMask(data=mask.astype(np.uint8))


def phantom_seed(dataset_seed: int, index: int) -> int:
    """Per-volume seed, stable under dataset growth (index i never changes)."""
    ss = np.random.SeedSequence([int(dataset_seed) & (2**63 - 1), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] & (2**63 - 1))


def split_counts(n: int) -> tuple[int, int, int]:
    """Deterministic train/val/test counts targeting an 80/10/10 split.

    Validation and test each get at least one volume once n reaches 3.
    """
    if n < 1:
        raise ConfigurationError("dataset size must be at least 1")
    if n == 1:
        return 1, 0, 0
    if n == 2:
        return 1, 1, 0
    n_val = max(1, n // 10)
    n_test = max(1, n // 10)
    return n - n_val - n_test, n_val, n_test
