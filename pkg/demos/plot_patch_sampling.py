"""
Border-centered patches and what augmentation does to them
==========================================================

Training patches are centered on border pixels of the target, where the
segmentation is actually decided. Each patch carries three channels, the
slice below, the slice itself, and the slice above, so the network sees a
sliver of 3D context while staying a 2D model.
"""

import numpy as np

from triseg import PhantomConfig, generate_phantom
from triseg.sampler import PatchSource, TrainingSampler, border_pixels_2d

vol, mask = generate_phantom(PhantomConfig(dims=(64, 64, 64)), seed=7)
source = PatchSource(vol, mask, "axial")

plain = TrainingSampler([source], patch_size=32, augment=False)
rng = np.random.default_rng(0)
x, y = plain.sample_batch(rng, 16)
print(f"batch shapes: channels {x.shape}, targets {y.shape}")

# without augmentation every patch center sits on the border of the target
c = 32 // 2
centered = sum(
    1
    for n in range(16)
    if (c, c) in {tuple(p) for p in border_pixels_2d(y[n, 0])}
)
print(f"{centered}/16 patch centers lie on the target border")

# with augmentation, brightness always jitters and flips/noise hit 20% each
aug = TrainingSampler([source], patch_size=32)
xa, ya = aug.sample_batch(np.random.default_rng(0), 16)
print(f"augmented intensity range: [{xa.min():.3f}, {xa.max():.3f}]")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not installed, skipping the figure")
else:
    fig, axes = plt.subplots(3, 8, figsize=(12, 5))
    for n in range(8):
        axes[0, n].imshow(x[n, 1], cmap="gray", vmin=0, vmax=1)
        axes[1, n].imshow(y[n, 0], cmap="gray")
        axes[2, n].imshow(xa[n, 1], cmap="gray", vmin=0, vmax=1)
        for row in range(3):
            axes[row, n].axis("off")
    axes[0, 0].set_ylabel("center channel")
    axes[1, 0].set_ylabel("target")
    axes[2, 0].set_ylabel("augmented")
    fig.suptitle("border-centered patches (top), targets (middle), augmented (bottom)")
    fig.tight_layout()
    fig.savefig("patch_sampling.png", dpi=110)
    print("wrote patch_sampling.png")
