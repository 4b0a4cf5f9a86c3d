"""
Training one orientation at desk scale
======================================

A miniature but complete training run: four tiny phantoms, a narrow
network, a few epochs. The loop keeps whichever epoch scored best on the
validation volume, so the checkpoint on disk can be better than the final
epoch. Identical seeds reproduce the run bit for bit.
"""

import tempfile
from pathlib import Path

from triseg import (
    PhantomConfig,
    TrainConfig,
    generate_phantom,
    load_checkpoint,
    phantom_seed,
    train_network,
)
from triseg.sampler import build_sources

pairs = [
    generate_phantom(PhantomConfig(dims=(32, 32, 32)), seed=phantom_seed(0, i))
    for i in range(4)
]
train_pairs, val_pairs = pairs[:3], pairs[3:]

config = TrainConfig(
    epochs=8,
    batch_size=16,
    steps_per_epoch=16,
    patch_size=32,
    crop_size=32,
    base_width=4,
    lr=0.05,
    decay_epoch=6,
)

out = Path(tempfile.mkdtemp()) / "axial.pt"
result = train_network(
    build_sources(train_pairs, "axial"),
    build_sources(val_pairs, "axial"),
    "axial",
    config=config,
    seed=0,
    checkpoint_path=out,
    log=print,
)

print()
print(f"{'epoch':>5} {'loss':>8} {'val_dice':>9} {'lr':>7}")
for rec in result.history:
    print(f"{rec.epoch:>5} {rec.train_loss:>8.4f} {rec.val_dice:>9.4f} {rec.lr:>7.4f}")
print(f"best epoch {result.best_epoch} with val_dice {result.best_val_dice:.4f}")

model, meta = load_checkpoint(out)
print(f"checkpoint holds epoch {meta['epoch']}, val_dice {meta['val_dice']:.4f}")
