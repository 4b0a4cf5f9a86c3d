"""Patch training loop: smoothed Dice loss, SGD with a single LR decay step,
and best-validation checkpointing.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from .errors import ConfigurationError, DivergenceError
from .geometry import Orientation, center_crop, e2d_channels, num_slices, take_slice
from .metrics import dice_coefficient
from .network import NetworkConfig, build_network, save_checkpoint, transfer_encoder_weights
from .sampler import TrainingSampler

DICE_SMOOTH = 1.0


def dice_loss(probs: torch.Tensor, targets: torch.Tensor, smooth: float = DICE_SMOOTH) -> torch.Tensor:
    """Smoothed soft Dice loss, averaged over the batch.

    Per sample: 1 - (2*sum(p*t) + smooth) / (sum(p) + sum(t) + smooth).
    The smooth term makes an all-empty sample score zero loss instead of 0/0.
    """
    if probs.shape != targets.shape:
        raise ConfigurationError(
            f"probs shape {tuple(probs.shape)} != targets shape {tuple(targets.shape)}"
        )
    p = probs.reshape(probs.shape[0], -1)
    t = targets.reshape(targets.shape[0], -1)
    inter = (p * t).sum(dim=1)
    denom = p.sum(dim=1) + t.sum(dim=1)
    per_sample = 1.0 - (2.0 * inter + smooth) / (denom + smooth)
    return per_sample.mean()


def lr_at_epoch(epoch: int, lr0: float, decay_epoch: int, decay_factor: float) -> float:
    """Step schedule: lr0 for epochs before decay_epoch, lr0*factor after.

    Epochs are 0-based, so decay_epoch=200 means epochs 0..199 run at lr0.
    """
    return lr0 if epoch < decay_epoch else lr0 * decay_factor


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    batch_size: int = 200
    lr: float = 1e-3
    momentum: float = 0.9
    decay_epoch: int = 200
    decay_factor: float = 0.1
    smooth: float = DICE_SMOOTH
    patch_size: int = 64
    crop_size: int = 160
    steps_per_epoch: int | None = None
    e2d: bool = True
    augment: bool = True
    residual: bool = True
    base_width: int = 64

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr <= 0:
            raise ConfigurationError(f"lr must be positive, got {self.lr}")
        if self.patch_size % 16 or self.crop_size % 16:
            raise ConfigurationError(
                "patch_size and crop_size must be divisible by 16, got "
                f"{self.patch_size} and {self.crop_size}"
            )

    def network(self) -> NetworkConfig:
        return NetworkConfig(
            in_channels=3 if self.e2d else 1,
            base_width=self.base_width,
            residual=self.residual,
        )


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    val_dice: float


@dataclass
class TrainResult:
    orientation: str
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_val_dice: float = -1.0
    checkpoint_path: str | None = None
    seconds: float = 0.0


def epoch_steps(total_border: int, batch_size: int, cap: int | None) -> int:
    """Steps per epoch: enough batches to cover every border pixel once."""
    steps = max(1, math.ceil(total_border / batch_size))
    if cap is not None:
        steps = min(steps, max(1, cap))
    return steps


def configure_determinism() -> None:
    """Single-threaded torch so repeated runs reduce in the same order."""
    torch.set_num_threads(1)


def validate_slices(model, sources, crop_size: int, e2d: bool, chunk: int = 16) -> float:
    """Mean per-slice Dice at threshold 0.5 over all slices of all sources.

    Slices are center-cropped to the evaluation window; an empty-empty slice
    counts as 1.0.
    """
    model.eval()
    scores: list[float] = []
    with torch.no_grad():
        for src in sources:
            n = num_slices(src.mask.dims, src.orientation)
            batch_x, batch_t = [], []

            def flush():
                if not batch_x:
                    return
                x = torch.from_numpy(np.stack(batch_x))
                probs = model(x).numpy()
                for prob, tgt in zip(probs, batch_t):
                    scores.append(dice_coefficient(prob[0] > 0.5, tgt))
                batch_x.clear()
                batch_t.clear()

            for k in range(n):
                if e2d:
                    chans = e2d_channels(src.volume.data, src.orientation, k)
                else:
                    chans = take_slice(src.volume.data, src.orientation, k)[None]
                cropped = np.stack(
                    [center_crop(c, crop_size)[0] for c in chans]
                ).astype(np.float32)
                tgt, _ = center_crop(take_slice(src.mask.data, src.orientation, k), crop_size)
                batch_x.append(cropped)
                batch_t.append(tgt)
                if len(batch_x) >= chunk:
                    flush()
            flush()
    return float(np.mean(scores)) if scores else float("nan")


def train_network(
    train_sources,
    val_sources,
    orientation,
    config: TrainConfig = TrainConfig(),
    seed: int = 0,
    checkpoint_path=None,
    encoder_bank=None,
    log=None,
) -> TrainResult:
    """Train one orientation's network and keep the best-validation weights.

    Seeding is derived from (seed, orientation axis), so the three
    orientation networks of one run never share a random stream. When
    ``encoder_bank`` is given its kernels are copied onto the encoder before
    training starts.
    """
    orientation = Orientation.parse(orientation)
    if not val_sources:
        raise ConfigurationError("training requires at least one validation source")
    configure_determinism()

    ss = np.random.SeedSequence([int(seed) & (2**63 - 1), orientation.axis])
    net_seed, samp_seed = (int(s) for s in ss.generate_state(2, dtype=np.uint64))
    rng = np.random.Generator(np.random.PCG64(samp_seed))

    model = build_network(config.network(), seed=net_seed)
    if encoder_bank is not None:
        transfer_encoder_weights(model, encoder_bank)

    sampler = TrainingSampler(
        train_sources,
        patch_size=config.patch_size,
        e2d=config.e2d,
        augment=config.augment,
    )
    steps = epoch_steps(sampler.total_border, config.batch_size, config.steps_per_epoch)
    opt = torch.optim.SGD(model.parameters(), lr=config.lr, momentum=config.momentum)

    result = TrainResult(orientation=orientation.value)
    started = time.monotonic()
    for epoch in range(config.epochs):
        lr = lr_at_epoch(epoch, config.lr, config.decay_epoch, config.decay_factor)
        for group in opt.param_groups:
            group["lr"] = lr
        model.train()
        losses = []
        for _ in range(steps):
            x_np, y_np = sampler.sample_batch(rng, config.batch_size)
            x = torch.from_numpy(x_np)
            y = torch.from_numpy(y_np)
            opt.zero_grad()
            loss = dice_loss(model(x), y, config.smooth)
            if not torch.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}; training diverged"
                )
            loss.backward()
            opt.step()
            losses.append(float(loss.detach()))

        val = validate_slices(model, val_sources, config.crop_size, config.e2d)
        record = EpochRecord(
            epoch=epoch, lr=lr, train_loss=float(np.mean(losses)), val_dice=val
        )
        result.history.append(record)
        if log:
            log(
                f"[{orientation.value}] epoch {epoch} lr={lr:g} "
                f"loss={record.train_loss:.4f} val_dice={val:.4f}"
            )
        if val > result.best_val_dice:
            result.best_val_dice = val
            result.best_epoch = epoch
            if checkpoint_path is not None:
                save_checkpoint(
                    model,
                    checkpoint_path,
                    orientation=orientation.value,
                    epoch=epoch,
                    val_dice=val,
                    seed=int(seed),
                    train_config=asdict(config),
                )
                result.checkpoint_path = str(checkpoint_path)
    result.seconds = time.monotonic() - started
    return result
