"""Residual U-Net over 3-channel slice stacks, plus encoder weight transfer.

One network per anatomical orientation. Input is a (N, C, H, W) batch of
normalized patches or slices with H and W divisible by 16 (four pooling
levels); output is a per-pixel foreground probability map.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch import nn

from .errors import ConfigurationError, ShapeError, TransferError

POOL_LEVELS = 4
_DIVISOR = 2**POOL_LEVELS

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetworkConfig:
    in_channels: int = 3
    base_width: int = 64
    residual: bool = True

    def __post_init__(self):
        if self.in_channels < 1:
            raise ConfigurationError(f"in_channels must be >= 1, got {self.in_channels}")
        if self.base_width < 1:
            raise ConfigurationError(f"base_width must be >= 1, got {self.base_width}")


class DoubleConvBlock(nn.Module):
    """Two 3x3 conv+BN+ReLU stages with an optional projected residual join.

    The shortcut is a bias-free 1x1 projection of the block input added after
    the second activation.
    """

    def __init__(self, in_ch: int, out_ch: int, residual: bool = True):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_ch)
        self.act = nn.ReLU(inplace=True)
        self.proj = nn.Conv2d(in_ch, out_ch, 1, bias=False) if residual else None

    def forward(self, x):
        y = self.act(self.bn1(self.conv1(x)))
        y = self.act(self.bn2(self.conv2(y)))
        if self.proj is not None:
            y = y + self.proj(x)
        return y


class E2DUNet(nn.Module):
    """U-Net with four pooling levels and channel width doubling per level."""

    def __init__(self, config: NetworkConfig = NetworkConfig()):
        super().__init__()
        self.config = config
        b = config.base_width
        r = config.residual
        widths = [b * 2**i for i in range(POOL_LEVELS + 1)]  # e.g. 64..1024

        self.encoders = nn.ModuleList()
        in_ch = config.in_channels
        for w in widths[:-1]:
            self.encoders.append(DoubleConvBlock(in_ch, w, residual=r))
            in_ch = w
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = DoubleConvBlock(widths[-2], widths[-1], residual=r)

        self.ups = nn.ModuleList()
        self.decoders = nn.ModuleList()
        for hi, lo in zip(widths[::-1][:-1], widths[::-1][1:]):
            self.ups.append(nn.ConvTranspose2d(hi, lo, 2, stride=2))
            self.decoders.append(DoubleConvBlock(lo * 2, lo, residual=r))
        self.head = nn.Conv2d(widths[0], 1, 1, bias=True)

    def forward(self, x):
        if x.ndim != 4:
            raise ShapeError(f"expected (N, C, H, W) input, got shape {tuple(x.shape)}")
        n, c, h, w = x.shape
        if c != self.config.in_channels:
            raise ShapeError(
                f"expected {self.config.in_channels} input channels, got {c}"
            )
        if h % _DIVISOR or w % _DIVISOR:
            raise ShapeError(
                f"spatial dims must be divisible by {_DIVISOR}, got {h}x{w}"
            )
        skips = []
        for enc in self.encoders:
            x = enc(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for up, dec, skip in zip(self.ups, self.decoders, reversed(skips)):
            x = up(x)
            x = dec(torch.cat([skip, x], dim=1))
        return torch.sigmoid(self.head(x))


def build_network(config: NetworkConfig = NetworkConfig(), seed: int = 0) -> E2DUNet:
    """Construct a network with initialization isolated to the given seed."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(int(seed) & (2**63 - 1))
        model = E2DUNet(config)
    return model


# ---------------------------------------------------------------------------
# encoder transfer bank


def encoder_bank_shapes() -> list[tuple[int, int, int, int]]:
    """Kernel shapes of the 8-conv feature bank the encoder can borrow from."""
    plan = [(64, 3), (128, 64), (256, 128), (256, 256), (512, 256), (512, 512), (512, 512), (512, 512)]
    return [(o, i, 3, 3) for o, i in plan]


def random_encoder_bank(seed: int = 0) -> list[torch.Tensor]:
    """Synthetic stand-in bank with the canonical shapes, for tests and demos."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(int(seed) & (2**63 - 1))
        return [torch.randn(s) * 0.05 for s in encoder_bank_shapes()]


def save_encoder_bank(kernels, path: str | Path) -> None:
    state = {f"features.{i}.weight": torch.as_tensor(k) for i, k in enumerate(kernels)}
    torch.save(state, str(path))


def load_encoder_bank(path: str | Path) -> list[torch.Tensor]:
    """Read a conv bank from a saved mapping or sequence of 4D tensors."""
    obj = torch.load(str(path), map_location="cpu", weights_only=True)
    if isinstance(obj, dict):
        kernels = [torch.as_tensor(v) for v in obj.values() if getattr(v, "ndim", 0) == 4]
    else:
        kernels = [torch.as_tensor(v) for v in obj]
    shapes = [tuple(k.shape) for k in kernels]
    if shapes != encoder_bank_shapes():
        raise TransferError(
            f"bank at {path} holds kernel shapes {shapes}, expected "
            f"{encoder_bank_shapes()}"
        )
    return kernels


def transfer_encoder_weights(model: E2DUNet, kernels) -> list[tuple[int, str]]:
    """Copy bank kernels onto encoder convs by greedy in-order shape matching.

    Walks bank and encoder convs front to back, copying each bank kernel onto
    the next conv with an identical shape. The first kernel must land on the
    first encoder conv; otherwise the head of the network cannot take the
    bank at all and a TransferError is raised.
    """
    targets = []
    for i, enc in enumerate(model.encoders):
        targets.append((f"encoders.{i}.conv1", enc.conv1))
        targets.append((f"encoders.{i}.conv2", enc.conv2))
    targets.append(("bottleneck.conv1", model.bottleneck.conv1))
    targets.append(("bottleneck.conv2", model.bottleneck.conv2))

    kernels = [torch.as_tensor(k) for k in kernels]
    first = tuple(kernels[0].shape)
    head = tuple(targets[0][1].weight.shape)
    if first != head:
        raise TransferError(
            f"first bank kernel {first} does not fit first encoder conv {head}"
        )

    copied = []
    ti = 0
    with torch.no_grad():
        for ki, kernel in enumerate(kernels):
            shape = tuple(kernel.shape)
            while ti < len(targets) and tuple(targets[ti][1].weight.shape) != shape:
                ti += 1
            if ti >= len(targets):
                break
            name, conv = targets[ti]
            conv.weight.copy_(kernel.to(conv.weight.dtype))
            copied.append((ki, name))
            ti += 1
    return copied


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(model: E2DUNet, path: str | Path, **meta) -> None:
    """Persist weights plus the config needed to rebuild the same network."""
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "network": asdict(model.config),
        "state_dict": model.state_dict(),
        "meta": dict(meta),
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, str(path))


def load_checkpoint(path: str | Path) -> tuple[E2DUNet, dict]:
    """Rebuild a network from a checkpoint; returns (model, meta)."""
    payload = torch.load(str(path), map_location="cpu", weights_only=True)
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ConfigurationError(
            f"checkpoint {path} has format_version {version!r}, expected "
            f"{CHECKPOINT_VERSION}"
        )
    config = NetworkConfig(**payload["network"])
    model = E2DUNet(config)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload.get("meta", {})
