"""Cumulative feature ladder: each row enables one more ingredient.

Rows without the 3-channel slice stack train on 32x32 single-channel
patches; rows with it use 64x64 stacks. The transfer row pins the encoder
width to the bank's 64-channel head, whatever width the other rows use.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

from .consensus import segment_volume
from .errors import ConfigurationError
from .geometry import ALL_ORIENTATIONS
from .metrics import dice_coefficient
from .network import load_checkpoint, random_encoder_bank
from .sampler import PatchSource
from .training import TrainConfig, train_network

BANK_BASE_WIDTH = 64


@dataclass(frozen=True)
class AblationRow:
    name: str
    augment: bool
    residual: bool
    e2d: bool
    transfer: bool

    @property
    def patch_size(self) -> int:
        return 64 if self.e2d else 32

    def flags(self) -> str:
        marks = [
            "aug" if self.augment else "-",
            "res" if self.residual else "-",
            "e2d" if self.e2d else "-",
            "bank" if self.transfer else "-",
        ]
        return " ".join(f"{m:>4}" for m in marks)


def ablation_rows() -> tuple[AblationRow, ...]:
    return (
        AblationRow("plain", augment=False, residual=False, e2d=False, transfer=False),
        AblationRow("+aug", augment=True, residual=False, e2d=False, transfer=False),
        AblationRow("+residual", augment=True, residual=True, e2d=False, transfer=False),
        AblationRow("+e2d", augment=True, residual=True, e2d=True, transfer=False),
        AblationRow("+transfer", augment=True, residual=True, e2d=True, transfer=True),
    )


def row_config(row: AblationRow, base: TrainConfig) -> TrainConfig:
    return replace(
        base,
        augment=row.augment,
        residual=row.residual,
        e2d=row.e2d,
        patch_size=row.patch_size,
        base_width=BANK_BASE_WIDTH if row.transfer else base.base_width,
    )


def run_ablation(
    train_pairs,
    val_pairs,
    test_pairs,
    base: TrainConfig,
    out_dir: str | Path,
    seed: int = 0,
    encoder_bank=None,
    log=None,
) -> list[dict]:
    """Train and score every row; returns one record per row.

    ``*_pairs`` are (normalized volume, mask) tuples. Checkpoints land in
    out_dir/<row>/<orientation>.pt. When the transfer row runs without a
    provided bank, a seeded synthetic bank stands in.
    """
    if not test_pairs:
        raise ConfigurationError("ablation needs a non-empty test split")
    out_dir = Path(out_dir)
    records = []
    for row in ablation_rows():
        config = row_config(row, base)
        bank = None
        if row.transfer:
            bank = encoder_bank if encoder_bank is not None else random_encoder_bank(seed)
        row_dir = out_dir / row.name.replace("+", "plus_")
        models = {}
        for orientation in ALL_ORIENTATIONS:
            ckpt = row_dir / f"{orientation.value}.pt"
            train_network(
                [PatchSource(v, m, orientation) for v, m in train_pairs],
                [PatchSource(v, m, orientation) for v, m in val_pairs],
                orientation,
                config=config,
                seed=seed,
                checkpoint_path=ckpt,
                encoder_bank=bank,
                log=log,
            )
            models[orientation.value] = load_checkpoint(ckpt)[0]
        dices = []
        for vol, mask in test_pairs:
            result = segment_volume(
                models, vol, crop_size=config.crop_size, e2d=config.e2d
            )
            dices.append(dice_coefficient(result.mask.data, mask.data))
        mean_dice = sum(dices) / len(dices)
        records.append(
            {
                "row": row.name,
                "augment": row.augment,
                "residual": row.residual,
                "e2d": row.e2d,
                "transfer": row.transfer,
                "mean_dice": mean_dice,
            }
        )
        if log:
            log(f"[ablate] {row.name:<10} {row.flags()}  mean_dice={mean_dice:.4f}")
    return records


def format_table(records) -> str:
    lines = [f"{'row':<11} {'aug':>4} {'res':>4} {'e2d':>4} {'bank':>4}  mean_dice"]
    for r in records:
        marks = [
            "yes" if r[key] else "-"
            for key in ("augment", "residual", "e2d", "transfer")
        ]
        lines.append(
            f"{r['row']:<11} {marks[0]:>4} {marks[1]:>4} {marks[2]:>4} {marks[3]:>4}  "
            f"{r['mean_dice']:.4f}"
        )
    return "\n".join(lines)
