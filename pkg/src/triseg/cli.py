"""Command-line front end.

Subcommands: synth, train, predict, evaluate, sweep, ablate. Every knob can
also come from a `key = value` config file via --config; explicit flags win.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import ablation, consensus
from .config import load_config_file, parse_dims, parse_weights, resolve
from .errors import ConfigurationError, TrisegError
from .geometry import ALL_ORIENTATIONS, Orientation
from .manifest import ManifestEntry, by_split, load_manifest, write_manifest
from .metrics import EvalSummary, score_case
from .network import load_checkpoint, load_encoder_bank, random_encoder_bank
from .phantom import PhantomConfig, generate_phantom, phantom_seed, split_counts
from .sampler import PatchSource
from .training import TrainConfig, train_network
from .volume_io import load_mask, load_volume, minmax_normalize, save_mask, save_volume

_BOOL = argparse.BooleanOptionalAction


def _add_common(p):
    p.add_argument("--config", type=Path, help="key = value config file")
    p.add_argument("--seed", type=int, default=None)


def _add_train_knobs(p):
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--momentum", type=float, default=None)
    p.add_argument("--decay-epoch", type=int, default=None)
    p.add_argument("--decay-factor", type=float, default=None)
    p.add_argument("--patch-size", type=int, default=None)
    p.add_argument("--crop-size", type=int, default=None)
    p.add_argument("--steps-per-epoch", type=int, default=None)
    p.add_argument("--base-width", type=int, default=None)
    p.add_argument("--e2d", action=_BOOL, default=None)
    p.add_argument("--residual", action=_BOOL, default=None)
    p.add_argument("--augment", action=_BOOL, default=None)
    p.add_argument(
        "--encoder-bank",
        default=None,
        help="path to a conv bank checkpoint, or 'random' for a seeded stand-in",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="triseg",
        description="Tri-planar consensus segmentation of bilateral structures",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a phantom dataset with a manifest")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--dims", type=parse_dims, default=None)
    p.add_argument("--distractors", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("train", help="train orientation networks from a manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument(
        "--orientation",
        default="all",
        choices=[o.value for o in ALL_ORIENTATIONS] + ["all"],
    )
    _add_train_knobs(p)
    _add_common(p)

    p = sub.add_parser("predict", help="segment one volume with trained networks")
    p.add_argument("--volume", type=Path, required=True)
    p.add_argument("--models", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--fused-out", type=Path, default=None)
    p.add_argument("--heatmap-dir", type=Path, default=None)
    p.add_argument("--crop-size", type=int, default=None)
    p.add_argument("--ths", type=float, default=None)
    p.add_argument("--keep", type=int, default=None)
    p.add_argument("--weights", type=parse_weights, default=None)
    _add_common(p)

    p = sub.add_parser("evaluate", help="score predictions against a manifest split")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--models", type=Path, required=True)
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--report", type=Path, default=None)
    p.add_argument("--crop-size", type=int, default=None)
    p.add_argument("--ths", type=float, default=None)
    p.add_argument("--keep", type=int, default=None)
    p.add_argument("--weights", type=parse_weights, default=None)
    _add_common(p)

    p = sub.add_parser("sweep", help="score a range of fusion thresholds")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--models", type=Path, required=True)
    p.add_argument("--split", default="val", choices=["train", "val", "test"])
    p.add_argument(
        "--ths-list",
        type=parse_weights,
        default=None,
        help="comma-separated thresholds (default 0.1..0.9)",
    )
    p.add_argument("--report", type=Path, default=None)
    p.add_argument("--crop-size", type=int, default=None)
    p.add_argument("--keep", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("ablate", help="run the cumulative feature ladder")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--report", type=Path, default=None)
    _add_train_knobs(p)
    _add_common(p)

    return parser


def _file_config(args) -> dict:
    if getattr(args, "config", None):
        return load_config_file(args.config)
    return {}


def _train_config(args, cfg) -> TrainConfig:
    return TrainConfig(
        epochs=resolve(args.epochs, cfg, "epochs", 500),
        batch_size=resolve(args.batch_size, cfg, "batch_size", 200),
        lr=resolve(args.lr, cfg, "lr", 1e-3),
        momentum=resolve(args.momentum, cfg, "momentum", 0.9),
        decay_epoch=resolve(args.decay_epoch, cfg, "decay_epoch", 200),
        decay_factor=resolve(args.decay_factor, cfg, "decay_factor", 0.1),
        patch_size=resolve(args.patch_size, cfg, "patch_size", 64),
        crop_size=resolve(args.crop_size, cfg, "crop_size", 160),
        steps_per_epoch=resolve(args.steps_per_epoch, cfg, "steps_per_epoch", None),
        e2d=resolve(args.e2d, cfg, "e2d", True),
        residual=resolve(args.residual, cfg, "residual", True),
        augment=resolve(args.augment, cfg, "augment", True),
        base_width=resolve(args.base_width, cfg, "base_width", 64),
    )


def _load_pairs(entries):
    pairs = []
    for e in entries:
        vol = minmax_normalize(load_volume(e.volume))
        mask = load_mask(e.mask)
        pairs.append((vol, mask))
    return pairs


def _load_models(models_dir: Path):
    models, metas = {}, {}
    for o in ALL_ORIENTATIONS:
        path = models_dir / f"{o.value}.pt"
        if not path.exists():
            raise ConfigurationError(f"missing checkpoint {path}")
        model, meta = load_checkpoint(path)
        models[o.value] = model
        metas[o.value] = meta
    return models, metas


def _meta_crop(metas, flag_value, cfg):
    crop = resolve(flag_value, cfg, "crop_size", None)
    if crop is not None:
        return crop
    crops = {m.get("train_config", {}).get("crop_size", 160) for m in metas.values()}
    if len(crops) > 1:
        raise ConfigurationError(
            f"checkpoints trained with different crop sizes {sorted(crops)}; "
            "pass --crop-size"
        )
    return crops.pop()


def _meta_e2d(models) -> bool:
    chans = {m.config.in_channels for m in models.values()}
    if len(chans) > 1:
        raise ConfigurationError(
            f"checkpoints disagree on input channels {sorted(chans)}"
        )
    return chans.pop() == 3


def _bank(arg, seed):
    if arg is None:
        return None
    if arg == "random":
        return random_encoder_bank(seed)
    return load_encoder_bank(arg)


def _write_tsv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["\t".join(header)]
    lines += ["\t".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _cmd_synth(args) -> int:
    cfg = _file_config(args)
    n = resolve(args.n, cfg, "n", 12)
    dims = resolve(args.dims, cfg, "dims", (64, 64, 64))
    seed = resolve(args.seed, cfg, "seed", 0)
    distractors = resolve(args.distractors, cfg, "distractors", 3)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)

    n_train, n_val, n_test = split_counts(n)
    splits = ["train"] * n_train + ["val"] * n_val + ["test"] * n_test
    pconf = PhantomConfig(dims=dims, n_distractors=distractors)
    entries = []
    for i in range(n):
        vol, mask = generate_phantom(pconf, seed=phantom_seed(seed, i))
        vol_path = out / f"vol_{i:03d}.nii.gz"
        mask_path = out / f"mask_{i:03d}.nii.gz"
        save_volume(vol, vol_path)
        save_mask(mask, vol, mask_path)
        entries.append(ManifestEntry(volume=vol_path, mask=mask_path, split=splits[i]))
        print(f"{vol_path.name}\t{splits[i]}\tforeground={mask.foreground_count()}")
    manifest = write_manifest(out / "manifest.tsv", entries)
    print(
        f"wrote {n} phantoms ({n_train} train / {n_val} val / {n_test} test) "
        f"to {out}; manifest at {manifest}"
    )
    return 0


def _cmd_train(args) -> int:
    cfg = _file_config(args)
    config = _train_config(args, cfg)
    seed = resolve(args.seed, cfg, "seed", 0)
    splits = by_split(load_manifest(args.manifest))
    if not splits["train"]:
        raise ConfigurationError("manifest has no train entries")
    if not splits["val"]:
        raise ConfigurationError("manifest has no val entries")
    train_pairs = _load_pairs(splits["train"])
    val_pairs = _load_pairs(splits["val"])
    bank = _bank(args.encoder_bank, seed)

    orientations = (
        list(ALL_ORIENTATIONS)
        if args.orientation == "all"
        else [Orientation.parse(args.orientation)]
    )
    out: Path = args.out
    for orientation in orientations:
        result = train_network(
            [PatchSource(v, m, orientation) for v, m in train_pairs],
            [PatchSource(v, m, orientation) for v, m in val_pairs],
            orientation,
            config=config,
            seed=seed,
            checkpoint_path=out / f"{orientation.value}.pt",
            encoder_bank=bank,
            log=print,
        )
        _write_tsv(
            out / f"history_{orientation.value}.tsv",
            ["epoch", "lr", "train_loss", "val_dice"],
            [(r.epoch, r.lr, f"{r.train_loss:.6f}", f"{r.val_dice:.6f}") for r in result.history],
        )
        print(
            f"[{orientation.value}] best val_dice={result.best_val_dice:.4f} "
            f"at epoch {result.best_epoch} ({result.seconds:.1f}s) -> "
            f"{result.checkpoint_path}"
        )
    return 0


def _cmd_predict(args) -> int:
    cfg = _file_config(args)
    models, metas = _load_models(args.models)
    crop = _meta_crop(metas, args.crop_size, cfg)
    e2d = _meta_e2d(models)
    ths = resolve(args.ths, cfg, "ths", consensus.THRESHOLD)
    keep = resolve(args.keep, cfg, "keep", consensus.KEEP_COMPONENTS)
    weights = resolve(args.weights, cfg, "weights", None)

    vol = minmax_normalize(load_volume(args.volume))
    result = consensus.segment_volume(
        models, vol, crop_size=crop, e2d=e2d, weights=weights, ths=ths, keep=keep
    )
    save_mask(result.mask, vol, args.out)
    if args.fused_out:
        save_volume(
            type(vol)(data=result.fused, voxel_size=vol.voxel_size,
                      source_range=(0.0, 1.0)),
            args.fused_out,
        )
    if args.heatmap_dir:
        for name, heatmap in result.heatmaps.items():
            save_volume(
                type(vol)(data=heatmap, voxel_size=vol.voxel_size,
                          source_range=(0.0, 1.0)),
                Path(args.heatmap_dir) / f"heatmap_{name}.nii.gz",
            )
    print(
        f"wrote {args.out}: {result.mask.foreground_count()} foreground voxels, "
        f"ths={ths}, keep={keep}, crop={crop}"
    )
    return 0


def _segment_entries(entries, models, crop, e2d, weights, ths, keep):
    for e in entries:
        vol = minmax_normalize(load_volume(e.volume))
        truth = load_mask(e.mask)
        result = consensus.segment_volume(
            models, vol, crop_size=crop, e2d=e2d, weights=weights, ths=ths, keep=keep
        )
        yield e, result, truth


def _cmd_evaluate(args) -> int:
    cfg = _file_config(args)
    models, metas = _load_models(args.models)
    crop = _meta_crop(metas, args.crop_size, cfg)
    e2d = _meta_e2d(models)
    ths = resolve(args.ths, cfg, "ths", consensus.THRESHOLD)
    keep = resolve(args.keep, cfg, "keep", consensus.KEEP_COMPONENTS)
    weights = resolve(args.weights, cfg, "weights", None)
    entries = by_split(load_manifest(args.manifest))[args.split]
    if not entries:
        raise ConfigurationError(f"manifest has no {args.split!r} entries")

    cases = []
    for e, result, truth in _segment_entries(
        entries, models, crop, e2d, weights, ths, keep
    ):
        cases.append(score_case(Path(e.volume).name, result.mask.data, truth.data))
    summary = EvalSummary(cases=cases)
    for line in summary.lines():
        print(line)
    if args.report:
        _write_tsv(
            args.report,
            ["case", "dice", "precision", "recall"],
            [(c.name, f"{c.dice:.6f}", f"{c.precision:.6f}", f"{c.recall:.6f}") for c in cases],
        )
        print(f"report written to {args.report}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _file_config(args)
    models, metas = _load_models(args.models)
    crop = _meta_crop(metas, args.crop_size, cfg)
    e2d = _meta_e2d(models)
    keep = resolve(args.keep, cfg, "keep", consensus.KEEP_COMPONENTS)
    ths_list = args.ths_list or tuple(round(0.1 * i, 1) for i in range(1, 10))
    entries = by_split(load_manifest(args.manifest))[args.split]
    if not entries:
        raise ConfigurationError(f"manifest has no {args.split!r} entries")

    fused_cases = []
    for e in entries:
        vol = minmax_normalize(load_volume(e.volume))
        truth = load_mask(e.mask)
        heatmaps = [
            consensus.predict_heatmap(models[o.value], vol, o, crop_size=crop, e2d=e2d)
            for o in ALL_ORIENTATIONS
        ]
        fused_cases.append((consensus.fuse(heatmaps), truth))

    rows = []
    for ths in ths_list:
        dices = []
        for fused, truth in fused_cases:
            mask = consensus.postprocess(consensus.threshold_heatmap(fused, ths), keep)
            dices.append(score_case("x", mask, truth.data).dice)
        rows.append((ths, float(np.mean(dices))))
        print(f"ths={ths:.3f}\tmean_dice={rows[-1][1]:.4f}")
    best = max(rows, key=lambda r: r[1])
    print(f"best ths={best[0]:.3f} mean_dice={best[1]:.4f}")
    if args.report:
        _write_tsv(
            args.report,
            ["ths", "mean_dice"],
            [(f"{t:.3f}", f"{d:.6f}") for t, d in rows],
        )
        print(f"report written to {args.report}")
    return 0


def _cmd_ablate(args) -> int:
    cfg = _file_config(args)
    config = _train_config(args, cfg)
    seed = resolve(args.seed, cfg, "seed", 0)
    splits = by_split(load_manifest(args.manifest))
    for split in ("train", "val", "test"):
        if not splits[split]:
            raise ConfigurationError(f"manifest has no {split!r} entries")
    bank = _bank(args.encoder_bank, seed)
    records = ablation.run_ablation(
        _load_pairs(splits["train"]),
        _load_pairs(splits["val"]),
        _load_pairs(splits["test"]),
        config,
        args.out,
        seed=seed,
        encoder_bank=bank,
        log=None,
    )
    print(ablation.format_table(records))
    if args.report:
        _write_tsv(
            args.report,
            ["row", "augment", "residual", "e2d", "transfer", "mean_dice"],
            [
                (
                    r["row"],
                    int(r["augment"]),
                    int(r["residual"]),
                    int(r["e2d"]),
                    int(r["transfer"]),
                    f"{r['mean_dice']:.6f}",
                )
                for r in records
            ],
        )
        print(f"report written to {args.report}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "ablate": _cmd_ablate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except TrisegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
