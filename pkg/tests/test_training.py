import numpy as np
import pytest
import torch

from oracles import soft_dice_loss_scalar
from triseg.errors import ConfigurationError, DivergenceError
from triseg.network import load_checkpoint
from triseg.sampler import PatchSource
from triseg.training import (
    TrainConfig,
    dice_loss,
    epoch_steps,
    lr_at_epoch,
    train_network,
    validate_slices,
)

TINY = TrainConfig(
    epochs=2,
    batch_size=8,
    steps_per_epoch=2,
    patch_size=32,
    crop_size=32,
    base_width=4,
    lr=0.01,
)


def tiny_sources(tiny_pairs, orientation="axial"):
    pairs = [(v, m) for v, m in tiny_pairs]
    train = [PatchSource(v, m, orientation) for v, m in pairs[:2]]
    val = [PatchSource(v, m, orientation) for v, m in pairs[2:3]]
    return train, val


def test_dice_loss_hand_values():
    # identical masks -> 0; both empty -> 0; disjoint singletons -> 2/3
    ones = torch.zeros(1, 1, 4, 4)
    ones[0, 0, 1, 1] = 1.0
    assert float(dice_loss(ones, ones.clone())) == pytest.approx(0.0, abs=1e-6)
    empty = torch.zeros(1, 1, 4, 4)
    assert float(dice_loss(empty, empty.clone())) == pytest.approx(0.0, abs=1e-6)
    other = torch.zeros(1, 1, 4, 4)
    other[0, 0, 2, 2] = 1.0
    assert float(dice_loss(ones, other)) == pytest.approx(2.0 / 3.0, abs=1e-6)


def test_dice_loss_matches_scalar_oracle(rng):
    for _ in range(20):
        p = rng.random((1, 1, 8, 8))
        t = (rng.random((1, 1, 8, 8)) > 0.5).astype(np.float64)
        got = float(dice_loss(torch.from_numpy(p), torch.from_numpy(t)))
        assert got == pytest.approx(soft_dice_loss_scalar(p, t), abs=1e-9)


def test_dice_loss_batch_is_mean_of_samples(rng):
    p = torch.from_numpy(rng.random((4, 1, 8, 8)))
    t = torch.from_numpy((rng.random((4, 1, 8, 8)) > 0.5).astype(np.float64))
    whole = float(dice_loss(p, t))
    singles = [float(dice_loss(p[i : i + 1], t[i : i + 1])) for i in range(4)]
    assert whole == pytest.approx(np.mean(singles), abs=1e-12)


def test_dice_loss_gradient_matches_finite_differences(rng):
    for _ in range(5):
        p = torch.from_numpy(rng.uniform(0.05, 0.95, (1, 1, 4, 4)))
        p.requires_grad_(True)
        t = torch.from_numpy((rng.random((1, 1, 4, 4)) > 0.5).astype(np.float64))
        loss = dice_loss(p, t)
        loss.backward()
        analytic = p.grad.detach().numpy().ravel()
        eps = 1e-4
        flat = p.detach().numpy().ravel().copy()
        fd = np.zeros_like(flat)
        for i in range(flat.size):
            hi, lo = flat.copy(), flat.copy()
            hi[i] += eps
            lo[i] -= eps
            fd[i] = (
                soft_dice_loss_scalar(hi, t.numpy().ravel())
                - soft_dice_loss_scalar(lo, t.numpy().ravel())
            ) / (2 * eps)
        assert np.linalg.norm(fd - analytic) / np.linalg.norm(analytic) < 1e-4


def test_dice_loss_shape_check():
    with pytest.raises(ConfigurationError):
        dice_loss(torch.zeros(1, 1, 4, 4), torch.zeros(1, 1, 4, 5))


def test_lr_schedule_hand_values():
    # defaults: 1e-3 through epoch 199, 1e-4 from epoch 200 on
    assert lr_at_epoch(0, 1e-3, 200, 0.1) == 1e-3
    assert lr_at_epoch(199, 1e-3, 200, 0.1) == 1e-3
    assert lr_at_epoch(200, 1e-3, 200, 0.1) == pytest.approx(1e-4)
    assert lr_at_epoch(499, 1e-3, 200, 0.1) == pytest.approx(1e-4)
    assert lr_at_epoch(5, 0.05, 3, 0.5) == 0.025


def test_epoch_steps_hand_values():
    assert epoch_steps(100, 32, None) == 4  # ceil(100/32)
    assert epoch_steps(96, 32, None) == 3
    assert epoch_steps(1, 32, None) == 1
    assert epoch_steps(10_000, 32, 50) == 50  # cap binds
    assert epoch_steps(10, 32, 50) == 1


def test_train_config_validation():
    with pytest.raises(ConfigurationError):
        TrainConfig(epochs=0)
    with pytest.raises(ConfigurationError, match="divisible"):
        TrainConfig(patch_size=33)
    with pytest.raises(ConfigurationError, match="divisible"):
        TrainConfig(crop_size=100)
    cfg = TrainConfig(e2d=False)
    assert cfg.network().in_channels == 1
    assert TrainConfig().network().in_channels == 3


class ConstantModel(torch.nn.Module):
    def __init__(self, value):
        super().__init__()
        self.value = value

    def forward(self, x):
        return torch.full((x.shape[0], 1, x.shape[2], x.shape[3]), self.value)


def test_validate_slices_against_hand_computation(tiny_pairs):
    from triseg.geometry import center_crop, take_slice
    from triseg.metrics import dice_coefficient

    vol, mask = tiny_pairs[0]
    src = PatchSource(vol, mask, "axial")
    # a model that claims everything is foreground
    got = validate_slices(ConstantModel(0.9), [src], crop_size=32, e2d=True)
    want = np.mean(
        [
            dice_coefficient(
                np.ones((32, 32)), center_crop(take_slice(mask.data, "axial", k), 32)[0]
            )
            for k in range(32)
        ]
    )
    assert got == pytest.approx(want, abs=1e-12)


def test_validate_slices_empty_prediction_empty_truth(tiny_pairs):
    vol, _ = tiny_pairs[0]
    from triseg.volume_io import BinaryMask

    empty = BinaryMask(data=np.zeros(vol.dims, np.uint8))
    src = PatchSource(vol, empty, "axial")
    # prediction below threshold everywhere, truth empty: every slice matches
    got = validate_slices(ConstantModel(0.3), [src], crop_size=32, e2d=True)
    assert got == 1.0


def test_train_network_end_to_end_tiny(tmp_path, tiny_pairs):
    train, val = tiny_sources(tiny_pairs)
    ckpt = tmp_path / "axial.pt"
    result = train_network(train, val, "axial", config=TINY, seed=0, checkpoint_path=ckpt)
    assert len(result.history) == TINY.epochs
    assert all(np.isfinite(h.train_loss) for h in result.history)
    assert ckpt.exists()
    # best tracking agrees with the recorded history
    best = max(result.history, key=lambda h: h.val_dice)
    assert result.best_val_dice == best.val_dice
    assert result.history[result.best_epoch].val_dice == best.val_dice
    model, meta = load_checkpoint(ckpt)
    assert meta["epoch"] == result.best_epoch
    assert meta["val_dice"] == pytest.approx(result.best_val_dice)
    assert meta["orientation"] == "axial"
    assert meta["train_config"]["patch_size"] == 32


def test_best_checkpoint_keeps_first_of_ties(tmp_path, tiny_pairs, monkeypatch):
    scripted = iter([0.5, 0.8, 0.8, 0.7])
    monkeypatch.setattr(
        "triseg.training.validate_slices", lambda *a, **k: next(scripted)
    )
    train, val = tiny_sources(tiny_pairs)
    config = TrainConfig(
        epochs=4, batch_size=4, steps_per_epoch=1, patch_size=32, crop_size=32,
        base_width=4,
    )
    result = train_network(
        train, val, "axial", config=config, seed=0, checkpoint_path=tmp_path / "c.pt"
    )
    assert result.best_epoch == 1  # strictly-greater rule keeps the first 0.8
    assert result.best_val_dice == 0.8
    _, meta = load_checkpoint(tmp_path / "c.pt")
    assert meta["epoch"] == 1


def test_same_seed_reproduces_weights(tmp_path, tiny_pairs):
    train, val = tiny_sources(tiny_pairs)
    a = tmp_path / "a.pt"
    b = tmp_path / "b.pt"
    train_network(train, val, "axial", config=TINY, seed=3, checkpoint_path=a)
    train_network(train, val, "axial", config=TINY, seed=3, checkpoint_path=b)
    ma, _ = load_checkpoint(a)
    mb, _ = load_checkpoint(b)
    for pa, pb in zip(ma.state_dict().values(), mb.state_dict().values()):
        assert torch.equal(pa, pb)


def test_orientations_use_distinct_streams(tmp_path, tiny_pairs):
    vol, mask = tiny_pairs[0]
    a = train_network(
        [PatchSource(vol, mask, "axial")],
        [PatchSource(*tiny_pairs[1], "axial")],
        "axial",
        config=TINY,
        seed=0,
        checkpoint_path=tmp_path / "ax.pt",
    )
    c = train_network(
        [PatchSource(vol, mask, "coronal")],
        [PatchSource(*tiny_pairs[1], "coronal")],
        "coronal",
        config=TINY,
        seed=0,
        checkpoint_path=tmp_path / "co.pt",
    )
    ma, _ = load_checkpoint(tmp_path / "ax.pt")
    mc, _ = load_checkpoint(tmp_path / "co.pt")
    assert any(
        not torch.equal(pa, pc)
        for pa, pc in zip(ma.state_dict().values(), mc.state_dict().values())
    )


def test_divergence_detected(tmp_path, tiny_pairs, monkeypatch):
    monkeypatch.setattr(
        "triseg.training.dice_loss",
        lambda *a, **k: torch.tensor(float("nan"), requires_grad=True),
    )
    train, val = tiny_sources(tiny_pairs)
    with pytest.raises(DivergenceError, match="diverged"):
        train_network(train, val, "axial", config=TINY, seed=0)


def test_requires_validation_sources(tiny_pairs):
    train, _ = tiny_sources(tiny_pairs)
    with pytest.raises(ConfigurationError, match="validation"):
        train_network(train, [], "axial", config=TINY, seed=0)
