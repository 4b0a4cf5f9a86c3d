"""Reader is checked against files built byte-by-byte with struct, never
against the package's own writer; the writer is then checked against both
the reader and direct header byte inspection.
"""

import gzip
import struct

import numpy as np
import pytest

from triseg.errors import (
    DimensionalityError,
    NiftiFormatError,
    ShapeError,
    UnsupportedDtypeError,
)
from triseg.volume_io import (
    BinaryMask,
    ScalarVolume,
    load_mask,
    load_volume,
    minmax_normalize,
    save_mask,
    save_volume,
)


def build_header(
    order="<",
    dims=(3, 4, 5),
    datatype=16,
    bitpix=32,
    pixdim=(1.5, 2.0, 2.5),
    vox_offset=352.0,
    scl_slope=1.0,
    scl_inter=0.0,
    magic=b"n+1\x00",
    ndim=None,
    extra_dims=(),
):
    hdr = bytearray(348)
    struct.pack_into(order + "i", hdr, 0, 348)
    all_dims = list(dims) + list(extra_dims)
    ndim = len(all_dims) if ndim is None else ndim
    dim_field = [ndim] + all_dims + [1] * (7 - len(all_dims))
    struct.pack_into(order + "8h", hdr, 40, *dim_field[:8])
    struct.pack_into(order + "h", hdr, 70, datatype)
    struct.pack_into(order + "h", hdr, 72, bitpix)
    struct.pack_into(order + "8f", hdr, 76, 1.0, *pixdim, 0, 0, 0, 0)
    struct.pack_into(order + "f", hdr, 108, vox_offset)
    struct.pack_into(order + "f", hdr, 112, scl_slope)
    struct.pack_into(order + "f", hdr, 116, scl_inter)
    hdr[344:348] = magic
    return bytes(hdr)


def build_file(path, data, order="<", **kwargs):
    """Single-file layout written independently of the package writer."""
    np_order = order if order == ">" else "<"
    payload = (
        build_header(order=order, dims=data.shape, **kwargs)
        + b"\x00" * 4
        + data.astype(data.dtype.newbyteorder(np_order)).tobytes(order="F")
    )
    path.write_bytes(payload)
    return path


def test_reads_float32_values_exactly(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.random((3, 4, 5)).astype(np.float32)
    path = build_file(tmp_path / "a.nii", data)
    vol = load_volume(path)
    assert vol.dims == (3, 4, 5)
    assert np.array_equal(vol.data, data)
    assert vol.voxel_size == (1.5, 2.0, 2.5)


def test_fortran_order_layout(tmp_path):
    # first data element on disk must land at index (0,0,0), second at (1,0,0)
    data = np.arange(24, dtype=np.float32).reshape((2, 3, 4), order="F")
    path = build_file(tmp_path / "f.nii", data)
    vol = load_volume(path)
    assert vol.data[0, 0, 0] == 0.0
    assert vol.data[1, 0, 0] == 1.0
    assert vol.data[0, 1, 0] == 2.0


def test_int16_scaling_applied(tmp_path):
    data = np.array([[[100, 200]]], dtype=np.int16)
    path = build_file(
        tmp_path / "s.nii", data, datatype=4, bitpix=16, scl_slope=2.0, scl_inter=10.0
    )
    vol = load_volume(path)
    # hand arithmetic: 100*2+10=210, 200*2+10=410
    assert vol.data.dtype == np.float32
    assert vol.data[0, 0, 0] == 210.0
    assert vol.data[0, 0, 1] == 410.0


def test_zero_slope_means_unscaled(tmp_path):
    data = np.array([[[7, 9]]], dtype=np.int16)
    path = build_file(tmp_path / "z.nii", data, datatype=4, bitpix=16, scl_slope=0.0)
    assert np.array_equal(load_volume(path).data, [[[7.0, 9.0]]])


def test_big_endian_file(tmp_path):
    data = np.array([[[1, 2], [3, 4]]], dtype=np.int16)
    path = build_file(tmp_path / "be.nii", data, order=">", datatype=4, bitpix=16)
    vol = load_volume(path)
    assert np.array_equal(vol.data, data.astype(np.float32))


def test_gzipped_single_file(tmp_path):
    data = np.random.default_rng(1).random((4, 4, 4)).astype(np.float32)
    raw = build_header(dims=data.shape) + b"\x00" * 4 + data.tobytes(order="F")
    path = tmp_path / "g.nii.gz"
    path.write_bytes(gzip.compress(raw))
    assert np.array_equal(load_volume(path).data, data)


def test_two_file_pair_layout(tmp_path):
    data = np.random.default_rng(2).random((3, 3, 3)).astype(np.float32)
    hdr = build_header(dims=data.shape, magic=b"ni1\x00", vox_offset=0.0)
    (tmp_path / "p.hdr").write_bytes(hdr)
    (tmp_path / "p.img").write_bytes(data.tobytes(order="F"))
    assert np.array_equal(load_volume(tmp_path / "p.hdr").data, data)


def test_pair_without_img_names_magic(tmp_path):
    (tmp_path / "q.hdr").write_bytes(build_header(magic=b"ni1\x00"))
    with pytest.raises(NiftiFormatError, match="ni1"):
        load_volume(tmp_path / "q.hdr")


def test_trailing_unit_dims_accepted(tmp_path):
    data = np.ones((2, 3, 4), dtype=np.float32)
    path = build_file(tmp_path / "u.nii", data, extra_dims=(1,))
    assert load_volume(path).dims == (2, 3, 4)


def test_fourth_axis_rejected(tmp_path):
    data = np.ones((2, 3, 4, 2), dtype=np.float32)
    payload = (
        build_header(dims=(2, 3, 4), extra_dims=(2,)) + b"\x00" * 4 + data.tobytes(order="F")
    )
    path = tmp_path / "4d.nii"
    path.write_bytes(payload)
    with pytest.raises(DimensionalityError, match="trailing axes"):
        load_volume(path)


def test_2d_rejected(tmp_path):
    hdr = build_header(dims=(4, 4), ndim=2)
    path = tmp_path / "2d.nii"
    path.write_bytes(hdr + b"\x00" * 4 + np.ones((4, 4), np.float32).tobytes())
    with pytest.raises(DimensionalityError, match="3D"):
        load_volume(path)


def test_bad_sizeof_hdr_named(tmp_path):
    raw = bytearray(build_header())
    struct.pack_into("<i", raw, 0, 600)
    path = tmp_path / "bad.nii"
    path.write_bytes(bytes(raw))
    with pytest.raises(NiftiFormatError, match="sizeof_hdr"):
        load_volume(path)


def test_bad_magic_named(tmp_path):
    path = tmp_path / "m.nii"
    path.write_bytes(build_header(magic=b"xxx\x00") + b"\x00" * 4)
    with pytest.raises(NiftiFormatError, match="magic"):
        load_volume(path)


def test_truncated_header(tmp_path):
    path = tmp_path / "t.nii"
    path.write_bytes(b"\x00" * 100)
    with pytest.raises(NiftiFormatError, match="sizeof_hdr"):
        load_volume(path)


def test_truncated_data_counts_bytes(tmp_path):
    data = np.ones((4, 4, 4), dtype=np.float32)
    full = build_header(dims=data.shape) + b"\x00" * 4 + data.tobytes(order="F")
    path = tmp_path / "short.nii"
    path.write_bytes(full[:-40])
    with pytest.raises(NiftiFormatError, match="bytes"):
        load_volume(path)


def test_unsupported_datatype_code(tmp_path):
    data = np.ones((2, 2, 2), dtype=np.int32)
    path = build_file(tmp_path / "i32.nii", data, datatype=8, bitpix=32)
    with pytest.raises(UnsupportedDtypeError, match="8"):
        load_volume(path)


def test_mask_rejects_nonbinary(tmp_path):
    data = np.array([[[0, 1, 2]]], dtype=np.uint8)
    path = build_file(tmp_path / "nb.nii", data, datatype=2, bitpix=8)
    with pytest.raises(ValueError, match="binary"):
        load_mask(path)


def test_mask_loads_uint8(tmp_path):
    data = np.array([[[0, 1], [1, 0]]], dtype=np.uint8)
    path = build_file(tmp_path / "m8.nii", data, datatype=2, bitpix=8)
    mask = load_mask(path)
    assert mask.data.dtype == np.uint8
    assert mask.foreground_count() == 2


# ---------------------------------------------------------------------------
# writer


def test_writer_header_fields_by_byte_inspection(tmp_path):
    vol = ScalarVolume(
        data=np.zeros((5, 6, 7), np.float32), voxel_size=(1.0, 2.0, 3.0)
    )
    path = tmp_path / "w.nii"
    save_volume(vol, path)
    raw = path.read_bytes()
    assert struct.unpack_from("<i", raw, 0)[0] == 348
    assert struct.unpack_from("<8h", raw, 40)[:4] == (3, 5, 6, 7)
    assert struct.unpack_from("<h", raw, 70)[0] == 16  # float32 code
    assert struct.unpack_from("<h", raw, 72)[0] == 32
    assert struct.unpack_from("<8f", raw, 76)[1:4] == (1.0, 2.0, 3.0)
    assert struct.unpack_from("<f", raw, 108)[0] == 352.0
    assert raw[344:348] == b"n+1\x00"
    assert len(raw) == 352 + 5 * 6 * 7 * 4


def test_roundtrip_volume_exact(tmp_path):
    rng = np.random.default_rng(3)
    vol = ScalarVolume(data=rng.random((6, 5, 4)).astype(np.float32),
                       voxel_size=(1.0, 1.0, 1.0))
    for name in ("r.nii", "r.nii.gz"):
        save_volume(vol, tmp_path / name)
        back = load_volume(tmp_path / name)
        assert np.array_equal(back.data, vol.data)


def test_roundtrip_mask_exact(tmp_path):
    rng = np.random.default_rng(4)
    data = (rng.random((5, 5, 5)) > 0.5).astype(np.uint8)
    vol = ScalarVolume(data=np.zeros((5, 5, 5), np.float32))
    save_mask(BinaryMask(data=data), vol, tmp_path / "m.nii.gz")
    assert np.array_equal(load_mask(tmp_path / "m.nii.gz").data, data)


def test_gzip_bytes_deterministic(tmp_path):
    vol = ScalarVolume(data=np.full((4, 4, 4), 0.5, np.float32))
    save_volume(vol, tmp_path / "a.nii.gz")
    save_volume(vol, tmp_path / "b.nii.gz")
    assert (tmp_path / "a.nii.gz").read_bytes() == (tmp_path / "b.nii.gz").read_bytes()


def test_save_mask_shape_mismatch(tmp_path):
    vol = ScalarVolume(data=np.zeros((4, 4, 4), np.float32))
    mask = BinaryMask(data=np.zeros((4, 4, 5), np.uint8))
    with pytest.raises(ShapeError, match="dims"):
        save_mask(mask, vol, tmp_path / "x.nii")


# ---------------------------------------------------------------------------
# normalization


def test_normalize_hand_values():
    vol = ScalarVolume(data=np.array([[[2.0, 4.0, 6.0]]], dtype=np.float32))
    out = minmax_normalize(vol)
    # (v-2)/4: 2->0, 4->0.5, 6->1
    assert np.array_equal(out.data, [[[0.0, 0.5, 1.0]]])
    assert out.source_range == (2.0, 6.0)


def test_normalize_bounds_and_extremes(rng):
    data = (rng.random((8, 8, 8)) * 1000 - 200).astype(np.float32)
    out = minmax_normalize(ScalarVolume(data=data))
    assert out.data.min() == 0.0
    assert out.data.max() == 1.0
    assert ((out.data >= 0) & (out.data <= 1)).all()


def test_normalize_constant_volume():
    out = minmax_normalize(ScalarVolume(data=np.full((3, 3, 3), 7.0, np.float32)))
    assert np.array_equal(out.data, np.zeros((3, 3, 3), np.float32))
    assert out.source_range == (7.0, 7.0)


def test_normalize_idempotent_on_data(rng):
    data = rng.random((6, 6, 6)).astype(np.float32)
    once = minmax_normalize(ScalarVolume(data=data))
    twice = minmax_normalize(once)
    assert np.array_equal(once.data, twice.data)


def test_scalar_volume_requires_3d():
    with pytest.raises(DimensionalityError):
        ScalarVolume(data=np.zeros((4, 4), np.float32))


def test_binary_mask_requires_binary_values():
    with pytest.raises(ValueError, match="binary"):
        BinaryMask(data=np.full((2, 2, 2), 3, np.uint8))
