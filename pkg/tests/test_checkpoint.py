"""Named-array checkpoint codec: exact round-trips and corruption handling."""

import numpy as np
import pytest

from morphlens.checkpoint import MAGIC, decode_params, encode_params, load_params, save_params
from morphlens.errors import FormatError


def sample_params():
    rng = np.random.default_rng(8)
    return [
        ("conv0.kernels", rng.normal(size=(4, 3, 3, 3))),
        ("conv0.bias", rng.normal(size=4)),
        ("head.weights", np.array([[np.pi, -1e-300], [2.5e300, 0.1]])),
        ("head.bias", np.zeros(2)),
    ]


def test_round_trip_preserves_names_shapes_values():
    params = sample_params()
    out = decode_params(encode_params(params))
    assert [name for name, _ in out] == [name for name, _ in params]
    for (_, got), (_, want) in zip(out, params):
        assert got.shape == want.shape
        assert got.dtype == np.float64
        assert np.array_equal(got, want)


def test_encoding_is_byte_deterministic():
    params = sample_params()
    assert encode_params(params) == encode_params(params)


def test_layout_starts_with_magic_and_header_line():
    data = encode_params([("w", np.array([1.0, 2.0]))])
    assert data.startswith(MAGIC)
    assert data[len(MAGIC) :].startswith(b"w 2\n")
    assert data[len(MAGIC) + 4 :] == np.array([1.0, 2.0], dtype="<f8").tobytes()


def test_scalar_arrays_become_one_element_vectors():
    out = decode_params(encode_params([("lr", np.float64(0.05))]))
    assert out[0][1].shape == (1,)
    assert out[0][1][0] == 0.05


def test_empty_parameter_list_round_trips():
    assert decode_params(encode_params([])) == []


def test_encode_rejects_bad_names():
    with pytest.raises(FormatError):
        encode_params([("", np.zeros(1))])
    with pytest.raises(FormatError):
        encode_params([("conv 0", np.zeros(1))])


def test_decode_rejects_bad_magic():
    with pytest.raises(FormatError):
        decode_params(b"NOPE1\n" + b"w 1\n" + b"\x00" * 8)


def test_decode_rejects_corrupt_headers():
    with pytest.raises(FormatError):
        decode_params(MAGIC + b"w 1")  # header never terminated
    with pytest.raises(FormatError):
        decode_params(MAGIC + b"w\n" + b"\x00" * 8)
    with pytest.raises(FormatError):
        decode_params(MAGIC + b"w one\n" + b"\x00" * 8)
    with pytest.raises(FormatError):
        decode_params(MAGIC + b"w 0\n")
    with pytest.raises(FormatError):
        decode_params(MAGIC + b"w -2\n" + b"\x00" * 16)


def test_decode_rejects_truncated_payload():
    good = encode_params([("w", np.arange(3.0))])
    with pytest.raises(FormatError) as info:
        decode_params(good[:-1])
    assert "w" in str(info.value)


def test_file_round_trip(tmp_path):
    params = sample_params()
    path = tmp_path / "model.ckpt"
    save_params(path, params)
    out = load_params(path)
    assert all(np.array_equal(a[1], b[1]) for a, b in zip(out, params))


def test_load_missing_file(tmp_path):
    with pytest.raises(FormatError):
        load_params(tmp_path / "absent.ckpt")
