"""Model file format: byte determinism and corruption handling."""
import numpy as np
import pytest

from statecoder.errors import FormatError, UsageError
from statecoder.neuralcore import (
    ModelConfig,
    init_params,
    load_model,
    reconstruct,
    save_model,
)


def small_model(seed=0):
    cfg = ModelConfig(P=4, K=2, T=6, H=5, n_layers=2, dropout_rate=0.3, seed=seed)
    params = init_params(cfg, np.random.default_rng(seed))
    return params, cfg, [1, 3]


def test_round_trip_is_bit_exact(tmp_path):
    params, cfg, channels = small_model()
    path = tmp_path / "model.bin"
    save_model(params, cfg, channels, path)
    loaded, cfg2, channels2 = load_model(path)
    assert cfg2 == cfg
    assert channels2 == channels
    for (name, a), b in zip(
        params.tensors().items(), loaded.tensors().values()
    ):
        assert np.array_equal(a, b), name

    window = np.random.default_rng(1).normal(size=(cfg.T, cfg.P))
    assert np.array_equal(
        reconstruct(params, window), reconstruct(loaded, window)
    )


def test_two_saves_are_byte_identical(tmp_path):
    params, cfg, channels = small_model()
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    save_model(params, cfg, channels, a)
    save_model(params, cfg, channels, b)
    assert a.read_bytes() == b.read_bytes()


def test_truncated_file_is_rejected(tmp_path):
    params, cfg, channels = small_model()
    path = tmp_path / "model.bin"
    save_model(params, cfg, channels, path)
    blob = path.read_bytes()
    for cut in (4, 12, len(blob) // 2, len(blob) - 1):
        (tmp_path / "cut.bin").write_bytes(blob[:cut])
        with pytest.raises(FormatError):
            load_model(tmp_path / "cut.bin")


def test_wrong_magic_is_rejected(tmp_path):
    params, cfg, channels = small_model()
    path = tmp_path / "model.bin"
    save_model(params, cfg, channels, path)
    blob = bytearray(path.read_bytes())
    blob[0] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError):
        load_model(path)


def test_unsupported_version_is_rejected(tmp_path):
    params, cfg, channels = small_model()
    path = tmp_path / "model.bin"
    save_model(params, cfg, channels, path)
    blob = bytearray(path.read_bytes())
    blob[8:12] = (999).to_bytes(4, "little")
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError, match="version"):
        load_model(path)


def test_trailing_garbage_is_rejected(tmp_path):
    params, cfg, channels = small_model()
    path = tmp_path / "model.bin"
    save_model(params, cfg, channels, path)
    path.write_bytes(path.read_bytes() + b"\x00" * 8)
    with pytest.raises(FormatError):
        load_model(path)


def test_corrupt_header_is_rejected(tmp_path):
    path = tmp_path / "model.bin"
    header = b"not json at all!"
    import struct

    path.write_bytes(
        b"STATCODR" + struct.pack("<II", 1, len(header)) + header
    )
    with pytest.raises(FormatError):
        load_model(path)


def test_missing_file_is_usage_error(tmp_path):
    with pytest.raises(UsageError):
        load_model(tmp_path / "absent.bin")


def test_loaded_arrays_are_writable_copies(tmp_path):
    params, cfg, channels = small_model()
    path = tmp_path / "model.bin"
    save_model(params, cfg, channels, path)
    loaded, _, _ = load_model(path)
    loaded.output_b[:] = 5.0  # must not raise
    assert np.all(loaded.output_b == 5.0)
