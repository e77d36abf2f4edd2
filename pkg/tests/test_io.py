"""SARA container format: byte layout, round trips, error paths, golden files."""

import io
import struct
from pathlib import Path

import numpy as np
import pytest

from sara.errors import BadMagicError, TruncatedStreamError, UnsupportedVersionError
from sara.io import read_tensor_file, tensor_bytes, tensor_read, tensor_write, write_tensor_file
from sara.tensors import FeatureMap, PooledGrid, ProbMap

GOLDEN = Path(__file__).parent / "golden"


def test_minimal_layout():
    # magic(4) + version/dtype/ndim/pad(4) + 3 u32 dims + one float32
    blob = tensor_bytes(FeatureMap(np.full((1, 1, 1), 1.0, np.float32)))
    assert blob[:4] == b"SARA"
    assert blob[4:8] == bytes([1, 1, 3, 0])
    assert blob[8:20] == struct.pack("<3I", 1, 1, 1)
    assert blob[20:] == struct.pack("<f", 1.0)
    assert len(blob) == 24


def test_prob_map_is_rank_2():
    blob = tensor_bytes(ProbMap(np.zeros((2, 3), np.float32)))
    assert blob[6] == 2
    assert struct.unpack("<2I", blob[8:16]) == (2, 3)


def test_write_returns_byte_count():
    sink = io.BytesIO()
    n = tensor_write(ProbMap(np.zeros((2, 2), np.float32)), sink)
    assert n == len(sink.getvalue()) == 8 + 8 + 16


@pytest.mark.parametrize("seed", range(10))
def test_round_trip_bit_exact(seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    shape = tuple(int(d) for d in rng.integers(1, 9, size=rng.integers(2, 4)))
    arr = rng.standard_normal(shape).astype(np.float32)
    back = tensor_read(io.BytesIO(tensor_bytes(arr)))
    assert back.shape == arr.shape
    assert back.tobytes() == arr.tobytes()


def test_empty_dims_rejected():
    with pytest.raises(ValueError):
        tensor_bytes(np.float32(1.0))  # rank 0
    with pytest.raises(ValueError):
        tensor_bytes(np.zeros((0, 3), np.float32))


def test_non_float32_rejected():
    with pytest.raises(ValueError):
        tensor_bytes(np.zeros((2, 2), np.float64))


def test_bad_magic():
    with pytest.raises(BadMagicError):
        tensor_read(io.BytesIO(b"NOPE" + bytes(20)))


def test_unsupported_version():
    blob = bytearray(tensor_bytes(np.ones((1, 1), np.float32)))
    blob[4] = 9
    with pytest.raises(UnsupportedVersionError):
        tensor_read(io.BytesIO(bytes(blob)))


def test_unsupported_dtype():
    blob = bytearray(tensor_bytes(np.ones((1, 1), np.float32)))
    blob[5] = 7
    with pytest.raises(UnsupportedVersionError):
        tensor_read(io.BytesIO(bytes(blob)))


def test_truncated_data():
    blob = tensor_bytes(np.ones((2, 2), np.float32))
    with pytest.raises(TruncatedStreamError):
        tensor_read(io.BytesIO(blob[:-3]))


def test_truncated_dims():
    blob = tensor_bytes(np.ones((2, 2), np.float32))
    with pytest.raises(TruncatedStreamError):
        tensor_read(io.BytesIO(blob[:10]))


def test_file_helpers(tmp_path):
    arr = PooledGrid(np.arange(12, dtype=np.float32).reshape(3, 2, 2))
    path = tmp_path / "pooled.sara"
    write_tensor_file(path, arr)
    back = read_tensor_file(path)
    assert back.tobytes() == arr.data.tobytes()


def test_golden_files_stable():
    # regenerating the committed fixtures must reproduce them byte for byte
    feature = FeatureMap((np.arange(24, dtype=np.float32) / np.float32(7)).reshape(2, 3, 4))
    prob = ProbMap((np.arange(15, dtype=np.float32) / np.float32(15)).reshape(3, 5))
    assert tensor_bytes(feature) == (GOLDEN / "feature_2x3x4.sara").read_bytes()
    assert tensor_bytes(prob) == (GOLDEN / "prob_3x5.sara").read_bytes()
