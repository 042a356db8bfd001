import struct

import numpy as np
import pytest

from rdmor.errors import DimensionError
from rdmor.io import MAGIC, FormatError, read_matrix, write_matrix


@pytest.mark.parametrize("mmap", [False, True])
def test_round_trip(tmp_path, rng, mmap):
    M = rng.standard_normal((7, 5))
    t = np.linspace(0, 1, 5)
    p = write_matrix(tmp_path / "m.rdm", M, t)
    M2, t2 = read_matrix(p, mmap=mmap)
    np.testing.assert_array_equal(M2, M)
    np.testing.assert_array_equal(t2, t)


def test_layout_is_column_major_little_endian(tmp_path):
    M = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    p = write_matrix(tmp_path / "m.rdm", M, [0.5, 1.5])
    raw = p.read_bytes()
    magic, version, rows, cols = struct.unpack("<6sHQQ", raw[:24])
    assert (magic, version, rows, cols) == (MAGIC, 1, 3, 2)
    payload = np.frombuffer(raw[24:], dtype="<f8")
    np.testing.assert_array_equal(payload, [1, 3, 5, 2, 4, 6, 0.5, 1.5])


def test_vector_and_default_times(tmp_path):
    M, t = read_matrix(write_matrix(tmp_path / "v.rdm", np.arange(4.0)))
    assert M.shape == (4, 1) and t.tolist() == [0.0]


def test_errors(tmp_path):
    with pytest.raises(DimensionError):
        write_matrix(tmp_path / "x", np.zeros((2, 2, 2)))
    with pytest.raises(DimensionError):
        write_matrix(tmp_path / "x", np.zeros((2, 3)), [0.0])
    bad = tmp_path / "bad"
    bad.write_bytes(b"NOTRDM" + bytes(30))
    with pytest.raises(FormatError):
        read_matrix(bad)
    short = tmp_path / "short"
    short.write_bytes(b"RD")
    with pytest.raises(FormatError):
        read_matrix(short)
    p = write_matrix(tmp_path / "t.rdm", np.ones((3, 3)))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(FormatError):
        read_matrix(p)
