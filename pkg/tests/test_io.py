import os

import numpy as np
import pytest

from ghostsim.errors import ConfigError
from ghostsim.fields import GridSpec
from ghostsim.io import (
    atomic_write_bytes,
    encode_pgm16,
    read_pgm,
    read_phase_raw,
    write_pgm16,
    write_phase_raw,
)


def test_pgm16_roundtrip(tmp_path):
    values = np.random.default_rng(0).uniform(0, 3.0, size=(20, 24))
    write_pgm16(tmp_path / "a.pgm", values, ["ghostsim 0.1.0", "scenario_sha256 abc"])
    back = read_pgm(tmp_path / "a.pgm")
    assert back.shape == (20, 24)
    assert np.max(np.abs(back - values / values.max())) <= 0.5 / 65535 + 1e-15
    raw = (tmp_path / "a.pgm").read_bytes()
    assert raw.startswith(b"P5\n# ghostsim 0.1.0\n# scenario_sha256 abc\n24 20\n65535\n")


def test_pgm16_is_big_endian():
    data = encode_pgm16(np.array([[0.0, 1.0]]))
    assert data.endswith(b"\x00\x00\xff\xff")


def test_pgm_zero_map():
    data = encode_pgm16(np.zeros((2, 2)))
    assert data.endswith(b"\x00" * 8)


def test_read_8bit_pgm(tmp_path):
    (tmp_path / "b.pgm").write_bytes(b"P5\n# made by hand\n3 2\n255\n" + bytes([0, 51, 255, 255, 0, 102]))
    t = read_pgm(tmp_path / "b.pgm")
    assert t.tolist() == [[0.0, 0.2, 1.0], [1.0, 0.0, 0.4]]


@pytest.mark.parametrize("blob", [b"P2\n2 2\n255\n0 0 0 0", b"P5\n4 4\n255\n\x00\x01"])
def test_bad_pgm(tmp_path, blob):
    (tmp_path / "c.pgm").write_bytes(blob)
    with pytest.raises(ConfigError):
        read_pgm(tmp_path / "c.pgm")


def test_phase_raw_roundtrip_is_bitwise(tmp_path):
    spec = GridSpec(16, 7.5e-6)
    phi = np.random.default_rng(1).normal(size=(16, 16))
    write_phase_raw(tmp_path / "phi.raw", phi, spec)
    back, back_spec = read_phase_raw(tmp_path / "phi.raw")
    assert back_spec == spec
    assert back.tobytes() == phi.tobytes()
    assert (tmp_path / "phi.raw").stat().st_size == 16 * 16 * 8
    assert "n = 16" in (tmp_path / "phi.hdr").read_text()


def test_phase_raw_errors(tmp_path):
    np.zeros(10).tofile(tmp_path / "x.raw")
    with pytest.raises(ConfigError, match="header"):
        read_phase_raw(tmp_path / "x.raw")
    (tmp_path / "x.hdr").write_text("n = 16\npitch = 1e-6\n")
    with pytest.raises(ConfigError, match="expected 256"):
        read_phase_raw(tmp_path / "x.raw")
    (tmp_path / "x.hdr").write_text("n = 16\n")
    with pytest.raises(ConfigError, match="pitch"):
        read_phase_raw(tmp_path / "x.raw")


def test_atomic_write_leaves_no_temporaries(tmp_path):
    target = tmp_path / "sub" / "out.bin"
    atomic_write_bytes(target, b"one")
    atomic_write_bytes(target, b"two")
    assert target.read_bytes() == b"two"
    assert os.listdir(target.parent) == ["out.bin"]
