"""Binary record dumps and CSV slices."""

import numpy as np
import pytest

from parosc.recordio import read_record_bin, write_record_bin, write_slice_csv


class TestBinaryRoundTrip:
    def test_real_single_channel(self, tmp_path):
        x = np.random.default_rng(1).standard_normal(1000)
        path = tmp_path / "rec.bin"
        write_record_bin(path, x, 250e3)
        loaded, rate = read_record_bin(path)
        assert rate == 250e3
        np.testing.assert_array_equal(loaded, x)

    def test_complex_channel(self, tmp_path):
        rng = np.random.default_rng(2)
        z = rng.standard_normal(500) + 1j * rng.standard_normal(500)
        path = tmp_path / "rec.bin"
        write_record_bin(path, z, 25e3)
        loaded, rate = read_record_bin(path)
        assert np.iscomplexobj(loaded)
        np.testing.assert_array_equal(loaded, z)

    def test_multi_channel(self, tmp_path):
        rng = np.random.default_rng(3)
        chans = rng.standard_normal((3, 200))
        path = tmp_path / "rec.bin"
        write_record_bin(path, chans, 1e3)
        loaded, _ = read_record_bin(path)
        np.testing.assert_array_equal(loaded, chans)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 60)
        with pytest.raises(ValueError, match="magic"):
            read_record_bin(path)


class TestCsvSlice:
    def test_header_and_values(self, tmp_path):
        x = np.arange(10, dtype=float)
        path = tmp_path / "slice.csv"
        write_slice_csv(path, x, 10.0, start=2, stop=5)
        lines = path.read_text().splitlines()
        assert lines[0] == "time_s,value"
        assert lines[1].startswith("0.2,")
        assert len(lines) == 4

    def test_complex_slice_columns(self, tmp_path):
        z = np.array([1 + 2j, 3 + 4j])
        path = tmp_path / "slice.csv"
        write_slice_csv(path, z, 1.0)
        lines = path.read_text().splitlines()
        assert lines[0] == "time_s,re,im"
        assert lines[1] == "0,1,2"
