"""Tests for UDAM/UDAL files and CSV ingestion."""

import struct
import tempfile
from pathlib import Path

import numpy as np
import pytest

from uda_bench.datasets import load_labels, load_matrix, save_csv, save_labels, save_matrix
from uda_bench.datasets.matrix_io import decode_labels, decode_matrix, encode_labels, encode_matrix
from uda_bench.utils.exceptions import FormatError


class TestBinaryFiles:
    """Test the binary matrix and label formats."""

    def test_matrix_file(self) -> None:
        """A saved matrix loads back with its shape."""
        X = np.arange(6, dtype=np.float64).reshape(2, 3) / 7.0
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "sub" / "X.udam"
            save_matrix(path, X)
            loaded = load_matrix(path)

        assert loaded.shape == (2, 3)
        assert np.array_equal(loaded, X)

    def test_label_file(self) -> None:
        """Labels load back as int64."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "y.udal"
            save_labels(path, np.array([2, 0, 1]))
            loaded = load_labels(path)

        assert loaded.dtype == np.int64
        assert loaded.tolist() == [2, 0, 1]

    def test_matrix_header(self) -> None:
        """Magic, version, rows and cols precede the payload."""
        data = encode_matrix(np.zeros((2, 3)))

        assert data[:4] == b"UDAM"
        assert struct.unpack_from("<IQQ", data, 4) == (1, 2, 3)
        assert len(data) == 24 + 6 * 8

    def test_empty_labels(self) -> None:
        """A zero-length label file is valid."""
        assert decode_labels(encode_labels(np.array([], dtype=np.int64))).shape == (0,)

    def test_wrong_magic(self) -> None:
        """A label file is not a matrix file."""
        with pytest.raises(FormatError, match="bad magic") as info:
            decode_matrix(encode_labels(np.array([1])))
        assert info.value.offset == 0

    def test_wrong_version(self) -> None:
        """Only version 1 is understood."""
        data = bytearray(encode_matrix(np.zeros((1, 1))))
        data[4:8] = struct.pack("<I", 7)

        with pytest.raises(FormatError, match="version 7") as info:
            decode_matrix(bytes(data))
        assert info.value.offset == 4

    def test_truncated_payload(self) -> None:
        """Missing payload bytes are reported at the end of the data."""
        data = encode_matrix(np.ones((2, 2)))[:-8]

        with pytest.raises(FormatError, match="truncated payload") as info:
            decode_matrix(data)
        assert info.value.offset == len(data)

    def test_trailing_bytes(self) -> None:
        """Extra bytes after the payload are an error."""
        data = encode_labels(np.array([1, 2])) + b"\x00"

        with pytest.raises(FormatError, match="trailing") as info:
            decode_labels(data)
        assert info.value.offset == 32

    def test_non_matrix_rejected(self) -> None:
        """Only 2-D arrays are encoded."""
        with pytest.raises(FormatError):
            encode_matrix(np.zeros(3))


class TestCsvFiles:
    """Test CSV ingestion and export."""

    def _write(self, tmpdir: str, name: str, text: str) -> Path:
        path = Path(tmpdir) / name
        path.write_text(text, encoding="utf-8")
        return path

    def test_header_row_is_skipped(self) -> None:
        """A non-numeric first row is treated as a header."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = self._write(tmpdir, "X.csv", "x0,x1\n1,2\n\n3.5,-4\n")
            X = load_matrix(path)

        assert X.tolist() == [[1.0, 2.0], [3.5, -4.0]]

    def test_bad_field_reports_line(self) -> None:
        """A non-numeric field after the header names its line."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = self._write(tmpdir, "X.csv", "1,2\n3,4\n5,oops\n")
            with pytest.raises(FormatError, match="non-numeric") as info:
                load_matrix(path)

        assert info.value.line == 3

    def test_ragged_rows(self) -> None:
        """Every row needs the first row's width."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = self._write(tmpdir, "X.csv", "a,b\n1,2\n3\n")
            with pytest.raises(FormatError, match="expected 2 columns") as info:
                load_matrix(path)

        assert info.value.line == 3

    def test_fractional_labels(self) -> None:
        """CSV labels must be integers."""
        with tempfile.TemporaryDirectory() as tmpdir:
            path = self._write(tmpdir, "y.csv", "label\n1\n0.5\n")
            with pytest.raises(FormatError, match="integers"):
                load_labels(path)

    def test_export_then_ingest(self) -> None:
        """Exported CSV files load without loss."""
        X = np.array([[0.1, -2.0], [1e-12, 3.0]])
        y = np.array([1, 0])
        with tempfile.TemporaryDirectory() as tmpdir:
            save_csv(Path(tmpdir) / "X.csv", X)
            save_csv(Path(tmpdir) / "y.csv", y)
            text = (Path(tmpdir) / "y.csv").read_text(encoding="utf-8")
            loaded_X = load_matrix(Path(tmpdir) / "X.csv")
            loaded_y = load_labels(Path(tmpdir) / "y.csv")

        assert text == "1\n0\n"
        assert np.array_equal(loaded_X, X)
        assert loaded_y.tolist() == [1, 0]
