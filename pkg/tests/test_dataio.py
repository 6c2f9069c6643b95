"""Binary file formats: big-endian IDX archives and NetPBM images."""

import struct

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from basis_sep.core import FormatError, Signal
from basis_sep.dataio import (
    read_idx,
    read_idx_images,
    read_idx_labels,
    read_pnm,
    write_pnm,
)


def idx_image_bytes(count, rows, cols, payload=None):
    header = struct.pack(">IIII", 0x00000803, count, rows, cols)
    if payload is None:
        payload = bytes(range(count * rows * cols % 256)) * 0
        payload = bytes((i * 7) % 256 for i in range(count * rows * cols))
    return header + payload


def idx_label_bytes(count, payload=None):
    if payload is None:
        payload = bytes(i % 10 for i in range(count))
    return struct.pack(">II", 0x00000801, count) + payload


class TestIdxImages:
    def test_reads_scaled_signals(self, tmp_path):
        path = tmp_path / "images.idx"
        payload = bytes([0, 255, 128, 64] * 6)
        path.write_bytes(idx_image_bytes(2, 3, 4, payload))
        images = read_idx_images(path)
        assert len(images) == 2
        assert images[0].shape == (1, 3, 4)
        expected = np.tile([0.0, 1.0, 128 / 255, 64 / 255], 3)
        assert_allclose(images[0].data, expected)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.idx"
        path.write_bytes(struct.pack(">IIII", 0x00000801, 1, 2, 2) + bytes(4))
        with pytest.raises(FormatError, match="bad magic") as info:
            read_idx_images(path)
        assert info.value.offset == 0

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "short.idx"
        path.write_bytes(struct.pack(">II", 0x00000803, 2))
        with pytest.raises(FormatError, match="truncated") as info:
            read_idx_images(path)
        assert info.value.offset == 8

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "cut.idx"
        full = idx_image_bytes(2, 3, 4)
        path.write_bytes(full[:-4])
        with pytest.raises(FormatError, match="file has") as info:
            read_idx_images(path)
        assert info.value.offset == len(full) - 4

    def test_trailing_bytes(self, tmp_path):
        path = tmp_path / "long.idx"
        path.write_bytes(idx_image_bytes(2, 3, 4) + bytes(3))
        with pytest.raises(FormatError, match="file has") as info:
            read_idx_images(path)
        assert info.value.offset == 16 + 24

    def test_dimension_overflow(self, tmp_path):
        path = tmp_path / "huge.idx"
        path.write_bytes(struct.pack(">IIII", 0x00000803, 2**24, 2**8, 2**8))
        with pytest.raises(FormatError, match="overflow") as info:
            read_idx_images(path)
        assert info.value.offset == 4

    def test_offset_appears_in_message(self, tmp_path):
        path = tmp_path / "bad.idx"
        path.write_bytes(struct.pack(">IIII", 0, 1, 1, 1) + bytes(1))
        with pytest.raises(FormatError, match=r"at byte offset 0"):
            read_idx_images(path)


class TestIdxLabels:
    def test_reads_int_vector(self, tmp_path):
        path = tmp_path / "labels.idx"
        path.write_bytes(idx_label_bytes(5, bytes([3, 1, 4, 1, 5])))
        labels = read_idx_labels(path)
        assert labels.dtype == np.int64
        assert_array_equal(labels, [3, 1, 4, 1, 5])

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.idx"
        path.write_bytes(struct.pack(">II", 0x00000803, 1) + bytes(1))
        with pytest.raises(FormatError, match="bad magic") as info:
            read_idx_labels(path)
        assert info.value.offset == 0

    def test_count_mismatch(self, tmp_path):
        path = tmp_path / "short.idx"
        path.write_bytes(idx_label_bytes(5, bytes(3)))
        with pytest.raises(FormatError, match="file has") as info:
            read_idx_labels(path)
        assert info.value.offset == 11

    def test_count_overflow(self, tmp_path):
        path = tmp_path / "huge.idx"
        path.write_bytes(struct.pack(">II", 0x00000801, 2**31 + 1))
        with pytest.raises(FormatError, match="overflow") as info:
            read_idx_labels(path)
        assert info.value.offset == 4


class TestReadIdxPairing:
    def test_images_alone(self, tmp_path):
        path = tmp_path / "images.idx"
        path.write_bytes(idx_image_bytes(2, 2, 2))
        images = read_idx(path)
        assert len(images) == 2

    def test_paired_with_labels(self, tmp_path):
        ipath = tmp_path / "images.idx"
        lpath = tmp_path / "labels.idx"
        ipath.write_bytes(idx_image_bytes(3, 2, 2))
        lpath.write_bytes(idx_label_bytes(3))
        images, labels = read_idx(ipath, lpath)
        assert len(images) == 3 and len(labels) == 3

    def test_count_disagreement(self, tmp_path):
        ipath = tmp_path / "images.idx"
        lpath = tmp_path / "labels.idx"
        ipath.write_bytes(idx_image_bytes(3, 2, 2))
        lpath.write_bytes(idx_label_bytes(2))
        with pytest.raises(FormatError, match="entries for"):
            read_idx(ipath, lpath)


class TestPnm:
    def test_gray_round_trip_is_byte_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        signal = Signal(rng.random(6 * 5), (1, 6, 5))
        first = tmp_path / "a.pgm"
        second = tmp_path / "b.pgm"
        write_pnm(first, signal)
        write_pnm(second, read_pnm(first))
        assert first.read_bytes() == second.read_bytes()

    def test_color_round_trip_is_byte_identical(self, tmp_path):
        rng = np.random.default_rng(1)
        signal = Signal(rng.random(3 * 4 * 4), (3, 4, 4))
        first = tmp_path / "a.ppm"
        second = tmp_path / "b.ppm"
        write_pnm(first, signal)
        write_pnm(second, read_pnm(first))
        assert first.read_bytes() == second.read_bytes()

    def test_half_maps_to_128(self, tmp_path):
        path = tmp_path / "half.pgm"
        write_pnm(path, Signal(np.full(4, 0.5), (1, 2, 2)))
        assert path.read_bytes().endswith(bytes([128] * 4))

    def test_values_are_clamped(self, tmp_path):
        path = tmp_path / "clamp.pgm"
        write_pnm(path, Signal(np.array([-0.3, 1.7, 0.0, 1.0]), (1, 2, 2)))
        assert path.read_bytes().endswith(bytes([0, 255, 0, 255]))

    def test_color_interleaving(self, tmp_path):
        # channel planes (r0 r1)(g0 g1)(b0 b1) -> file pixels r0 g0 b0 r1 g1 b1
        data = np.array([10, 20, 30, 40, 50, 60]) / 255.0
        path = tmp_path / "tiny.ppm"
        write_pnm(path, Signal(data, (3, 1, 2)))
        assert path.read_bytes() == b"P6\n2 1\n255\n" + bytes([10, 30, 50, 20, 40, 60])
        back = read_pnm(path)
        assert back.shape == (3, 1, 2)
        assert_allclose(back.data, data)

    def test_header_layout(self, tmp_path):
        path = tmp_path / "img.pgm"
        write_pnm(path, Signal(np.zeros(12), (1, 3, 4)))
        assert path.read_bytes().startswith(b"P5\n4 3\n255\n")

    def test_comments_in_header(self, tmp_path):
        path = tmp_path / "comments.pgm"
        path.write_bytes(b"P5 # magic\n# a full comment line\n2 # width\n3\n255\n"
                         + bytes(6))
        signal = read_pnm(path)
        assert signal.shape == (1, 3, 2)

    def test_shape_validation_on_write(self, tmp_path):
        with pytest.raises(ValueError, match="shape"):
            write_pnm(tmp_path / "bad.pgm", Signal(np.zeros(8), (2, 2, 2)))
        with pytest.raises(ValueError, match="shape"):
            write_pnm(tmp_path / "bad.pgm", Signal(np.zeros(4), (2, 2)))


class TestPnmErrors:
    def write(self, tmp_path, raw):
        path = tmp_path / "bad.pnm"
        path.write_bytes(raw)
        return path

    def test_unsupported_magic(self, tmp_path):
        path = self.write(tmp_path, b"P4\n2 2\n255\n" + bytes(4))
        with pytest.raises(FormatError, match="P5 or P6") as info:
            read_pnm(path)
        assert info.value.offset == 0

    def test_missing_header_fields(self, tmp_path):
        path = self.write(tmp_path, b"P5\n2")
        with pytest.raises(FormatError, match="height"):
            read_pnm(path)

    def test_non_integer_width(self, tmp_path):
        path = self.write(tmp_path, b"P5\nabc 3\n255\n" + bytes(6))
        with pytest.raises(FormatError, match="integer"):
            read_pnm(path)

    def test_non_positive_height(self, tmp_path):
        path = self.write(tmp_path, b"P5\n2 0\n255\n")
        with pytest.raises(FormatError, match="positive"):
            read_pnm(path)

    def test_wrong_maxval(self, tmp_path):
        path = self.write(tmp_path, b"P5\n2 2\n65535\n" + bytes(8))
        with pytest.raises(FormatError, match="maxval"):
            read_pnm(path)

    def test_truncated_pixels(self, tmp_path):
        raw = b"P5\n2 2\n255\n" + bytes(3)
        path = self.write(tmp_path, raw)
        with pytest.raises(FormatError, match="truncated pixel") as info:
            read_pnm(path)
        assert info.value.offset == len(raw)

    def test_trailing_bytes(self, tmp_path):
        raw = b"P5\n2 2\n255\n" + bytes(4)
        path = self.write(tmp_path, raw + b"xx")
        with pytest.raises(FormatError, match="trailing") as info:
            read_pnm(path)
        assert info.value.offset == len(raw)
