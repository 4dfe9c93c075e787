"""Tests for the AFB1 feature file codec."""

import struct

import numpy as np
import pytest

from affectkit.data.afb1 import (
    VideoRecord,
    decode_record,
    encode_record,
    read_video_file,
    write_video_file,
)
from affectkit.errors import (
    BadMagicError,
    DataFormatError,
    FrameCountMismatchError,
    LabelRangeError,
    TruncatedPayloadError,
)

PREFIX_SIZE = 10
DIMS_SIZE = 8


def _header_len(video_id: str) -> int:
    return PREFIX_SIZE + len(video_id.encode("utf-8")) + DIMS_SIZE


@pytest.fixture
def va_record(rng):
    return VideoRecord("clip-01", rng.standard_normal((5, 3)).astype(np.float32),
                       rng.uniform(-1, 1, (5, 2)).astype(np.float32))


class TestRoundTrip:
    def test_va_record(self, va_record):
        decoded = decode_record(encode_record(va_record))
        assert decoded.video_id == "clip-01"
        assert decoded.label_kind == "va"
        np.testing.assert_array_equal(decoded.features, va_record.features)
        np.testing.assert_array_equal(decoded.labels, va_record.labels)

    def test_au_and_unlabelled_records(self, rng, tmp_path):
        au = VideoRecord("vidéo", rng.standard_normal((4, 2)),
                         (rng.random((4, 12)) < 0.5).astype(np.uint8))
        path = write_video_file(tmp_path / "a" / "au.afb1", au)
        decoded = read_video_file(path)
        assert decoded.video_id == "vidéo"
        np.testing.assert_array_equal(decoded.labels, au.labels)

        bare = decode_record(encode_record(VideoRecord("x", np.ones((2, 2)))))
        assert bare.labels is None and bare.label_kind == "none"

    def test_header_layout(self, va_record):
        data = encode_record(va_record)
        magic, version, kind, _, id_len = struct.unpack_from("<4sHBBH", data, 0)
        assert (magic, version, kind, id_len) == (b"AFB1", 1, 1, 7)
        assert struct.unpack_from("<II", data, PREFIX_SIZE + 7) == (5, 3)
        assert len(data) == _header_len("clip-01") + 5 * (3 * 4 + 2 * 4)


class TestCorruption:
    def test_bad_magic(self, va_record):
        data = b"NOPE" + encode_record(va_record)[4:]
        with pytest.raises(BadMagicError) as info:
            decode_record(data, path="x.afb1")
        assert info.value.offset == 0
        assert "path=x.afb1" in str(info.value)

    def test_unsupported_version(self, va_record):
        data = bytearray(encode_record(va_record))
        data[4:6] = struct.pack("<H", 2)
        with pytest.raises(BadMagicError) as info:
            decode_record(bytes(data))
        assert info.value.offset == 4

    def test_truncated_header(self, va_record):
        with pytest.raises(TruncatedPayloadError):
            decode_record(encode_record(va_record)[:6])
        with pytest.raises(TruncatedPayloadError):
            decode_record(encode_record(va_record)[:PREFIX_SIZE + 4])

    def test_truncated_payload(self, va_record):
        data = encode_record(va_record)[:-3]
        with pytest.raises(TruncatedPayloadError) as info:
            decode_record(data)
        assert info.value.offset == len(data)

    def test_whole_frame_missing(self, va_record):
        data = encode_record(va_record)[:-(3 * 4 + 2 * 4)]
        with pytest.raises(FrameCountMismatchError) as info:
            decode_record(data)
        assert (info.value.header_frames, info.value.payload_frames) == (5, 4)

    def test_trailing_bytes(self, va_record):
        data = encode_record(va_record) + b"\x00\x01\x02"
        with pytest.raises(DataFormatError) as info:
            decode_record(data)
        assert type(info.value) is DataFormatError
        assert info.value.offset == len(data) - 3

    def test_non_finite_feature_offset(self, va_record):
        data = bytearray(encode_record(va_record))
        position = _header_len("clip-01") + 4 * 4
        data[position:position + 4] = struct.pack("<f", float("nan"))
        with pytest.raises(DataFormatError) as info:
            decode_record(bytes(data))
        assert info.value.offset == position

    def test_va_label_out_of_range(self, va_record):
        data = bytearray(encode_record(va_record))
        features_end = _header_len("clip-01") + 5 * 3 * 4
        position = features_end + 3 * 4
        data[position:position + 4] = struct.pack("<f", 1.5)
        with pytest.raises(LabelRangeError) as info:
            decode_record(bytes(data))
        assert info.value.offset == position

    def test_au_label_not_binary(self):
        data = bytearray(encode_record(VideoRecord("a", np.zeros((2, 1)),
                                                   np.zeros((2, 12), dtype=np.uint8))))
        data[-1] = 2
        with pytest.raises(LabelRangeError) as info:
            decode_record(bytes(data))
        assert info.value.offset == len(data) - 1

    def test_record_validation(self):
        with pytest.raises(DataFormatError):
            VideoRecord("v", np.zeros((0, 3)))
        with pytest.raises(FrameCountMismatchError):
            VideoRecord("v", np.zeros((3, 2)), np.zeros((2, 2)))
        with pytest.raises(DataFormatError):
            VideoRecord("v", np.zeros((3, 2)), np.zeros((3, 5)))
