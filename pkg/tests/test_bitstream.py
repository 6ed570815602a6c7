import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fodirac.bitstream import (
    HEADER_BYTES, BitReader, BitWriter, BitstreamError, FormatError, FrameError, StreamHeader, demux,
    frame_bits, frame_bytes, mux,
)


@given(st.lists(st.integers(1, 16).flatmap(lambda w: st.tuples(st.integers(0, 2 ** w - 1), st.just(w))),
                max_size=40))
def test_bit_round_trip(fields):
    w = BitWriter()
    for v, n in fields:
        w.write(v, n)
    r = BitReader(w.to_bytes())
    assert [r.read(n) for _, n in fields] == [v for v, _ in fields]
    assert w.n_bits == sum(n for _, n in fields)


def test_msb_first_and_padding():
    w = BitWriter()
    w.write(1, 1)
    w.write(0b01, 2)
    assert w.to_bytes() == b"\xa0"
    assert w.to_bytes(3) == b"\xa0\x00\x00"
    with pytest.raises(BitstreamError):
        w.to_bytes(0)
    with pytest.raises(ValueError):
        w.write(4, 2)


def test_array_round_trip():
    vals = np.arange(100) % 13
    w = BitWriter()
    w.write_array(vals, 4)
    w.write_bytes(b"ok")
    r = BitReader(w.to_bytes())
    np.testing.assert_array_equal(r.read_array(100, 4), vals)
    assert r.read_bytes(2) == b"ok"
    with pytest.raises(FrameError):
        r.read(8)


def test_cbr_arithmetic():
    assert frame_bits(32000) == 640 and frame_bytes(32000) == 80
    assert frame_bytes(128000) == 320
    with pytest.raises(FormatError):
        frame_bits(32001)


HDR = StreamHeader(48000, 64000, 2, 3, 5, "scalarq")


def test_header_round_trip():
    data = HDR.pack()
    assert len(data) == HEADER_BYTES == 14 and data[:4] == b"ADRC"
    assert StreamHeader.unpack(data) == HDR


@pytest.mark.parametrize("offset,value", [(0, 0x00), (4, 2), (5, 9), (10, 3), (12, 7), (13, 5)])
def test_header_rejects_bad_fields(offset, value):
    data = bytearray(HDR.pack())
    data[offset] = value
    with pytest.raises(FormatError):
        StreamHeader.unpack(bytes(data))


def test_mux_demux_exact():
    rng = np.random.default_rng(0)
    frames = [rng.integers(0, 256, 160, dtype=np.uint8).tobytes() for _ in range(7)]
    data = mux(HDR, frames)
    assert len(data) == 14 + 7 * 160
    h, got = demux(data)
    assert h == HDR and got == frames
    assert mux(h, got) == data


def test_demux_truncated():
    data = mux(HDR, [bytes(160)] * 3)[:-10]
    with pytest.raises(FrameError) as e:
        demux(data)
    assert e.value.frame_index == 2
    assert len(demux(data, strict=False)[1]) == 2
    with pytest.raises(FrameError):
        mux(HDR, [bytes(159)])


def test_passthrough_frame_size():
    h = StreamHeader(48000, 32000, 1, 1, 5, "passthrough")
    assert h.frame_size(960) == 80 + 4 * 960
