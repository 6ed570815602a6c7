import numpy as np
import pytest

from fodirac.bitstream import FrameError
from fodirac.transport import BudgetError, choose_resolution, decode_tc_bytes, encode_tc, encode_tc_bytes


def snr_db(ref, out):
    return 10 * np.log10(np.sum(ref ** 2) / np.sum((ref - out) ** 2))


def test_passthrough_is_float32_exact():
    x = np.random.default_rng(0).standard_normal((2, 960))
    y = decode_tc_bytes(encode_tc_bytes(x, None, "passthrough"), 2, 960, "passthrough")
    np.testing.assert_array_equal(y, x.astype(np.float32))


def test_passthrough_non_finite_is_frame_error():
    data = np.full((1, 10), np.nan, ">f4").tobytes()
    with pytest.raises(FrameError):
        decode_tc_bytes(data, 1, 10, "passthrough")


def test_scalarq_8_bit_snr():
    # full-rate 8-bit block-companded PCM on a smooth signal
    n = 960
    t = np.arange(n) / 48000
    x = (np.sin(2 * np.pi * 440 * t) * 0.5)[None]
    budget = 3 + 4 + 8 * 7 + 8 * n
    r, width = choose_resolution(1, n, budget)
    assert (r, width) == (1, 8)
    y = decode_tc_bytes(encode_tc_bytes(x, budget, "scalarq"), 1, n, "scalarq")
    assert snr_db(x, y) > 45


@pytest.mark.xfail(strict=True, reason="uniform 4-bit mantissas cap SNR near 6 dB/bit, below 30 dB")
def test_scalarq_4_bit_snr_30_db():
    x = np.random.default_rng(3).standard_normal((1, 960))
    budget = 3 + 4 + 8 * 7 + 4 * 960
    assert choose_resolution(1, 960, budget) == (1, 4)
    y = decode_tc_bytes(encode_tc_bytes(x, budget, "scalarq"), 1, 960, "scalarq")
    assert snr_db(x, y) >= 30


@pytest.mark.parametrize("n_tc,budget", [(1, 463), (2, 1137), (4, 2460)])
def test_scalarq_fits_budget(n_tc, budget):
    x = np.random.default_rng(1).standard_normal((n_tc, 960))
    w = encode_tc(x, budget, "scalarq")
    assert w.n_bits <= budget
    y = decode_tc_bytes(w.to_bytes(), n_tc, 960, "scalarq")
    assert y.shape == x.shape and np.all(np.isfinite(y))


def test_scalarq_low_frequency_survives_decimation():
    t = np.arange(960) / 48000
    x = np.sin(2 * np.pi * 300 * t)[None]
    y = decode_tc_bytes(encode_tc_bytes(x, 600, "scalarq"), 1, 960, "scalarq")
    assert snr_db(x[:, 100:-100], y[:, 100:-100]) > 10


def test_scalarq_silence():
    y = decode_tc_bytes(encode_tc_bytes(np.zeros((1, 960)), 500, "scalarq"), 1, 960, "scalarq")
    np.testing.assert_array_equal(y, 0.0)


def test_budget_errors():
    with pytest.raises(BudgetError):
        encode_tc(np.zeros((4, 960)), 100, "scalarq")
    with pytest.raises(BudgetError):
        encode_tc(np.zeros((1, 960)), None, "scalarq")
    with pytest.raises(ValueError):
        encode_tc(np.zeros((1, 960)), 100, "mp3")


def test_truncated_scalarq_payload():
    data = encode_tc_bytes(np.ones((1, 960)), 4000, "scalarq")
    with pytest.raises(FrameError):
        decode_tc_bytes(data[:20], 1, 960, "scalarq")
