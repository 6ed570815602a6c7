import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fodirac.ambisonics import Direction, TcMode, sh_eval
from fodirac.analysis import BandGrouping
from fodirac.synthesis import (
    Decorrelator, HoaSynthesizer, SynthesisConfig, balanced_compensation, compensation_radicand,
    compute_gains, decorrelate, energy_compensation, gain_tables, synthesize_hoa,
)

BANDS5 = BandGrouping.default(5, 60)
BANDS6 = BandGrouping.default(6, 60)


def test_energy_compensation_fixed_points():
    assert energy_compensation(0.0, 3, 1) == 1.0
    assert energy_compensation(0.7, 2, 2) == 1.0
    assert energy_compensation(1.0, 3, 1) == 0.0
    assert energy_compensation(0.5, 3, 1) == pytest.approx(np.sqrt(0.5))
    assert energy_compensation(1.0, 3, 2) == pytest.approx(np.sqrt(2 / 3))
    assert compensation_radicand(1.0, 3, 0) == pytest.approx(-2.0)
    assert energy_compensation(1.0, 3, 0) == 0.0  # clamped
    with pytest.raises(ValueError):
        energy_compensation(0.5, 1, 2)


@given(st.floats(0, 1), st.integers(1, 3).flatmap(lambda h: st.tuples(st.just(h), st.integers(0, h))))
def test_balanced_gain_restores_model_energy(psi, hl):
    h, l = hl
    g = balanced_compensation(psi, h, l)
    # orders 0..L carry g^2 each, orders above L carry (1 - psi)
    assert g ** 2 * (l + 1) + (h - l) * (1 - psi) == pytest.approx(h + 1)


def test_compute_gains():
    d = Direction.from_degrees(30, 10)
    g_dir, g_diff = compute_gains(0.36, d, 2, -1)
    assert g_dir == pytest.approx(0.8 * sh_eval(d, 2)[5])
    assert g_diff == pytest.approx(np.sqrt(0.36 / 5))
    with pytest.raises(ValueError):
        compute_gains(0.1, d, 4, 0)


def test_gain_tables_power_per_order():
    rng = np.random.default_rng(0)
    v = rng.standard_normal((7, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    psi = rng.random(7)
    g_dir, g_diff = gain_tables(psi, v, 3)
    for l in range(4):
        sl = slice(l * l, (l + 1) ** 2)
        np.testing.assert_allclose((g_dir[:, sl] ** 2 + g_diff[:, sl] ** 2).sum(axis=1), 1.0)


def test_decorrelator_incoherent_and_energy_preserving():
    rng = np.random.default_rng(1)
    w = rng.standard_normal((4000, 20)) + 1j * rng.standard_normal((4000, 20))
    d = Decorrelator(3, 20).process(w)
    for i in range(3):
        assert np.sum(np.abs(d[i]) ** 2) / np.sum(np.abs(w) ** 2) == pytest.approx(1.0, abs=0.02)
        c = np.abs(np.vdot(w, d[i])) / np.sum(np.abs(w) ** 2)
        assert c < 0.05
        for j in range(i):
            assert np.abs(np.vdot(d[j], d[i])) / np.sum(np.abs(w) ** 2) < 0.05


def test_decorrelator_streaming_matches_one_shot():
    rng = np.random.default_rng(2)
    w = rng.standard_normal((64, 20)) + 0j
    dec = Decorrelator(2, 20)
    streamed = np.concatenate([dec.process(w[i:i + 16]) for i in range(0, 64, 16)], axis=1)
    np.testing.assert_allclose(streamed[1], decorrelate(w, 1))


def test_config_defaults():
    c = SynthesisConfig(TcMode.FOA4, BANDS6)
    assert c.order_diffuse == 2 and c.decoder_analysis and c.low_bands == (0, 1, 2, 3)
    assert c.decorrelated_channels == (4, 5, 6, 7, 8)
    c = SynthesisConfig(TcMode.MONO1, BANDS5)
    assert c.order_diffuse == 1 and not c.decoder_analysis and c.decorrelated_channels == (1, 2, 3)
    with pytest.raises(ValueError):
        SynthesisConfig(TcMode.FOA4, BANDS6, order_diffuse=0)


def _run(mode, psi, d, bands=BANDS5, slots=16, **kw):
    cfg = SynthesisConfig(mode, bands, **kw)
    rng = np.random.default_rng(3)
    w = rng.standard_normal((slots, 60)) + 1j * rng.standard_normal((slots, 60))
    y = sh_eval(d, 1)
    direct = np.stack([y[c] * w for c in cfg.direct_channels])
    p = np.full((slots, bands.n_bands), psi)
    dirs = np.broadcast_to(d.to_vector(), (slots, bands.n_bands, 3))
    return synthesize_hoa(direct, p, dirs, cfg), w


@pytest.mark.parametrize("mode", [TcMode.MONO1, TcMode.STEREO2])
def test_directional_synthesis_is_plane_wave(mode):
    d = Direction.from_degrees(50, -20)
    out, w = _run(mode, 0.0, d)
    expected = sh_eval(d, 3)[:, None, None] * w[None]
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_diffuse_synthesis_order_energy():
    d = Direction.from_degrees(0, 0)
    out, w = _run(TcMode.MONO1, 1.0, d, slots=4000)
    e_w = np.sum(np.abs(w) ** 2)
    p = np.sum(np.abs(out) ** 2, axis=(1, 2)) / e_w
    g2 = balanced_compensation(1.0, 3, 1) ** 2
    np.testing.assert_allclose(p[0], g2)
    np.testing.assert_allclose(p[1:4], g2 / 3, rtol=0.05)
    np.testing.assert_allclose(p[4:], 0.0, atol=1e-20)


def test_decreasing_compensation_records_clamp_events():
    # the radicand only goes negative for L = 0
    cfg = SynthesisConfig(TcMode.MONO1, BANDS5, order_diffuse=0, compensation="decreasing")
    syn = HoaSynthesizer(cfg)
    syn.process(np.ones((1, 4, 60), complex), np.ones((4, 5)), np.tile([1.0, 0, 0], (4, 5, 1)))
    assert syn.clamp_events == 20


def test_interpolation_ramps_gain_between_subframes():
    cfg = SynthesisConfig(TcMode.MONO1, BANDS5)
    syn = HoaSynthesizer(cfg)
    w = np.ones((1, 4, 60), complex)
    x = np.tile([1.0, 0, 0], (4, 5, 1))
    y = np.tile([0.0, 1.0, 0], (4, 5, 1))
    syn.process(w, np.zeros((4, 5)), x, smooth_bands=range(5))
    out = syn.process(w, np.zeros((4, 5)), y, smooth_bands=range(5))
    # X gain (ACN 3) ramps from 1 to 0 and Y gain (ACN 1) from 0 to 1 over 4 slots
    np.testing.assert_allclose(out[3, :, 0].real, [0.75, 0.5, 0.25, 0.0])
    np.testing.assert_allclose(out[1, :, 0].real, [0.25, 0.5, 0.75, 1.0])


def test_shape_errors():
    cfg = SynthesisConfig(TcMode.STEREO2, BANDS5)
    with pytest.raises(ValueError):
        synthesize_hoa(np.zeros((1, 4, 60)), np.zeros((4, 5)), np.zeros((4, 5, 3)), cfg)
    with pytest.raises(ValueError):
        synthesize_hoa(np.zeros((2, 4, 60)), np.zeros((4, 4)), np.zeros((4, 4, 3)), cfg)
