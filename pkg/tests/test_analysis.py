import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fodirac.ambisonics import Direction, pan_source
from fodirac.analysis import (
    BandGrouping, DiffusenessEstimator, DiracAnalyzer, band_observe, diffuseness_from_sums,
    doa_vectors, estimate_diffuseness, estimate_doa,
)
from fodirac.evaluation import SceneSpec, central_angle, gen_scene, plane_wave_scene
from fodirac.filterbank import Filterbank, analyze

BANDS = BandGrouping.default(5, 60)


def test_band_tables():
    assert BandGrouping.default(5, 60).edges == (0, 2, 5, 12, 20, 60)
    assert BandGrouping.default(6, 60).edges == (0, 2, 5, 12, 20, 40, 60)
    assert BandGrouping.default(6, 40).edges == (0, 2, 5, 12, 20, 30, 40)
    assert BANDS.first_band_at(20) == 4
    with pytest.raises(ValueError):
        BandGrouping((0, 3, 3))
    with pytest.raises(ValueError):
        BANDS.first_band_at(21)


def test_band_sum_partition():
    x = np.arange(60.0)
    assert BANDS.band_sum(x).sum() == x.sum()
    assert np.bincount(BANDS.bin_to_band()).tolist() == [2, 3, 7, 8, 40]


@settings(max_examples=50, deadline=None)
@given(st.floats(-3.1, 3.1), st.floats(-1.5, 1.5))
def test_plane_wave_intensity_points_away_from_source(az, el):
    d = Direction(az, el)
    x = pan_source(np.random.default_rng(0).standard_normal(960), d, 1).signals
    i, e = band_observe(analyze(x), BANDS)
    v = doa_vectors(i.sum(axis=0), e.sum(axis=0), np.zeros((5, 3)))
    assert np.max(central_angle(v, d.to_vector())) < 1e-6
    # |I| = E for a plane wave
    np.testing.assert_allclose(np.linalg.norm(i.sum(axis=0), axis=-1), e.sum(axis=0), rtol=1e-9)


def test_band_observe_rejects_wrong_shape():
    with pytest.raises(ValueError):
        band_observe(np.zeros((3, 2, 60)), BANDS)
    with pytest.raises(ValueError):
        band_observe(np.zeros((4, 2, 59)), BANDS)


def test_doa_hold_rule():
    prev = Direction.from_degrees(45, 0)
    assert estimate_doa(np.zeros(3), 1.0, prev) == prev
    assert estimate_doa(np.array([1e-13, 0, 0]), 1e-13, prev) == prev
    assert estimate_doa(np.array([-1.0, 0, 0]), 1.0, prev).azimuth == pytest.approx(0.0)


def test_diffuseness_formula():
    assert diffuseness_from_sums(np.array([0.0, 0, 0]), 0.0) == 1.0
    assert diffuseness_from_sums(np.array([0.5, 0, 0]), 1.0) == pytest.approx(0.5)
    assert diffuseness_from_sums(np.array([2.0, 0, 0]), 1.0) == 0.0  # clamped
    h_i = np.zeros((26, 1, 3))
    h_i[:, 0, 0] = 1.0
    h_e = np.full((26, 1), 4.0)
    assert estimate_diffuseness(h_i, h_e)[0] == pytest.approx(0.75)


def test_estimator_window_is_26_slots():
    est = DiffusenessEstimator(1)
    for _ in range(26):
        est.update(np.array([[1.0, 0, 0]]), np.array([1.0]))
    assert est.estimate()[0] == pytest.approx(0.0)
    for _ in range(25):
        est.update(np.zeros((1, 3)), np.array([1.0]))
    assert est.estimate()[0] == pytest.approx(1 - 1 / 26)
    est.update(np.zeros((1, 3)), np.array([1.0]))
    assert est.estimate()[0] == pytest.approx(1.0)


def test_analyzer_plane_wave_converges():
    d = Direction.from_degrees(-70, 35)
    scene = gen_scene(plane_wave_scene(d, 0.0, 0.2, seed=5), 1)
    fb, an = Filterbank(4, 48000), DiracAnalyzer(BANDS)
    p = an.process(fb.analyze(scene.frame.signals))
    assert np.all(p.diffuseness[30:] < 0.05)
    assert np.max(central_angle(p.direction[30:], d.to_vector())) < 2.0


def test_analyzer_isotropic_is_diffuse():
    scene = gen_scene(SceneSpec([], 1.0, 1.0, seed=2), 1)
    p = DiracAnalyzer(BANDS).process(Filterbank(4, 48000).analyze(scene.frame.signals))
    assert np.mean(p.diffuseness[30:]) > 0.85
    assert np.mean(p.diffuseness[30:, 4]) > 0.9


def test_analyzer_silence():
    p = DiracAnalyzer(BANDS).process(np.zeros((4, 16, 60), complex))
    assert np.all(p.diffuseness == 1.0)
    np.testing.assert_array_equal(p.direction[..., 0], 1.0)


def test_block_update_matches_slot_by_slot():
    rng = np.random.default_rng(7)
    i = rng.standard_normal((40, 5, 3))
    e = rng.random((40, 5)) * 4
    a, b = DiffusenessEstimator(5), DiffusenessEstimator(5)
    per_slot = np.stack([a.update(i[s], e[s]) for s in range(40)])
    block = np.concatenate([b.update_block(i[:13], e[:13]), b.update_block(i[13:], e[13:])])
    np.testing.assert_allclose(block, per_slot, atol=1e-12)
