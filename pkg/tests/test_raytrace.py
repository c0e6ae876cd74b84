from src.display import LedMask
from src.optics import acceptance, conjugate_pupils, illumination_profile, lens_centers
from src.raytrace import compare_pupils, trace_bundle, traced_acceptance, traced_profile

import numpy as np
import pytest


def test_pupils_agree_with_the_closed_form(bench):
    samples = compare_pupils(bench, [47, 48], 1.0, rays=100_000, seed=7)
    tolerance = max(1e-6, 0.01 * bench.led_pitch)

    assert len(samples) == 2 * (2 * bench.max_neighbors + 1)
    for sample in samples:
        assert sample.error <= tolerance
        assert sample.traced_acceptance == pytest.approx(sample.analytic_acceptance, abs=1e-3)


def test_pupils_agree_off_the_image_plane(bench):
    for sample in compare_pupils(bench, [10], 0.6, rays=100_000, seed=3, max_neighbors=1):
        assert sample.error <= max(1e-6, 0.01 * bench.led_pitch)


def test_focused_bundle_is_a_point(bench):
    led_x = bench.column_centers()[48]
    landing = trace_bundle(bench, led_x, lens_centers(bench)[48], 1.0, 1000, np.random.default_rng(0))
    assert np.ptp(landing) < 1e-9


def test_traced_acceptance(bench):
    rng = np.random.default_rng(11)
    for offset in (0.0, bench.lens_pitch, 3 * bench.lens_pitch):
        expected = acceptance(bench, 0.0, offset)
        assert traced_acceptance(bench, 0.0, offset, 200_000, rng) == pytest.approx(expected, abs=1e-3)


def test_oracle_is_reproducible(bench):
    first = compare_pupils(bench, [20], 1.0, rays=1000, seed=5)
    again = compare_pupils(bench, [20], 1.0, rays=1000, seed=5)
    assert first == again


def test_traced_profile_matches_the_closed_form(bench):
    mask = LedMask.from_columns(96, [48])
    step = 2e-3
    xs = -0.06 + step * np.arange(64)

    analytic = illumination_profile(bench, mask, 1.0, xs)
    traced = traced_profile(bench, mask, 1.0, xs, rays_per_column=400_000, seed=1)

    assert traced.values.sum() * step == pytest.approx(analytic.values.sum() * step, rel=0.03)
    assert abs(traced.peak_x() - analytic.peak_x()) <= 0.03
    assert abs(traced.fwhm() - analytic.fwhm()) <= 5 * step


def test_random_sources_land_on_their_pupils(bench, rng):
    tolerance = max(1e-6, 0.01 * bench.led_pitch)
    for seed in range(100):
        column = int(rng.integers(96))
        z = float(rng.uniform(0.3, 2.0))
        samples = compare_pupils(bench, [column], z, rays=2000, seed=seed, max_neighbors=1)
        pupils = conjugate_pupils(bench, bench.column_centers()[column], z, max_neighbors=1)

        assert [s.analytic_x for s in samples] == pytest.approx([x for x, _ in pupils], abs=1e-15)
        for sample in samples:
            assert sample.error <= tolerance
            assert sample.traced_acceptance == pytest.approx(sample.analytic_acceptance, abs=2e-3)
