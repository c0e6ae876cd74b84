'''
Monte-Carlo thin-lens ray tracing through the LED / lens stack, used to cross-check the closed-form optics.
'''
from src.display import DisplayGeometry, LedMask, IntensityProfile, check_grid
from src.optics import (
    acceptance,
    cell_edges,
    check_distance,
    image_point,
    lens_centers,
    nearest_lens,
)

import numpy as np

from dataclasses import dataclass
import logging
from typing import List, Optional, Sequence


logger = logging.getLogger(__name__)

DEFAULT_RAYS = 100_000


@dataclass(frozen=True)
class OracleSample:
    '''
    One source / lens pair traced both ways.

    Attributes:
        column (int): LED column of the source.
        lens (int): Index of the imaging lens.
        analytic_x (float): Pupil center from image_point (m).
        traced_x (float): Mean landing point of the traced bundle (m).
        analytic_acceptance (float): Acceptance from the closed form.
        traced_acceptance (float): Fraction of Lambertian rays entering the aperture.
    '''
    column: int
    lens: int
    analytic_x: float
    traced_x: float
    analytic_acceptance: float
    traced_acceptance: float

    @property
    def error(self) -> float:
        return abs(self.traced_x - self.analytic_x)


def _stratified(rng: np.random.Generator, n: int) -> np.ndarray:
    # one uniform sample in each of n equal strata of [0, 1)
    return (np.arange(n) + rng.random(n)) / n


def refract(geometry: DisplayGeometry, h: np.ndarray, slope: np.ndarray, lens_x: np.ndarray) -> np.ndarray:
    '''
    Paraxial thin-lens deflection of rays crossing the lens plane at heights h.
    '''
    return slope - (h - lens_x) / geometry.focal_length


def trace_bundle(geometry: DisplayGeometry, led_x: float, lens_x: float, z: float, rays: int,
                 rng: np.random.Generator) -> np.ndarray:
    '''
    Landing points on the plane z of rays from a point source filling one lens aperture.

    Args:
        geometry (DisplayGeometry): The display stack.
        led_x (float): Lateral position of the source (m).
        lens_x (float): Center of the lens (m).
        z (float): Distance of the plane (m).
        rays (int): Number of rays.
        rng (np.random.Generator): Random source.

    Returns:
        np.ndarray: The landing positions (m).
    '''
    check_distance(geometry, z)
    h = lens_x + (_stratified(rng, rays) - 0.5) * geometry.lens_aperture
    slope_in = (h - led_x) / geometry.led_lens_gap
    return h + refract(geometry, h, slope_in, lens_x) * z


def traced_acceptance(geometry: DisplayGeometry, led_x: float, lens_x: float, rays: int,
                      rng: np.random.Generator) -> float:
    '''
    Fraction of rays from a Lambertian line source that cross the lens plane inside the aperture.

    A cos(theta) emitter in the plane has sin(theta) uniform on (-1, 1).
    '''
    sines = 2 * _stratified(rng, rays) - 1
    hits = led_x + geometry.led_lens_gap * sines / np.sqrt(1 - sines ** 2)
    return float(np.mean(np.abs(hits - lens_x) <= geometry.lens_aperture / 2))


def compare_pupils(geometry: DisplayGeometry, columns: Sequence[int], z: float, rays: int = DEFAULT_RAYS,
                   seed: int = 0, max_neighbors: Optional[int] = None) -> List[OracleSample]:
    '''
    Trace every column against the lenses around it and pair the results with the closed form.

    Args:
        geometry (DisplayGeometry): The display stack.
        columns (Sequence[int]): LED columns to trace.
        z (float): Distance of the plane (m).
        rays (int): Rays per bundle. Default is 100000.
        seed (int): Seed of the random generator. Default is 0.
        max_neighbors (Optional[int]): Lenses on each side of the nearest one. Default is the geometry's.

    Returns:
        List[OracleSample]: One sample per (column, lens) pair.
    '''
    rng = np.random.default_rng(seed)
    neighbors = geometry.max_neighbors if max_neighbors is None else max_neighbors
    centers = lens_centers(geometry)
    column_x = geometry.column_centers()

    samples = []
    for column in columns:
        led_x = float(column_x[column])
        primary = nearest_lens(geometry, led_x)
        for lens in range(max(primary - neighbors, 0), min(primary + neighbors, geometry.lens_count - 1) + 1):
            lens_x = float(centers[lens])
            samples.append(OracleSample(
                column=column,
                lens=lens,
                analytic_x=image_point(geometry, led_x, lens_x, z),
                traced_x=float(np.mean(trace_bundle(geometry, led_x, lens_x, z, rays, rng))),
                analytic_acceptance=acceptance(geometry, led_x, lens_x),
                traced_acceptance=traced_acceptance(geometry, led_x, lens_x, rays, rng),
            ))

    logger.info('traced %d bundles of %d rays', len(samples), rays)
    return samples


def traced_profile(geometry: DisplayGeometry, mask: LedMask, z: float, xs: Sequence[float],
                   rays_per_column: int = DEFAULT_RAYS, seed: int = 0) -> IntensityProfile:
    '''
    Histogram estimate of illumination_profile.

    Each lit column emits rays from a uniform strip blurred by the diffuser Gaussian with Lambertian angles.
    Rays crossing the lens plane inside the aperture of a lens within max_neighbors of the source's nearest
    lens are deflected and binned on the cells of xs.

    Args:
        geometry (DisplayGeometry): The display stack.
        mask (LedMask): The lit columns.
        z (float): Distance of the plane (m).
        xs (Sequence[float]): Strictly increasing sample positions (m).
        rays_per_column (int): Default is 100000.
        seed (int): Default is 0.

    Returns:
        IntensityProfile: Energy per unit length on every cell, in the units of illumination_profile.
    '''
    xs = np.asarray(xs, dtype=float).reshape(-1)
    check_grid(xs)
    check_distance(geometry, z)

    rng = np.random.default_rng(seed)
    centers = lens_centers(geometry)
    edges = cell_edges(xs)
    counts = np.zeros(xs.size)

    for column in mask.lit_columns():
        column_x = geometry.column_centers()[column]
        origin = column_x + (_stratified(rng, rays_per_column) - 0.5) * geometry.led_strip_width
        if geometry.diffuser_sigma > 0:
            origin += rng.normal(0.0, geometry.diffuser_sigma, rays_per_column)

        sines = 2 * _stratified(rng, rays_per_column) - 1
        rng.shuffle(sines)
        slope_in = sines / np.sqrt(1 - sines ** 2)
        h = origin + geometry.led_lens_gap * slope_in

        lens = np.clip(np.rint(h / geometry.lens_pitch + (geometry.lens_count - 1) / 2), 0,
                       geometry.lens_count - 1).astype(np.int64)
        primary = nearest_lens(geometry, column_x)
        inside = (np.abs(h - centers[lens]) <= geometry.lens_aperture / 2) & \
                 (np.abs(lens - primary) <= geometry.max_neighbors)

        landing = h + refract(geometry, h, slope_in, centers[lens]) * z
        counts += np.histogram(landing[inside], bins=edges)[0]

    values = counts / rays_per_column / np.diff(edges)
    return IntensityProfile(z=z, xs=xs, values=values)
