from src.display import DisplayGeometry, Eye, LedMask, IntensityProfile, check_grid
from src.errors import NonPositiveDistance, EmptyGrid, MaskLengthMismatch, ZeroIntendedSignal

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import ndtr, ndtri

import logging
import math
from typing import List, Sequence, Tuple


logger = logging.getLogger(__name__)

_SQRT_2PI = math.sqrt(2 * math.pi)

# Widths below this are treated as zero in the closed-form kernels (m)
_NEGLIGIBLE_WIDTH = 1e-9

# Fraction of a column's emission allowed to reach another eye
DEFAULT_LEAK = 1e-4


def check_distance(geometry: DisplayGeometry, z: float) -> None:
    if not z > 0:
        raise NonPositiveDistance(f'viewing distance must be > 0, got {z}')
    if not geometry.led_lens_gap > 0:
        raise NonPositiveDistance(f'LED-lens gap must be > 0, got {geometry.led_lens_gap}')


def lens_centers(geometry: DisplayGeometry) -> np.ndarray:
    '''
    Lateral centers of the lenses: lens_count positions at lens_pitch spacing, symmetric about x = 0.

    Args:
        geometry (DisplayGeometry): The display stack.

    Returns:
        np.ndarray: The lens centers (m), increasing.
    '''
    index = np.arange(geometry.lens_count, dtype=float)
    return (index - (geometry.lens_count - 1) / 2) * geometry.lens_pitch


def nearest_lens(geometry: DisplayGeometry, x: float) -> int:
    '''
    Index of the lens whose center is nearest to x (the lower index on a tie), clipped to the array.
    '''
    position = x / geometry.lens_pitch + (geometry.lens_count - 1) / 2
    return int(min(max(math.ceil(position - 0.5), 0), geometry.lens_count - 1))


def image_point(geometry: DisplayGeometry, led_x: float, lens_x: float, z: float) -> float:
    '''
    Center of the image of a point source at (led_x, -g) formed by the lens at lens_x, on the plane z.

    The chief ray through the lens center gives the sharp image at the image distance and the center of the
    defocused ray bundle on any other plane.

    Args:
        geometry (DisplayGeometry): The display stack.
        led_x (float): Lateral position of the source (m).
        lens_x (float): Center of the imaging lens (m).
        z (float): Distance of the observation plane (m).

    Returns:
        float: The pupil center on the plane z (m).

    Raises:
        NonPositiveDistance: If z or the LED-lens gap is not positive.
    '''
    check_distance(geometry, z)
    return lens_x - (led_x - lens_x) * (z / geometry.led_lens_gap)


def acceptance(geometry: DisplayGeometry, led_x: float, lens_x: float) -> float:
    '''
    Fraction of a Lambertian line source's emission (intensity proportional to cos(theta)) that enters the
    aperture of the lens at lens_x.

    Returns:
        float: A value in [0, 1].
    '''
    g = geometry.led_lens_gap
    edges = np.array([lens_x - geometry.lens_aperture / 2, lens_x + geometry.lens_aperture / 2]) - led_x
    sines = edges / np.hypot(edges, g)
    return float((sines[1] - sines[0]) / 2)


def conjugate_pupils(geometry: DisplayGeometry, led_x: float, z: float,
                     max_neighbors: int) -> List[Tuple[float, float]]:
    '''
    The primary and conjugate exit pupils of one source on the plane z.

    One entry is produced for every lens within max_neighbors of the lens nearest the source whose aperture
    accepts some of the source's light. Consecutive pupils are lens_pitch * (1 + z/g) apart.

    Args:
        geometry (DisplayGeometry): The display stack.
        led_x (float): Lateral position of the source (m).
        z (float): Distance of the observation plane (m).
        max_neighbors (int): How many lenses to consider on each side of the nearest one.

    Returns:
        List[Tuple[float, float]]: (pupil_x, acceptance) pairs ordered by lens index.

    Raises:
        NonPositiveDistance: If z or the LED-lens gap is not positive.
    '''
    check_distance(geometry, z)
    centers = lens_centers(geometry)
    primary = nearest_lens(geometry, led_x)

    pupils = []
    for j in range(max(primary - max_neighbors, 0), min(primary + max_neighbors, geometry.lens_count - 1) + 1):
        accepted = acceptance(geometry, led_x, centers[j])
        if accepted > 0:
            pupils.append((image_point(geometry, led_x, centers[j], z), accepted))
    return pupils


def defocus_width(geometry: DisplayGeometry, z: float) -> float:
    '''
    Width of the ray bundle a point source casts through one full aperture onto the plane z.

    It vanishes on the image plane and grows linearly away from it.
    '''
    check_distance(geometry, z)
    slope = 1 + z * (1 / geometry.led_lens_gap - 1 / geometry.focal_length)
    return geometry.lens_aperture * abs(slope)


def _gauss_pdf(t: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * t * t) / _SQRT_2PI


def _step(u: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0:
        return (u >= 0).astype(float)
    return ndtr(u / sigma)


def _ramp(u: np.ndarray, sigma: float) -> np.ndarray:
    # antiderivative of _step
    if sigma <= 0:
        return np.maximum(u, 0.0)
    t = u / sigma
    return u * ndtr(t) + sigma * _gauss_pdf(t)


def _ramp2(u: np.ndarray, sigma: float) -> np.ndarray:
    # antiderivative of _ramp
    if sigma <= 0:
        return np.maximum(u, 0.0) ** 2 / 2
    t = u / sigma
    return sigma * sigma * ((t * t + 1) * ndtr(t) + t * _gauss_pdf(t)) / 2


def kernel_cdf(u: np.ndarray, strip: float, defocus: float, sigma: float) -> np.ndarray:
    '''
    Cumulative distribution of a unit-area box of width strip, convolved with a box of width defocus and a
    Gaussian of standard deviation sigma, all centered at 0.

    Args:
        u (np.ndarray): Offsets from the kernel center (m).
        strip (float): Width of the (imaged) strip source (m).
        defocus (float): Width of the defocus box (m).
        sigma (float): Standard deviation of the Gaussian blur (m).

    Returns:
        np.ndarray: Values in [0, 1].
    '''
    u = np.asarray(u, dtype=float)
    a = strip if strip > _NEGLIGIBLE_WIDTH else 0.0
    b = defocus if defocus > _NEGLIGIBLE_WIDTH else 0.0

    if a == 0 and b == 0:
        return _step(u, sigma)
    if b == 0 or a == 0:
        w = a or b
        return (_ramp(u + w / 2, sigma) - _ramp(u - w / 2, sigma)) / w

    return (
        _ramp2(u + (a + b) / 2, sigma)
        - _ramp2(u + (b - a) / 2, sigma)
        - _ramp2(u - (b - a) / 2, sigma)
        + _ramp2(u - (a + b) / 2, sigma)
    ) / (a * b)


def cell_edges(xs: np.ndarray) -> np.ndarray:
    '''
    Boundaries of the cells centered on the grid points (midpoints, ends extended by half a step).
    '''
    if xs.size == 1:
        return np.array([xs[0] - 0.5e-3, xs[0] + 0.5e-3])
    mids = (xs[1:] + xs[:-1]) / 2
    return np.concatenate(([xs[0] - (xs[1] - xs[0]) / 2], mids, [xs[-1] + (xs[-1] - xs[-2]) / 2]))


def illumination_profile(geometry: DisplayGeometry, mask: LedMask, z: float,
                         xs: Sequence[float]) -> IntensityProfile:
    '''
    Backlight intensity along the lateral line xs on the plane z for the lit columns of a mask.

    Every lit column is a strip of width led_strip_width pre-blurred by the diffuser Gaussian; it is imaged
    through each accepting lens (conjugates included), its image magnified by z/g, spread by the defocus box
    and weighted by the lens acceptance. Each sample is the average intensity over its grid cell, so the
    profile is exactly additive over disjoint masks.

    Args:
        geometry (DisplayGeometry): The display stack.
        mask (LedMask): The lit columns.
        z (float): Distance of the viewing plane (m).
        xs (Sequence[float]): Strictly increasing sample positions (m).

    Returns:
        IntensityProfile: The sampled profile.

    Raises:
        EmptyGrid: If the grid is empty or not strictly increasing.
        MaskLengthMismatch: If the mask length differs from led_column_count.
        NonPositiveDistance: If z or the LED-lens gap is not positive.
    '''
    xs = np.asarray(xs, dtype=float).reshape(-1)
    check_grid(xs)
    check_distance(geometry, z)
    if len(mask) != geometry.led_column_count:
        raise MaskLengthMismatch(f'mask has {len(mask)} columns, geometry has {geometry.led_column_count}')

    magnification = z / geometry.led_lens_gap
    strip = geometry.led_strip_width * magnification
    sigma = geometry.diffuser_sigma * magnification
    defocus = defocus_width(geometry, z)

    edges = cell_edges(xs)
    widths = np.diff(edges)
    values = np.zeros_like(xs)

    centers = geometry.column_centers()
    for column in mask.lit_columns():
        for pupil_x, accepted in conjugate_pupils(geometry, centers[column], z, geometry.max_neighbors):
            cdf = kernel_cdf(edges - pupil_x, strip, defocus, sigma)
            values += accepted * np.diff(cdf) / widths

    return IntensityProfile(z=z, xs=xs, values=np.maximum(values, 0.0))


def column_targets(geometry: DisplayGeometry, eye: Eye) -> np.ndarray:
    '''
    For each lens, the LED-plane position whose image through that lens lands on the eye.

    Returns:
        np.ndarray: lens_count positions (m).
    '''
    check_distance(geometry, eye.z)
    centers = lens_centers(geometry)
    return centers - (eye.x - centers) * (geometry.led_lens_gap / eye.z)


def _target_columns(geometry: DisplayGeometry, eye: Eye) -> List[Tuple[int, int, float]]:
    '''
    (lens, column, residual) for every lens that can light the eye from a physical column.
    '''
    pitch = geometry.led_pitch
    first = geometry.column_centers()[0]
    reach = (geometry.max_neighbors + 0.5) * geometry.lens_pitch
    centers = lens_centers(geometry)

    found = []
    for lens, target in enumerate(column_targets(geometry, eye)):
        # lower index on a tie
        column = math.ceil((target - first) / pitch - 0.5)
        if not 0 <= column < geometry.led_column_count:
            continue

        residual = target - (first + column * pitch)
        if abs(residual) > pitch / 2 * (1 + 1e-12):
            continue
        if abs(first + column * pitch - centers[lens]) > reach:
            continue
        found.append((lens, column, residual))
    return found


def select_columns(geometry: DisplayGeometry, eye: Eye) -> LedMask:
    '''
    The backlight columns that form exit pupils at the eye.

    For each lens the source position imaged onto the eye is computed and the nearest physical column is lit
    when it lies within half a pitch of that position and within the lens's acceptance window.

    Args:
        geometry (DisplayGeometry): The display stack.
        eye (Eye): The tracked eye.

    Returns:
        LedMask: The selected columns.

    Raises:
        NonPositiveDistance: If the eye distance or the LED-lens gap is not positive.
    '''
    columns = [column for _, column, _ in _target_columns(geometry, eye)]
    mask = LedMask.from_columns(geometry.led_column_count, columns)

    logger.debug('eye (%.4f, %.4f): %d columns selected', eye.x, eye.z, mask.count())
    return mask


def forbidden_columns(geometry: DisplayGeometry, other_eyes: Sequence[Eye], margin: float) -> LedMask:
    '''
    Region X: the columns that must stay dark while other viewers are not being served.

    Args:
        geometry (DisplayGeometry): The display stack.
        other_eyes (Sequence[Eye]): The eyes that must not receive light.
        margin (float): Extra dark margin on each side (m), rounded up to whole columns.

    Returns:
        LedMask: The union of the eyes' selections dilated by ceil(margin / led_pitch) columns.
    '''
    if margin < 0:
        raise ValueError(f'margin must be >= 0, got {margin}')

    forbidden = LedMask.off(geometry.led_column_count)
    for eye in other_eyes:
        forbidden = forbidden | select_columns(geometry, eye)

    return forbidden.dilated(math.ceil(margin / geometry.led_pitch - 1e-9))


def leaking_columns(geometry: DisplayGeometry, other_eyes: Sequence[Eye], leak: float = DEFAULT_LEAK) -> LedMask:
    '''
    Columns whose diffused strip sends more than a fraction leak of its emission towards one of the eyes.

    Through every lens the eye sees an interval of the LED plane, bounded by the sources imaged through the
    two aperture edges. A column is marked when its center lies within led_strip_width / 2 plus the Gaussian
    tail distance sigma * |ndtri(leak)| of such an interval.

    Args:
        geometry (DisplayGeometry): The display stack.
        other_eyes (Sequence[Eye]): The eyes that must not receive light.
        leak (float): Admitted fraction of a column's emission, in (0, 1). Default is 1e-4.

    Returns:
        LedMask: The marked columns.

    Raises:
        ValueError: If leak is outside (0, 1).
        NonPositiveDistance: If an eye distance or the LED-lens gap is not positive.
    '''
    if not 0 < leak < 1:
        raise ValueError(f'leak must be in (0, 1), got {leak}')

    g, f = geometry.led_lens_gap, geometry.focal_length
    reach = geometry.led_strip_width / 2 + geometry.diffuser_sigma * max(-float(ndtri(leak)), 0.0)
    centers = geometry.column_centers()
    lenses = lens_centers(geometry)
    edges = np.stack([lenses - geometry.lens_aperture / 2, lenses + geometry.lens_aperture / 2])

    marked = np.zeros(geometry.led_column_count, dtype=bool)
    for eye in other_eyes:
        check_distance(geometry, eye.z)
        # source imaged through each aperture edge onto the eye
        sources = edges - (eye.x - edges) * (g / eye.z) - (edges - lenses) * (g / f)
        lo, hi = sources.min(axis=0), sources.max(axis=0)
        outside = np.maximum(lo[None, :] - centers[:, None], centers[:, None] - hi[None, :])
        marked |= np.any(outside <= reach, axis=1)

    return LedMask(marked)


def assign_zones(geometry: DisplayGeometry, eyes: Sequence[Eye], guard_columns: int = 0) -> List[LedMask]:
    '''
    Eye-tracked view zones: every column near a lens target is given to the eye whose target is nearest.

    A column is considered when its distance to the nearest target (of any eye) is at most a quarter of the
    median spacing between neighbouring targets; columns equidistant from two eyes stay dark. The guard band
    then switches off zone columns lying within guard_columns of another eye's zone. The column selected for an
    eye by select_columns is never switched off.

    Args:
        geometry (DisplayGeometry): The display stack.
        eyes (Sequence[Eye]): The eyes to serve.
        guard_columns (int): Width of the guard band in columns. Default is 0.

    Returns:
        List[LedMask]: One zone mask per eye, in the order of the eyes.
    '''
    if guard_columns < 0:
        raise ValueError(f'guard_columns must be >= 0, got {guard_columns}')

    n = geometry.led_column_count
    centers = geometry.column_centers()
    targets = [
        np.array([centers[column] + residual for _, column, residual in _target_columns(geometry, eye)])
        for eye in eyes
    ]

    every = np.unique(np.concatenate([t for t in targets if t.size] or [np.empty(0)]))
    if every.size == 0:
        return [LedMask.off(n) for _ in eyes]
    reach = np.median(np.diff(every)) / 4 if every.size > 1 else np.inf

    distances = np.full((len(eyes), n), np.inf)
    for e, t in enumerate(targets):
        if t.size:
            distances[e] = np.min(np.abs(centers[:, None] - t[None, :]), axis=1)

    best = np.min(distances, axis=0)
    owners = np.argmin(distances, axis=0)
    tied = np.sum(np.isclose(distances, best[None, :], rtol=0, atol=1e-12 * geometry.led_pitch), axis=0) > 1
    usable = (best <= reach * (1 + 1e-9)) & ~tied

    zones = [usable & (owners == e) for e in range(len(eyes))]
    cores = [select_columns(geometry, eye).bits for eye in eyes]

    masks = []
    for e, zone in enumerate(zones):
        others = LedMask(np.logical_or.reduce([z for k, z in enumerate(zones) if k != e] or [np.zeros(n, bool)]))
        near_other = others.dilated(guard_columns).bits if guard_columns else np.zeros(n, bool)
        masks.append(LedMask((zone & ~near_other) | cores[e]))
    return masks


def crosstalk_ratio(intended: IntensityProfile, unintended: IntensityProfile, eye_x: float,
                    window: float) -> float:
    '''
    Unintended over intended energy inside a window centered on the eye.

    Args:
        intended (IntensityProfile): Light meant for the eye.
        unintended (IntensityProfile): Light meant for anyone else.
        eye_x (float): Lateral eye position (m).
        window (float): Width of the integration window (m).

    Returns:
        float: The crosstalk fraction.

    Raises:
        EmptyGrid: If the profiles do not share their plane and grid.
        ZeroIntendedSignal: If the intended energy in the window is below 1e-15 of the profile's total.
    '''
    if not window > 0:
        raise ValueError(f'window must be > 0, got {window}')
    if intended.z != unintended.z or not np.array_equal(intended.xs, unintended.xs):
        raise EmptyGrid('profiles must share their plane and grid')

    xs = intended.xs
    lo, hi = eye_x - window / 2, eye_x + window / 2
    inside = xs[(xs > lo) & (xs < hi)]
    sub = np.concatenate(([lo], inside, [hi]))

    def integrate(profile: IntensityProfile) -> float:
        return float(trapezoid(np.interp(sub, xs, profile.values, left=0.0, right=0.0), sub))

    wanted = integrate(intended)
    total = float(trapezoid(intended.values, xs)) if xs.size > 1 else float(intended.values.sum())
    if total <= 0 or wanted < 1e-15 * total:
        raise ZeroIntendedSignal(f'no intended signal around x = {eye_x:.6f} m')

    return integrate(unintended) / wanted
