from src.display import DisplayGeometry, Eye, EyeSide, LedMask, IntensityProfile, Viewer, DEFAULT_IPD
from src.errors import DimensionMismatch, EmptyRange, FrameCountMismatch
from src.interleaver import (
    InterleavePattern,
    PanelFrame,
    ViewImage,
    LEFT_LABEL,
    RIGHT_LABEL,
    interleave_frame,
    single_view_frame,
)
from src.optics import (
    DEFAULT_LEAK,
    assign_zones,
    check_distance,
    crosstalk_ratio,
    forbidden_columns,
    leaking_columns,
    lens_centers,
    select_columns,
)
from src.schedule import FrameSchedule, PhaseKind, ScheduleMode

import numpy as np
from scipy.special import ndtr

from dataclasses import dataclass
from enum import Enum
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple


logger = logging.getLogger(__name__)

DEFAULT_GAP_THRESHOLD = 0.1
DEFAULT_MIX_THRESHOLD = 0.5

# Default sweep: x in [-0.2, 0.2] m every 1 mm
DEFAULT_SWEEP_RANGE = (-0.2, 0.2)
DEFAULT_SWEEP_STEP = 1e-3

# Samples per crosstalk window
_WINDOW_SAMPLES = 41


class ViewClass(Enum):
    LEFT = 'left'
    RIGHT = 'right'
    GAP = 'gap'
    MIXED = 'mixed'


@dataclass(frozen=True)
class SweepEntry:
    x: float
    view_class: ViewClass
    left_signal: float
    right_signal: float


@dataclass(frozen=True)
class Band:
    '''
    A run of equally classified sweep entries; its edges lie half a step outside the first and last entry.
    '''
    view_class: ViewClass
    x_start: float
    x_end: float

    @property
    def width(self) -> float:
        return self.x_end - self.x_start


@dataclass(frozen=True)
class SweepReport:
    z: float
    step: float
    entries: Tuple[SweepEntry, ...]
    bands: Tuple[Band, ...]


@dataclass(frozen=True)
class EyeCrosstalk:
    viewer_id: int
    side: EyeSide
    x: float
    crosstalk: float


@dataclass(frozen=True)
class MaskPlan:
    '''
    Backlight masks of a schedule together with the columns each view must keep dark.

    Attributes:
        masks (List[LedMask]): One mask per view.
        forbidden (List[Tuple[int, LedMask]]): (view_id, region X) pairs for validate.
    '''
    masks: List[LedMask]
    forbidden: List[Tuple[int, LedMask]]


def _emission(geometry: DisplayGeometry, mask: LedMask, x_led: np.ndarray) -> np.ndarray:
    '''
    Diffused radiance of the lit columns at LED-plane positions: unit-height strips blurred by the diffuser.
    '''
    p, w, sigma = geometry.led_pitch, geometry.led_strip_width, geometry.diffuser_sigma
    first = geometry.column_centers()[0]
    radius = math.ceil((w / 2 + 8 * sigma) / p) + 1

    nearest = np.rint((x_led - first) / p).astype(np.int64)
    total = np.zeros_like(x_led)
    for offset in range(-radius, radius + 1):
        column = nearest + offset
        valid = (column >= 0) & (column < geometry.led_column_count)
        lit = np.zeros_like(valid)
        lit[valid] = mask.bits[column[valid]]

        u = x_led - (first + column * p)
        if sigma > 0:
            value = ndtr((u + w / 2) / sigma) - ndtr((u - w / 2) / sigma)
        else:
            value = (np.abs(u) <= w / 2).astype(float)
        total += np.where(lit, value, 0.0)

    return total


def perceived_weights(geometry: DisplayGeometry, eye: Eye, mask: LedMask) -> np.ndarray:
    '''
    How brightly the eye sees every panel sub-pixel column lit from behind by the mask.

    The ray from the eye to a sub-pixel column (panel and lens array share the plane z = 0) is refracted by
    the covering lens and followed back to the LED plane; the weight is the diffused emission there.

    Args:
        geometry (DisplayGeometry): The display stack.
        eye (Eye): The observing eye.
        mask (LedMask): The lit backlight columns.

    Returns:
        np.ndarray: One non-negative weight per sub-pixel column.

    Raises:
        NonPositiveDistance: If the eye distance or the LED-lens gap is not positive.
    '''
    check_distance(geometry, eye.z)
    xs = geometry.subpixel_centers()
    if not mask.any():
        return np.zeros_like(xs)

    centers = lens_centers(geometry)
    index = np.rint(xs / geometry.lens_pitch + (geometry.lens_count - 1) / 2).astype(np.int64)
    index = np.clip(index, 0, geometry.lens_count - 1)
    height = xs - centers[index]
    covered = np.abs(height) <= geometry.lens_aperture / 2

    slope_out = (eye.x - xs) / eye.z
    slope_in = slope_out + height / geometry.focal_length
    x_led = xs - slope_in * geometry.led_lens_gap

    return np.where(covered, _emission(geometry, mask, x_led), 0.0)


def _check_frames(geometry: DisplayGeometry, schedule: FrameSchedule, frames: Sequence[PanelFrame]) -> None:
    illuminations = sum(phase.kind is PhaseKind.ILLUMINATE for phase in schedule.phases)
    if len(frames) != illuminations:
        raise FrameCountMismatch(f'{len(frames)} frames for {illuminations} illuminate phases')
    for frame in frames:
        if frame.image.width != geometry.subpixel_columns:
            raise DimensionMismatch(
                f'frame width {frame.image.width} != panel sub-pixel columns {geometry.subpixel_columns}'
            )


def _illuminations(schedule: FrameSchedule, frames: Sequence[PanelFrame]):
    frames = iter(frames)
    for phase in schedule.phases:
        if phase.kind is PhaseKind.ILLUMINATE:
            yield phase, next(frames)


def render_perceived(geometry: DisplayGeometry, schedule: FrameSchedule, frames: Sequence[PanelFrame],
                     eye: Eye) -> ViewImage:
    '''
    The image an eye integrates over one frame.

    Every Illuminate phase adds its duration times the perceived weights times its panel frame; Refresh
    phases add nothing. The sum is left unnormalized, so it scales linearly with the phase durations.

    Args:
        geometry (DisplayGeometry): The display stack.
        schedule (FrameSchedule): The schedule.
        frames (Sequence[PanelFrame]): One panel frame per Illuminate phase, in order.
        eye (Eye): The observing eye.

    Returns:
        ViewImage: The integrated image on the panel grid (intensity times seconds).

    Raises:
        FrameCountMismatch: If the number of frames differs from the number of Illuminate phases.
    '''
    _check_frames(geometry, schedule, frames)

    total = np.zeros_like(frames[0].image.samples) if frames else None
    for phase, frame in _illuminations(schedule, frames):
        weights = perceived_weights(geometry, eye, phase.mask)
        total += phase.duration * weights[None, :] * frame.image.samples

    if total is None:
        raise FrameCountMismatch('a schedule without illuminate phases renders nothing')
    return ViewImage(total)


def _column_sums(frame: PanelFrame) -> Dict[int, np.ndarray]:
    samples, labels = frame.image.samples, frame.labels
    return {
        label: np.sum(np.where(labels == label, samples, 0.0), axis=0)
        for label in (LEFT_LABEL, RIGHT_LABEL)
    }


def phase_energies(geometry: DisplayGeometry, schedule: FrameSchedule, frames: Sequence[PanelFrame],
                   eye: Eye) -> List[Dict[int, float]]:
    '''
    Energy the eye receives in every Illuminate phase, split by the source eye label of the sub-pixels.

    Returns:
        List[Dict[int, float]]: Per Illuminate phase, {LEFT_LABEL: energy, RIGHT_LABEL: energy}.
    '''
    _check_frames(geometry, schedule, frames)

    energies = []
    for phase, frame in _illuminations(schedule, frames):
        weights = perceived_weights(geometry, eye, phase.mask)
        sums = _column_sums(frame)
        energies.append({label: phase.duration * float(weights @ s) for label, s in sums.items()})
    return energies


def _sweep_positions(x_range: Tuple[float, float], step: float) -> np.ndarray:
    lo, hi = x_range
    if not step > 0 or hi < lo:
        raise EmptyRange(f'cannot sweep [{lo}, {hi}] with step {step}')
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def classify(left: float, right: float, peak: float, gap_threshold: float, mix_threshold: float) -> ViewClass:
    strong, weak = max(left, right), min(left, right)
    if peak <= 0 or strong < gap_threshold * peak:
        return ViewClass.GAP
    if weak / strong > mix_threshold:
        return ViewClass.MIXED
    return ViewClass.LEFT if left >= right else ViewClass.RIGHT


def merge_bands(entries: Sequence[SweepEntry], step: float) -> Tuple[Band, ...]:
    bands: List[Band] = []
    for entry in entries:
        if bands and bands[-1].view_class is entry.view_class:
            bands[-1] = Band(entry.view_class, bands[-1].x_start, entry.x + step / 2)
        else:
            bands.append(Band(entry.view_class, entry.x - step / 2, entry.x + step / 2))
    return tuple(bands)


def sweep_viewing_plane(geometry: DisplayGeometry, schedule: FrameSchedule, frames: Sequence[PanelFrame],
                        z: float, x_range: Tuple[float, float] = DEFAULT_SWEEP_RANGE,
                        step: float = DEFAULT_SWEEP_STEP, gap_threshold: float = DEFAULT_GAP_THRESHOLD,
                        mix_threshold: float = DEFAULT_MIX_THRESHOLD) -> SweepReport:
    '''
    Walk an eye across the viewing plane and classify what it sees at every position.

    At each x the left and right signals are the energies received from left- and right-labelled
    sub-pixels over the frame. A position is a Gap when its stronger signal is below gap_threshold times the
    strongest signal of the sweep, Mixed when the weaker one exceeds mix_threshold times the stronger one,
    and otherwise the dominant view.

    Args:
        geometry (DisplayGeometry): The display stack.
        schedule (FrameSchedule): The schedule.
        frames (Sequence[PanelFrame]): One panel frame per Illuminate phase.
        z (float): Distance of the viewing plane (m).
        x_range (Tuple[float, float]): First and last position (m). Default is (-0.2, 0.2).
        step (float): Spacing of the positions (m). Default is 1 mm.
        gap_threshold (float): Default is 0.1.
        mix_threshold (float): Default is 0.5.

    Returns:
        SweepReport: The classified entries and their bands.

    Raises:
        EmptyRange: If step is not positive or the range is reversed.
    '''
    if not 0 < gap_threshold < 1 or not 0 < mix_threshold <= 1:
        raise ValueError(f'bad thresholds: gap {gap_threshold}, mix {mix_threshold}')

    xs = _sweep_positions(x_range, step)
    _check_frames(geometry, schedule, frames)

    illuminated = list(_illuminations(schedule, frames))
    sums = [_column_sums(frame) for _, frame in illuminated]

    signals = np.zeros((xs.size, 2))
    for i, x in enumerate(xs):
        eye = Eye(float(x), z)
        for (phase, _), s in zip(illuminated, sums):
            weights = perceived_weights(geometry, eye, phase.mask)
            signals[i, 0] += phase.duration * float(weights @ s[LEFT_LABEL])
            signals[i, 1] += phase.duration * float(weights @ s[RIGHT_LABEL])

    peak = float(signals.max()) if signals.size else 0.0
    entries = tuple(
        SweepEntry(float(x), classify(left, right, peak, gap_threshold, mix_threshold), float(left), float(right))
        for x, (left, right) in zip(xs, signals)
    )
    bands = merge_bands(entries, step)

    logger.info('sweep at z = %.3f m: %d positions, %d bands', z, len(entries), len(bands))
    return SweepReport(z=z, step=step, entries=entries, bands=bands)


def _owned_views(schedule: FrameSchedule, viewer_index: int, side: EyeSide) -> List[int]:
    if schedule.mode is ScheduleMode.PER_EYE:
        return [0 if side is EyeSide.LEFT else 1] if viewer_index == 0 else []
    return [viewer_index]


def schedule_frames(schedule: FrameSchedule, left: ViewImage, right: ViewImage,
                    pattern: Optional[InterleavePattern] = None,
                    panel_width: Optional[int] = None) -> List[PanelFrame]:
    '''
    The panel frame of every Illuminate phase for a stereo pair.

    In per-eye mode the left field shows the full left view and the right field the full right view; in
    per-viewer mode every field shows the interleaved pair, the pattern shifted by the field index.

    Args:
        schedule (FrameSchedule): The schedule.
        left (ViewImage): The left view.
        right (ViewImage): The right view.
        pattern (Optional[InterleavePattern]): The column assignment. Default is InterleavePattern().
        panel_width (Optional[int]): Sub-pixel columns of the panel. Default is twice the view width.

    Returns:
        List[PanelFrame]: One frame per Illuminate phase.
    '''
    pattern = pattern or InterleavePattern()

    frames = []
    for index, phase in enumerate(p for p in schedule.phases if p.kind is PhaseKind.ILLUMINATE):
        if schedule.mode is ScheduleMode.PER_EYE:
            side = EyeSide.LEFT if phase.view_id == 0 else EyeSide.RIGHT
            frames.append(single_view_frame(left if side is EyeSide.LEFT else right, side, panel_width))
        else:
            frames.append(interleave_frame(left, right, pattern, index, panel_width))
    return frames


def crosstalk_report(geometry: DisplayGeometry, schedule: FrameSchedule, viewers: Sequence[Viewer],
                     frames: Optional[Sequence[PanelFrame]] = None, window: float = DEFAULT_IPD / 2,
                     pattern: Optional[InterleavePattern] = None) -> List[EyeCrosstalk]:
    '''
    Crosstalk of every eye: unintended over intended energy in a window centered on the eye.

    Intended light is what the eye receives during the phases that serve it: its own field in per-eye mode,
    its viewer's field in per-viewer mode. Light received during every other phase is unintended. Eyes no
    phase serves (every viewer after the first in per-eye mode) are left out.

    Args:
        geometry (DisplayGeometry): The display stack.
        schedule (FrameSchedule): The schedule. View k is eye k of viewer 0 in per-eye mode, viewer k otherwise.
        viewers (Sequence[Viewer]): The viewers, in view order.
        frames (Optional[Sequence[PanelFrame]]): The panel frames. Default is uniform white.
        window (float): Width of the integration window (m). Default is half the default IPD.
        pattern (Optional[InterleavePattern]): Pattern of the default per-viewer frames.

    Returns:
        List[EyeCrosstalk]: One entry per served eye, left before right, viewers in order.

    Raises:
        ZeroIntendedSignal: If a served eye receives no intended light.
    '''
    if not viewers:
        raise ValueError('at least one viewer is required')
    if frames is None:
        white = ViewImage.constant(geometry.subpixel_columns // 2, 1)
        frames = schedule_frames(schedule, white, white, pattern, geometry.subpixel_columns)
    _check_frames(geometry, schedule, frames)

    illuminated = list(_illuminations(schedule, frames))
    sums = [_column_sums(frame) for _, frame in illuminated]

    report = []
    for viewer_index, viewer in enumerate(viewers):
        for eye in viewer.eyes:
            owned = _owned_views(schedule, viewer_index, eye.side)
            if not owned:
                logger.info('viewer %d %s eye is not served by the schedule, skipped',
                            viewer.viewer_id, eye.side.value)
                continue

            xs = eye.x + np.linspace(-window / 2, window / 2, _WINDOW_SAMPLES)
            intended, unintended = np.zeros_like(xs), np.zeros_like(xs)
            for i, x in enumerate(xs):
                at = Eye(float(x), eye.z, eye.side, eye.viewer_id)
                for (phase, _), s in zip(illuminated, sums):
                    weights = perceived_weights(geometry, at, phase.mask)
                    energy = phase.duration * float(weights @ (s[LEFT_LABEL] + s[RIGHT_LABEL]))
                    if phase.view_id in owned:
                        intended[i] += energy
                    else:
                        unintended[i] += energy

            ratio = crosstalk_ratio(
                IntensityProfile(eye.z, xs, intended),
                IntensityProfile(eye.z, xs, unintended),
                eye.x,
                window
            )
            report.append(EyeCrosstalk(viewer.viewer_id, eye.side, eye.x, ratio))
            logger.debug('viewer %d %s eye: crosstalk %.3g', viewer.viewer_id, eye.side.value, ratio)

    return report


def plan_masks(geometry: DisplayGeometry, viewers: Sequence[Viewer], mode: ScheduleMode, margin: float = 0.0,
               guard_columns: int = 1, clean: bool = True, leak: float = DEFAULT_LEAK) -> MaskPlan:
    '''
    Backlight masks for a schedule.

    In per-eye mode the two views are the view zones of viewer 0's eyes. In per-viewer mode view k is the
    union of viewer k's two zones. Region X of a view holds the columns selected for every eye it must not
    reach, dilated by the margin, together with the columns whose diffused light reaches such an eye above
    the leak fraction. With clean set, region X is removed from the view's mask, except for the columns
    select_columns picks for the view's own eyes: those stay lit and validate reports them.

    Args:
        geometry (DisplayGeometry): The display stack.
        viewers (Sequence[Viewer]): The tracked viewers.
        mode (ScheduleMode): The multiplexing mode.
        margin (float): Dark margin around other eyes' columns (m). Default is 0.
        guard_columns (int): Guard band between the zones of one viewer's eyes. Default is 1.
        clean (bool): Whether to switch off region X. Default is True.
        leak (float): Fraction of a column's emission admitted towards a blocked eye. Default is 1e-4.

    Returns:
        MaskPlan: The masks and the forbidden regions per view.
    '''
    if not viewers:
        raise ValueError('at least one viewer is required')

    if mode is ScheduleMode.PER_EYE:
        first, others = viewers[0], [eye for viewer in viewers[1:] for eye in viewer.eyes]
        masks = assign_zones(geometry, [first.left, first.right], guard_columns)
        served = [[first.left], [first.right]]
        blocked = [[first.right] + others, [first.left] + others]
    else:
        masks, served, blocked = [], [], []
        for k, viewer in enumerate(viewers):
            left, right = assign_zones(geometry, [viewer.left, viewer.right], guard_columns)
            masks.append(left | right)
            served.append(list(viewer.eyes))
            blocked.append([eye for j, other in enumerate(viewers) if j != k for eye in other.eyes])

    forbidden = [
        (k, forbidden_columns(geometry, eyes, margin) | leaking_columns(geometry, eyes, leak))
        for k, eyes in enumerate(blocked)
    ]

    if clean:
        cleaned = []
        for k, (mask, (_, region)) in enumerate(zip(masks, forbidden)):
            cores = LedMask.off(geometry.led_column_count)
            for eye in served[k]:
                cores = cores | select_columns(geometry, eye)
            kept = cores & region
            if kept.any():
                logger.warning('view %d: columns %s serve its own eyes but lie in region X',
                               k, kept.lit_columns())
            cleaned.append((mask & ~region) | kept)
        masks = cleaned

    logger.info('planned %d %s masks: %s lit columns', len(masks), mode.value, [m.count() for m in masks])
    return MaskPlan(masks=list(masks), forbidden=forbidden)
