from src.display import LedMask
from src.errors import BadViewCount, EmptyMaskList, MaskLengthMismatch

from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
import logging
import math
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union


logger = logging.getLogger(__name__)

# Fraction of every field spent refreshing the LCD with the backlight off
DEFAULT_REFRESH_FRACTION = 0.25

# Relative tolerance on sum(durations) == frame_period
PERIOD_TOLERANCE = 1e-12


class PhaseKind(Enum):
    REFRESH = 'refresh'
    ILLUMINATE = 'illuminate'


class ScheduleMode(Enum):
    '''
    PER_EYE serves the two eyes of one viewer in separate fields; PER_VIEWER serves both eyes of one viewer
    per field.
    '''
    PER_EYE = 'per_eye'
    PER_VIEWER = 'per_viewer'


class LcdActivity(Enum):
    REFRESHING = 'refreshing'
    HOLDING = 'holding'


@dataclass(frozen=True)
class LcdState:
    '''
    What the LCD is doing: writing the image of a view, or holding it.
    '''
    activity: LcdActivity
    view_id: int

    @property
    def code(self) -> int:
        # 2 * view + 1 while holding; the VCD encoding
        return 2 * self.view_id + (self.activity is LcdActivity.HOLDING)

    def __str__(self) -> str:
        return f'{self.activity.value}({self.view_id})'


@dataclass(frozen=True)
class Phase:
    '''
    One interval of the frame.

    Attributes:
        kind (PhaseKind): Refresh (LCD scan-out, backlight dark) or Illuminate (image held, mask lit).
        view_id (int): The view the phase belongs to.
        duration (float): Length of the phase (s).
        mask (LedMask): The lit backlight columns during the phase.
    '''
    kind: PhaseKind
    view_id: int
    duration: float
    mask: LedMask

    @property
    def lcd_state(self) -> LcdState:
        activity = LcdActivity.REFRESHING if self.kind is PhaseKind.REFRESH else LcdActivity.HOLDING
        return LcdState(activity, self.view_id)


@dataclass(frozen=True)
class FrameSchedule:
    '''
    The periodic phase sequence of one frame.

    Attributes:
        mode (ScheduleMode): How views map to eyes.
        view_count (int): N, the number of time-multiplexed views.
        phases (Tuple[Phase, ...]): The phases in time order, starting at t = 0.
        frame_period (float): Length of one frame (s).
        panel_field_rate (Optional[float]): The LCD field rate the schedule was built for (Hz), if known.
    '''
    mode: ScheduleMode
    view_count: int
    phases: Tuple[Phase, ...]
    frame_period: float
    panel_field_rate: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, 'phases', tuple(self.phases))

    def phase_starts(self) -> List[float]:
        '''
        Start time of every phase within the frame.
        '''
        starts, t = [], 0.0
        for phase in self.phases:
            starts.append(t)
            t += phase.duration
        return starts


class ScheduleState(NamedTuple):
    phase_index: int
    mask: LedMask
    lcd_state: LcdState


@dataclass(frozen=True)
class TraceEvent:
    time: float
    mask: LedMask
    lcd_state: LcdState


@dataclass(frozen=True)
class ScheduleTrace:
    '''
    Change events of a schedule over a whole number of cycles, times strictly increasing from 0.
    '''
    events: Tuple[TraceEvent, ...]
    frame_period: float
    cycles: int
    led_column_count: int


@dataclass(frozen=True)
class BacklightDuringRefresh:
    phase_index: int


@dataclass(frozen=True)
class NonPositiveDuration:
    phase_index: int
    duration: float


@dataclass(frozen=True)
class PeriodMismatch:
    total: float
    frame_period: float


@dataclass(frozen=True)
class RegionXLit:
    view_id: int
    column: int


@dataclass(frozen=True)
class ViewCoverage:
    '''
    A view that is not refreshed exactly once and illuminated exactly once per frame.
    '''
    view_id: int
    refreshes: int
    illuminations: int


Violation = Union[BacklightDuringRefresh, NonPositiveDuration, PeriodMismatch, RegionXLit, ViewCoverage]


def build_schedule(mode: ScheduleMode, masks: Sequence[LedMask], panel_field_rate: float,
                   refresh_fraction: float = DEFAULT_REFRESH_FRACTION) -> FrameSchedule:
    '''
    Build the frame schedule: for each view k in order, Refresh(k) with the backlight off, then
    Illuminate(k) with masks[k].

    Args:
        mode (ScheduleMode): PER_EYE (exactly two views) or PER_VIEWER (one view per viewer).
        masks (Sequence[LedMask]): One backlight mask per view.
        panel_field_rate (float): LCD field rate (Hz); each view gets one field.
        refresh_fraction (float): Share of each field spent refreshing. Default is 0.25.

    Returns:
        FrameSchedule: A schedule with 2N phases and frame_period = N / panel_field_rate.

    Raises:
        EmptyMaskList: If no masks are given.
        BadViewCount: If mode is PER_EYE and there are not exactly two masks.
        MaskLengthMismatch: If the masks differ in length.
        ValueError: If the rate or the refresh fraction is out of range.
    '''
    if not masks:
        raise EmptyMaskList('at least one view mask is required')
    if mode is ScheduleMode.PER_EYE and len(masks) != 2:
        raise BadViewCount(f'per-eye multiplexing needs 2 views, got {len(masks)}')
    if len({len(mask) for mask in masks}) != 1:
        raise MaskLengthMismatch(f'mask lengths differ: {sorted({len(mask) for mask in masks})}')
    if not panel_field_rate > 0:
        raise ValueError(f'panel_field_rate must be > 0, got {panel_field_rate}')
    if not 0 < refresh_fraction < 1:
        raise ValueError(f'refresh_fraction must lie in (0, 1), got {refresh_fraction}')

    field_time = 1 / panel_field_rate
    refresh_time = refresh_fraction * field_time
    illuminate_time = field_time - refresh_time
    dark = LedMask.off(len(masks[0]))

    phases = []
    for view_id, mask in enumerate(masks):
        phases.append(Phase(PhaseKind.REFRESH, view_id, refresh_time, dark))
        phases.append(Phase(PhaseKind.ILLUMINATE, view_id, illuminate_time, mask))

    schedule = FrameSchedule(
        mode=mode,
        view_count=len(masks),
        phases=tuple(phases),
        frame_period=len(masks) / panel_field_rate,
        panel_field_rate=panel_field_rate
    )

    logger.info('built %s schedule: %d views, frame period %.6g s', mode.value, len(masks), schedule.frame_period)
    return schedule


def state_at(schedule: FrameSchedule, t: float) -> ScheduleState:
    '''
    The phase in force at time t; a boundary instant belongs to the phase that starts there.

    Args:
        schedule (FrameSchedule): The schedule.
        t (float): Time since the start of the first frame (s).

    Returns:
        ScheduleState: (phase_index, mask, lcd_state).
    '''
    if t < 0:
        raise ValueError(f't must be >= 0, got {t}')

    offset = math.fmod(t, schedule.frame_period)
    index = max(bisect_right(schedule.phase_starts(), offset) - 1, 0)
    phase = schedule.phases[index]
    return ScheduleState(index, phase.mask, phase.lcd_state)


def validate(schedule: FrameSchedule, forbidden: Sequence[Tuple[int, LedMask]] = ()) -> List[Violation]:
    '''
    Check a schedule against the darkness, timing, region-X and coverage rules.

    Args:
        schedule (FrameSchedule): The schedule to check, possibly hand-built.
        forbidden (Sequence[Tuple[int, LedMask]]): (view_id, mask) pairs of columns that must stay dark
            while that view is illuminated.

    Returns:
        List[Violation]: Every violation found, empty for a sound schedule.
    '''
    violations: List[Violation] = []

    for index, phase in enumerate(schedule.phases):
        if phase.kind is PhaseKind.REFRESH and phase.mask.any():
            violations.append(BacklightDuringRefresh(index))
        if not phase.duration > 0:
            violations.append(NonPositiveDuration(index, phase.duration))

    total = math.fsum(phase.duration for phase in schedule.phases)
    if abs(total - schedule.frame_period) > PERIOD_TOLERANCE * abs(schedule.frame_period):
        violations.append(PeriodMismatch(total, schedule.frame_period))

    for view_id, mask in forbidden:
        for phase in schedule.phases:
            if phase.kind is PhaseKind.ILLUMINATE and phase.view_id == view_id:
                violations.extend(RegionXLit(view_id, int(c)) for c in (phase.mask & mask).lit_columns())

    for view_id in range(schedule.view_count):
        refreshes = sum(p.kind is PhaseKind.REFRESH and p.view_id == view_id for p in schedule.phases)
        illuminations = sum(p.kind is PhaseKind.ILLUMINATE and p.view_id == view_id for p in schedule.phases)
        if refreshes != 1 or illuminations != 1:
            violations.append(ViewCoverage(view_id, refreshes, illuminations))

    if violations:
        logger.warning('schedule has %d violation(s)', len(violations))
    return violations


def effective_view_rate(schedule: FrameSchedule) -> float:
    '''
    The content update rate each view receives (Hz): panel_field_rate / N.
    '''
    if schedule.panel_field_rate is not None:
        return schedule.panel_field_rate / schedule.view_count
    return 1 / schedule.frame_period


def schedule_trace(schedule: FrameSchedule, cycles: int = 1) -> ScheduleTrace:
    '''
    Expand a schedule into the change events of the given number of cycles.

    Args:
        schedule (FrameSchedule): The schedule.
        cycles (int): How many frames to expand. Default is 1.

    Returns:
        ScheduleTrace: One event per phase start; cycle c is cycle 0 shifted by c * frame_period.
    '''
    if cycles < 1:
        raise ValueError(f'cycles must be >= 1, got {cycles}')

    starts = schedule.phase_starts()
    events = tuple(
        TraceEvent(cycle * schedule.frame_period + start, phase.mask, phase.lcd_state)
        for cycle in range(cycles)
        for start, phase in zip(starts, schedule.phases)
    )

    columns = len(schedule.phases[0].mask) if schedule.phases else 0
    return ScheduleTrace(events, schedule.frame_period, cycles, columns)
