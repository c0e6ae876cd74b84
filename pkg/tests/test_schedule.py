from src.display import LedMask
from src.errors import BadViewCount, EmptyMaskList, MaskLengthMismatch
from src.schedule import (
    BacklightDuringRefresh,
    FrameSchedule,
    LcdActivity,
    NonPositiveDuration,
    PeriodMismatch,
    Phase,
    PhaseKind,
    RegionXLit,
    ScheduleMode,
    ViewCoverage,
    build_schedule,
    effective_view_rate,
    schedule_trace,
    state_at,
    validate,
)

import numpy as np
import pytest


COLUMNS = 96


def masks(*columns):
    return [LedMask.from_columns(COLUMNS, c) for c in columns]


@pytest.fixture
def stereo() -> FrameSchedule:
    return build_schedule(ScheduleMode.PER_EYE, masks([10, 16], [13, 19]), 240.0)


def test_per_eye_schedule(stereo):
    assert stereo.view_count == 2
    assert stereo.frame_period == pytest.approx(1 / 120)
    assert [p.kind for p in stereo.phases] == [PhaseKind.REFRESH, PhaseKind.ILLUMINATE] * 2
    assert [p.view_id for p in stereo.phases] == [0, 0, 1, 1]
    assert sum(p.duration for p in stereo.phases) == pytest.approx(stereo.frame_period, rel=1e-12)
    assert effective_view_rate(stereo) == 120.0
    assert not any(p.mask.any() for p in stereo.phases if p.kind is PhaseKind.REFRESH)


def test_single_view_duty_cycle():
    schedule = build_schedule(ScheduleMode.PER_VIEWER, masks([5]), 240.0, refresh_fraction=0.5)
    refresh, illuminate = schedule.phases
    assert refresh.duration == pytest.approx(illuminate.duration)
    assert illuminate.duration / schedule.frame_period == pytest.approx(0.5)


def test_three_viewers_share_the_rate():
    schedule = build_schedule(ScheduleMode.PER_VIEWER, masks([1], [2], [3]), 240.0)
    assert len(schedule.phases) == 6
    assert schedule.frame_period == pytest.approx(0.0125)
    assert effective_view_rate(schedule) == pytest.approx(80.0)


def test_effective_rate_without_field_rate(stereo):
    bare = FrameSchedule(stereo.mode, stereo.view_count, stereo.phases, stereo.frame_period)
    assert effective_view_rate(bare) == pytest.approx(120.0)


@pytest.mark.parametrize('mode, view_masks, error', [
    (ScheduleMode.PER_VIEWER, [], EmptyMaskList),
    (ScheduleMode.PER_EYE, masks([1], [2], [3]), BadViewCount),
    (ScheduleMode.PER_EYE, masks([1]), BadViewCount),
    (ScheduleMode.PER_VIEWER, [LedMask.off(4), LedMask.off(5)], MaskLengthMismatch),
])
def test_build_errors(mode, view_masks, error):
    with pytest.raises(error):
        build_schedule(mode, view_masks, 240.0)


@pytest.mark.parametrize('rate, fraction', [(0.0, 0.25), (240.0, 0.0), (240.0, 1.0)])
def test_build_rejects_bad_timing(rate, fraction):
    with pytest.raises(ValueError):
        build_schedule(ScheduleMode.PER_VIEWER, masks([1]), rate, fraction)


def test_state_at_is_right_continuous(stereo):
    starts = stereo.phase_starts()

    first = state_at(stereo, 0.0)
    assert first.phase_index == 0
    assert first.lcd_state.activity is LcdActivity.REFRESHING
    assert not first.mask.any()

    assert state_at(stereo, starts[1] * (1 - 1e-9)).phase_index == 0
    assert state_at(stereo, starts[1]).phase_index == 1
    assert state_at(stereo, starts[1]).mask == stereo.phases[1].mask
    assert str(state_at(stereo, starts[3]).lcd_state) == 'holding(1)'


def test_state_at_is_periodic(stereo, rng):
    period = stereo.frame_period
    starts = np.array(stereo.phase_starts() + [period])

    times = rng.uniform(0.0, period, 200)
    times = times[np.min(np.abs(times[:, None] - starts[None, :]), axis=1) > 1e-9]
    for t in times:
        for cycle in (1, 5):
            assert state_at(stereo, t + cycle * period).phase_index == state_at(stereo, t).phase_index


def test_state_at_rejects_negative_time(stereo):
    with pytest.raises(ValueError):
        state_at(stereo, -1e-3)


def test_backlight_is_dark_whenever_the_lcd_refreshes(stereo):
    for event in schedule_trace(stereo, cycles=3).events:
        if event.lcd_state.activity is LcdActivity.REFRESHING:
            assert not event.mask.any()


def test_built_schedule_is_valid(stereo):
    assert validate(stereo) == []


def replace_phase(schedule, index, **changes):
    phases = list(schedule.phases)
    old = phases[index]
    phases[index] = Phase(
        changes.get('kind', old.kind),
        changes.get('view_id', old.view_id),
        changes.get('duration', old.duration),
        changes.get('mask', old.mask),
    )
    return FrameSchedule(schedule.mode, schedule.view_count, tuple(phases), schedule.frame_period)


def test_lit_refresh_is_reported(stereo):
    broken = replace_phase(stereo, 0, mask=LedMask.from_columns(COLUMNS, [3]))
    assert validate(broken) == [BacklightDuringRefresh(0)]


def random_schedule(rng):
    mode = ScheduleMode.PER_EYE if rng.random() < 0.5 else ScheduleMode.PER_VIEWER
    views = 2 if mode is ScheduleMode.PER_EYE else int(rng.integers(1, 7))
    bits = rng.random((views, COLUMNS)) < rng.uniform(0.0, 0.5)
    return build_schedule(mode, [LedMask(b) for b in bits], float(rng.uniform(60.0, 480.0)),
                          float(rng.uniform(0.01, 0.99)))


def test_random_schedules_are_valid_until_a_refresh_is_lit(rng):
    for _ in range(1000):
        schedule = random_schedule(rng)
        assert validate(schedule) == []

        refreshes = [i for i, p in enumerate(schedule.phases) if p.kind is PhaseKind.REFRESH]
        index = int(rng.choice(refreshes))
        column = int(rng.integers(COLUMNS))
        broken = replace_phase(schedule, index, mask=LedMask.from_columns(COLUMNS, [column]))
        assert validate(broken) == [BacklightDuringRefresh(index)]


def test_every_lit_refresh_bit_is_reported():
    schedule = build_schedule(ScheduleMode.PER_VIEWER, masks([1], [2], [3]), 240.0)
    for index, phase in enumerate(schedule.phases):
        if phase.kind is not PhaseKind.REFRESH:
            continue
        for column in range(COLUMNS):
            broken = replace_phase(schedule, index, mask=LedMask.from_columns(COLUMNS, [column]))
            assert validate(broken) == [BacklightDuringRefresh(index)]


def test_durations_are_checked(stereo):
    broken = replace_phase(stereo, 1, duration=0.0)
    violations = validate(broken)
    assert NonPositiveDuration(1, 0.0) in violations
    assert any(isinstance(v, PeriodMismatch) for v in violations)


def test_view_coverage_is_checked(stereo):
    broken = replace_phase(stereo, 3, view_id=0)
    violations = validate(broken)
    assert ViewCoverage(0, 1, 2) in violations
    assert ViewCoverage(1, 1, 0) in violations


def test_region_x_is_checked(stereo):
    forbidden = [(0, LedMask.from_columns(COLUMNS, [13, 16, 40]))]
    assert validate(stereo, forbidden) == [RegionXLit(0, 16)]
    assert validate(stereo, [(1, LedMask.from_columns(COLUMNS, [10, 16]))]) == []


def test_region_x_check_is_sound(rng):
    for _ in range(50):
        bits = rng.random((2, COLUMNS)) < 0.3
        forbidden = rng.random(COLUMNS) < 0.3
        bits &= ~forbidden
        schedule = build_schedule(ScheduleMode.PER_EYE, [LedMask(b) for b in bits], 240.0)
        region = [(0, LedMask(forbidden)), (1, LedMask(forbidden))]
        assert validate(schedule, region) == []

        column = int(np.flatnonzero(forbidden)[0])
        bits[1, column] = True
        schedule = build_schedule(ScheduleMode.PER_EYE, [LedMask(b) for b in bits], 240.0)
        assert validate(schedule, region) == [RegionXLit(1, column)]


def test_trace_cycles(stereo):
    trace = schedule_trace(stereo, cycles=2)
    assert len(trace.events) == 8
    assert trace.led_column_count == COLUMNS
    for first, second in zip(trace.events[:4], trace.events[4:]):
        assert second.time == pytest.approx(first.time + stereo.frame_period, abs=1e-15)
        assert second.mask == first.mask
        assert second.lcd_state == first.lcd_state

    times = [event.time for event in trace.events]
    assert times == sorted(times) and len(set(times)) == len(times)

    with pytest.raises(ValueError):
        schedule_trace(stereo, cycles=0)
