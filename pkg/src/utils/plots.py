from src.display import IntensityProfile
from src.schedule import FrameSchedule, PhaseKind
from src.viewsim import SweepReport

import matplotlib
matplotlib.use('Agg')
from matplotlib.figure import Figure

import io
import logging
from typing import Sequence


logger = logging.getLogger(__name__)


def _figure_bytes(figure: Figure) -> bytes:
    buffer = io.BytesIO()
    # no timestamp in the PNG metadata
    figure.savefig(buffer, format='png', dpi=100, metadata={'Software': None})
    logger.debug('rendered a %d byte figure', buffer.tell())
    return buffer.getvalue()


def _style(ax) -> None:
    ax.grid(True, which='both', linestyle='--', linewidth=0.5, color='gray')
    ax.spines['top'].set_visible(False)
    ax.spines['right'].set_visible(False)


def profile_figure(profiles: Sequence[IntensityProfile], labels: Sequence[str]) -> bytes:
    '''
    Plot illumination profiles on one axis.

    Args:
        profiles (Sequence[IntensityProfile]): The profiles.
        labels (Sequence[str]): A legend entry per profile.

    Returns:
        bytes: The PNG image.
    '''
    figure = Figure(figsize=(8, 5))
    ax = figure.add_subplot(111)
    _style(ax)

    for profile, label in zip(profiles, labels):
        ax.plot(profile.xs * 1e3, profile.values, linewidth=1, label=label)

    ax.set_xlabel('x (mm)')
    ax.set_ylabel('relative intensity')
    ax.legend()
    return _figure_bytes(figure)


def sweep_figure(report: SweepReport) -> bytes:
    '''
    Plot the left and right signals of a sweep.
    '''
    xs = [entry.x * 1e3 for entry in report.entries]

    figure = Figure(figsize=(8, 5))
    ax = figure.add_subplot(111)
    _style(ax)

    ax.plot(xs, [entry.left_signal for entry in report.entries], color='green', linewidth=1, label='left')
    ax.plot(xs, [entry.right_signal for entry in report.entries], color='red', linewidth=1, label='right')
    ax.set_title(f'z = {report.z:.3f} m')
    ax.set_xlabel('x (mm)')
    ax.set_ylabel('perceived energy')
    ax.legend()
    return _figure_bytes(figure)


def waveform_figure(schedule: FrameSchedule) -> bytes:
    '''
    Step plot of one frame: LCD activity and the number of lit backlight columns.
    '''
    times, lit, refreshing = [0.0], [], []
    for phase in schedule.phases:
        times.append(times[-1] + phase.duration)
        lit.append(phase.mask.count())
        refreshing.append(1 if phase.kind is PhaseKind.REFRESH else 0)

    ms = [t * 1e3 for t in times]
    figure = Figure(figsize=(8, 5))
    top, bottom = figure.add_subplot(211), figure.add_subplot(212)
    for ax in (top, bottom):
        _style(ax)

    top.stairs(refreshing, ms, color='purple', linewidth=1)
    top.set_ylabel('LCD refresh')
    bottom.stairs(lit, ms, color='orange', linewidth=1)
    bottom.set_ylabel('lit columns')
    bottom.set_xlabel('t (ms)')
    return _figure_bytes(figure)
