from src.display import LedMask
from src.errors import DimensionMismatch
from src.interleaver import ViewImage, interleave_frame
from src.optics import illumination_profile, select_columns
from src.raytrace import compare_pupils
from src.scenario import Scenario
from src.schedule import FrameSchedule, Violation, build_schedule, validate
from src.utils.export import artifact_name, csv_bytes, fmt, scenario_digest, write_atomic
from src.utils.images import pgm_bytes, ppm_bytes, read_view, sweep_strip
from src.utils.plots import profile_figure, sweep_figure, waveform_figure
from src.utils.trace_export import TraceFormat, export_trace
from src.viewsim import (
    crosstalk_report,
    plan_masks,
    render_perceived,
    schedule_frames,
    sweep_viewing_plane,
)

import numpy as np

from dataclasses import dataclass, field
from enum import IntEnum
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple


logger = logging.getLogger(__name__)

SUBCOMMANDS = ('select', 'profile', 'schedule', 'interleave', 'render', 'sweep', 'crosstalk', 'oracle')


class ExitStatus(IntEnum):
    OK = 0
    VIOLATIONS = 1
    ERROR = 2


@dataclass
class RunResult:
    '''
    Outcome of one subcommand.

    Attributes:
        status (ExitStatus): The process exit status.
        artifacts (List[Path]): Files written, in order.
        violations (List[Violation]): Schedule violations found by `schedule`.
    '''
    status: ExitStatus = ExitStatus.OK
    artifacts: List[Path] = field(default_factory=list)
    violations: List[Violation] = field(default_factory=list)


class RunManager:
    '''
    RunManager runs the simulator pipelines of one scenario and writes their artifacts.
    '''
    def __init__(self, scenario: Scenario, out_dir: Optional[Path] = None, seed: int = 0) -> None:
        '''
        Initialize the RunManager instance.

        Args:
            scenario (Scenario): The loaded scenario.
            out_dir (Optional[Path]): Artifact directory. Default is the scenario's output directory.
            seed (int): Seed of the Monte-Carlo oracle. Default is 0.
        '''
        self.scenario = scenario
        self.geometry = scenario.geometry
        self.out_dir = Path(out_dir) if out_dir is not None else scenario.output_dir
        self.seed = seed
        self.digest = scenario_digest(scenario.source)

        self._result = RunResult()

    def run(self, subcommand: str) -> RunResult:
        '''
        Run one subcommand.

        Args:
            subcommand (str): One of SUBCOMMANDS.

        Returns:
            RunResult: The status, the written artifacts and any violations.
        '''
        if subcommand not in SUBCOMMANDS:
            raise ValueError(f'unknown subcommand {subcommand!r}')

        self._result = RunResult()
        self.out_dir.mkdir(parents=True, exist_ok=True)

        logger.info('running %s into %s', subcommand, self.out_dir)
        getattr(self, f'_run_{subcommand}')()
        return self._result

    def _write(self, subcommand: str, suffix: str, data: bytes, tag: str = '') -> None:
        path = self.out_dir / artifact_name(subcommand, self.digest, suffix, tag)
        self._result.artifacts.append(write_atomic(data, path))

    def _eyes(self):
        for viewer in self.scenario.viewers:
            for eye in viewer.eyes:
                yield f'v{viewer.viewer_id}-{eye.side.value}', eye

    def views(self) -> Tuple[ViewImage, ViewImage]:
        '''
        The stereo pair: the scenario's image files, or a synthetic pair at half the panel's sub-pixel width.

        Raises:
            DimensionMismatch: If the image files do not fit the panel.
        '''
        width = self.geometry.subpixel_columns // 2
        sources = self.scenario.views

        if sources.left is not None:
            left, right = read_view(sources.left), read_view(sources.right)
            if left.width != width:
                raise DimensionMismatch(f'views must be {width} columns wide, got {left.width}')
            return left, right

        if sources.synthetic == 'white':
            white = ViewImage.constant(width, sources.height)
            return white, white

        ramp = np.tile(np.linspace(0.0, 1.0, width), (sources.height, 1))
        return ViewImage(ramp), ViewImage(ramp[:, ::-1])

    def schedule(self) -> Tuple[FrameSchedule, List[Tuple[int, LedMask]]]:
        '''
        Plan the masks and build the schedule of the scenario.

        Returns:
            Tuple[FrameSchedule, List[Tuple[int, LedMask]]]: The schedule and the forbidden regions to check.
        '''
        s = self.scenario
        plan = plan_masks(self.geometry, s.viewers, s.mode, s.margin, s.guard_columns, s.clean, s.leak)
        schedule = build_schedule(s.mode, plan.masks, self.geometry.panel_field_rate, s.refresh_fraction)

        forbidden = list(plan.forbidden)
        extra: Dict[int, List[int]] = {}
        for view, column in s.extra_forbidden:
            extra.setdefault(view, []).append(column)
        for view, columns in sorted(extra.items()):
            forbidden.append((view, LedMask.from_columns(self.geometry.led_column_count, columns)))

        return schedule, forbidden

    def _frames(self, schedule: FrameSchedule):
        left, right = self.views()
        return schedule_frames(schedule, left, right, self.scenario.pattern, self.geometry.subpixel_columns)

    def _run_select(self) -> None:
        rows = []
        for _, eye in self._eyes():
            mask = select_columns(self.geometry, eye)
            columns = ' '.join(str(c) for c in mask.lit_columns())
            rows.append((eye.viewer_id, eye.side.value, eye.x, eye.z, mask.to_hex(), columns))
        self._write('select', 'csv', csv_bytes(['viewer_id', 'side', 'x_m', 'z_m', 'mask_hex', 'columns'], rows))

    def _run_profile(self) -> None:
        settings = self.scenario.profile
        lo, hi = settings.x_range
        xs = lo + settings.step * np.arange(int(np.floor((hi - lo) / settings.step + 1e-9)) + 1)

        profiles, labels = [], []
        for tag, eye in self._eyes():
            profile = illumination_profile(self.geometry, select_columns(self.geometry, eye), settings.z, xs)
            self._write('profile', 'csv', csv_bytes(['x_m', 'intensity'], zip(profile.xs, profile.values)), tag)
            profiles.append(profile)
            labels.append(tag)

        if self.scenario.plot:
            self._write('profile', 'png', profile_figure(profiles, labels))

    def _run_schedule(self) -> None:
        schedule, forbidden = self.schedule()
        violations = validate(schedule, forbidden)

        self._write('schedule', 'csv', export_trace(schedule, self.scenario.cycles, TraceFormat.CSV))
        self._write('schedule', 'vcd', export_trace(schedule, self.scenario.cycles, TraceFormat.VCD))
        if self.scenario.plot:
            self._write('schedule', 'png', waveform_figure(schedule))

        self._result.violations = violations
        if violations:
            self._result.status = ExitStatus.VIOLATIONS

    def _run_interleave(self) -> None:
        left, right = self.views()
        fields = 2 if self.scenario.pattern.field_shift else 1
        for index in range(fields):
            frame = interleave_frame(left, right, self.scenario.pattern, index, self.geometry.subpixel_columns)
            self._write('interleave', 'pgm', pgm_bytes(frame.image), f'field{index}')

    def _run_render(self) -> None:
        schedule, _ = self.schedule()
        frames = self._frames(schedule)
        for tag, eye in self._eyes():
            image = render_perceived(self.geometry, schedule, frames, eye)
            mean = ViewImage(image.samples / schedule.frame_period)
            self._write('render', 'pgm', pgm_bytes(mean), tag)

    def _run_sweep(self) -> None:
        settings = self.scenario.sweep
        schedule, _ = self.schedule()
        report = sweep_viewing_plane(
            self.geometry,
            schedule,
            self._frames(schedule),
            settings.z,
            settings.x_range,
            settings.step,
            settings.gap_threshold,
            settings.mix_threshold
        )

        rows = ((e.x, e.view_class.value, e.left_signal, e.right_signal) for e in report.entries)
        self._write('sweep', 'csv', csv_bytes(['x_m', 'class', 'left', 'right'], rows))
        self._write('sweep', 'ppm', ppm_bytes(sweep_strip(report)))
        if self.scenario.plot:
            self._write('sweep', 'png', sweep_figure(report))

    def _run_crosstalk(self) -> None:
        schedule, _ = self.schedule()
        report = crosstalk_report(
            self.geometry,
            schedule,
            self.scenario.viewers,
            self._frames(schedule),
            self.scenario.sweep.crosstalk_window,
            self.scenario.pattern
        )

        rows = ((r.viewer_id, r.side.value, r.x, r.crosstalk) for r in report)
        self._write('crosstalk', 'csv', csv_bytes(['viewer_id', 'side', 'x_m', 'crosstalk'], rows))

    def _run_oracle(self) -> None:
        settings = self.scenario.oracle
        samples = compare_pupils(
            self.geometry,
            settings.columns,
            self.geometry.design_distance,
            settings.rays,
            self.seed
        )

        header = ['column', 'lens', 'analytic_x_m', 'traced_x_m', 'error_m', 'analytic_acceptance',
                  'traced_acceptance']
        rows = ((s.column, s.lens, s.analytic_x, s.traced_x, s.error, s.analytic_acceptance, s.traced_acceptance)
                for s in samples)
        self._write('oracle', 'csv', csv_bytes(header, rows))


def describe(violation: Violation) -> str:
    '''
    One-line human readable form of a schedule violation.
    '''
    fields_text = ', '.join(
        f'{name}={fmt(value) if isinstance(value, float) else value}' for name, value in vars(violation).items()
    )
    return f'{type(violation).__name__}({fields_text})'


def run(subcommand: str, scenario: Scenario, out_dir: Optional[Path] = None, seed: int = 0) -> RunResult:
    '''
    Run one subcommand on a scenario; see RunManager.
    '''
    return RunManager(scenario, out_dir, seed).run(subcommand)
