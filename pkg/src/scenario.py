from src.display import DisplayGeometry, Viewer, DEFAULT_IPD
from src.errors import GeometryError, ParseError, ValidationError
from src.interleaver import InterleavePattern
from src.optics import DEFAULT_LEAK
from src.schedule import ScheduleMode, DEFAULT_REFRESH_FRACTION
from src.viewsim import (
    DEFAULT_GAP_THRESHOLD,
    DEFAULT_MIX_THRESHOLD,
    DEFAULT_SWEEP_RANGE,
    DEFAULT_SWEEP_STEP,
)

from dataclasses import dataclass, field
from fractions import Fraction
import logging
from pathlib import Path
import re
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib


logger = logging.getLogger(__name__)

PRESETS = {
    'prototype': DisplayGeometry.prototype,
    'bench': DisplayGeometry.bench,
}

SYNTHETIC_VIEWS = ('gradient', 'white')


@dataclass(frozen=True)
class ViewSources:
    '''
    Where the stereo pair comes from: two image files, or a synthetic pair of the given height.
    '''
    left: Optional[Path] = None
    right: Optional[Path] = None
    synthetic: str = 'gradient'
    height: int = 16


@dataclass(frozen=True)
class ProfileSettings:
    z: float
    x_range: Tuple[float, float] = (-0.2, 0.2)
    step: float = 1e-4


@dataclass(frozen=True)
class SweepSettings:
    z: float
    x_range: Tuple[float, float] = DEFAULT_SWEEP_RANGE
    step: float = DEFAULT_SWEEP_STEP
    gap_threshold: float = DEFAULT_GAP_THRESHOLD
    mix_threshold: float = DEFAULT_MIX_THRESHOLD
    crosstalk_window: float = DEFAULT_IPD / 2


@dataclass(frozen=True)
class OracleSettings:
    rays: int = 100_000
    columns: Tuple[int, ...] = ()


@dataclass(frozen=True)
class Scenario:
    '''
    Everything one run of the simulator needs.

    Attributes:
        geometry (DisplayGeometry): The display stack.
        viewers (List[Viewer]): The tracked viewers, in view order.
        mode (ScheduleMode): The multiplexing mode.
        refresh_fraction (float): Share of each field spent refreshing.
        margin (float): Dark margin around other eyes' columns (m).
        guard_columns (int): Guard band between view zones (columns).
        leak (float): Fraction of a column's emission admitted towards an eye it must not reach.
        clean (bool): Whether region X is switched off when planning masks.
        extra_forbidden (List[Tuple[int, int]]): Additional (view, column) pairs that must stay dark.
        cycles (int): Frames written to the schedule trace.
        pattern (InterleavePattern): The sub-pixel column assignment.
        views (ViewSources): The stereo pair.
        profile (ProfileSettings): The illumination profile grid.
        sweep (SweepSettings): The viewing-plane sweep.
        oracle (OracleSettings): The ray-tracing cross-check.
        output_dir (Path): Where artifacts go.
        plot (bool): Whether PNG figures are written too.
        source (bytes): The raw scenario file, hashed into artifact names.
    '''
    geometry: DisplayGeometry
    viewers: List[Viewer]
    mode: ScheduleMode = ScheduleMode.PER_EYE
    refresh_fraction: float = DEFAULT_REFRESH_FRACTION
    margin: float = 0.0
    guard_columns: int = 1
    leak: float = DEFAULT_LEAK
    clean: bool = True
    extra_forbidden: List[Tuple[int, int]] = field(default_factory=list)
    cycles: int = 1
    pattern: InterleavePattern = field(default_factory=InterleavePattern)
    views: ViewSources = field(default_factory=ViewSources)
    profile: Optional[ProfileSettings] = None
    sweep: Optional[SweepSettings] = None
    oracle: OracleSettings = field(default_factory=OracleSettings)
    output_dir: Path = Path('out')
    plot: bool = False
    source: bytes = b''


_SECTIONS = ('geometry', 'viewers', 'schedule', 'interleave', 'views', 'profile', 'sweep', 'oracle', 'output')

_NUMBER = (int, float)


class _Section:
    '''
    Typed access to one table of the scenario; every key read is marked, leftovers are rejected.
    '''
    def __init__(self, name: str, table: Any) -> None:
        if not isinstance(table, dict):
            raise ValidationError(name, 'must be a table')
        self.name = name
        self.table = table
        self.seen = set()

    def get(self, key: str, kinds: Union[type, Tuple[type, ...]], default: Any = None,
            check: Optional[Callable[[Any], bool]] = None, reason: str = 'out of range') -> Any:
        self.seen.add(key)
        if key not in self.table:
            return default

        value = self.table[key]
        # bool is an int subclass and never a valid number here
        if isinstance(value, bool) and bool not in (kinds if isinstance(kinds, tuple) else (kinds,)):
            raise ValidationError(f'{self.name}.{key}', f'expected {_kind_name(kinds)}, got a boolean')
        if not isinstance(value, kinds):
            raise ValidationError(f'{self.name}.{key}', f'expected {_kind_name(kinds)}, got {type(value).__name__}')
        if check is not None and not check(value):
            raise ValidationError(f'{self.name}.{key}', reason)
        return value

    def finish(self) -> None:
        for key in self.table:
            if key not in self.seen:
                raise ValidationError(f'{self.name}.{key}', 'unknown key')


def _kind_name(kinds: Union[type, Tuple[type, ...]]) -> str:
    kinds = kinds if isinstance(kinds, tuple) else (kinds,)
    return ' or '.join(kind.__name__ for kind in kinds)


def _positive(value: float) -> bool:
    return value > 0


def _parse(text: str) -> Dict[str, Any]:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        line = getattr(e, 'lineno', None)
        if line is None:
            match = re.search(r'line (\d+)', str(e))
            line = int(match.group(1)) if match else 0
        raise ParseError(line, getattr(e, 'msg', str(e))) from e


def _geometry(section: _Section) -> DisplayGeometry:
    preset = section.get('preset', str, 'prototype', lambda v: v in PRESETS, f'one of {sorted(PRESETS)}')
    matched = section.get('design_matched', bool, True)

    reference = PRESETS[preset]()
    overrides = {}
    for name in DisplayGeometry.field_names():
        kinds = int if isinstance(getattr(reference, name), int) else _NUMBER
        value = section.get(name, kinds)
        if value is not None:
            overrides[name] = float(value) if kinds is _NUMBER else value
    section.finish()

    try:
        geometry = reference
        if overrides:
            geometry = geometry.with_changes(**overrides)
        if matched and 'focal_length' not in overrides:
            g, d = geometry.led_lens_gap, geometry.design_distance
            geometry = geometry.with_changes(focal_length=g * d / (g + d))
    except GeometryError as e:
        names = [name for name in DisplayGeometry.field_names() if name in str(e)]
        raise ValidationError(f'geometry.{names[0]}' if names else 'geometry', str(e)) from e

    return geometry


def _viewers(tables: Any, geometry: DisplayGeometry) -> List[Viewer]:
    if tables is None:
        return [Viewer.at(0.0, geometry.design_distance)]
    if not isinstance(tables, list) or not tables:
        raise ValidationError('viewers', 'must be a non-empty array of tables')

    viewers = []
    for index, table in enumerate(tables):
        section = _Section(f'viewers[{index}]', table)
        x = section.get('x', _NUMBER, 0.0)
        z = section.get('z', _NUMBER, geometry.design_distance, _positive, 'must be > 0')
        ipd = section.get('ipd', _NUMBER, DEFAULT_IPD, _positive, 'must be > 0')
        viewer_id = section.get('id', int, index)
        section.finish()
        viewers.append(Viewer.at(float(x), float(z), viewer_id, float(ipd)))
    return viewers


def _x_range(section: _Section, default: Tuple[float, float]) -> Tuple[float, float]:
    lo = float(section.get('x_min', _NUMBER, default[0]))
    hi = float(section.get('x_max', _NUMBER, default[1]))
    if hi < lo:
        raise ValidationError(f'{section.name}.x_max', 'must be >= x_min')
    return lo, hi


def _slant(value: Any) -> Fraction:
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError) as e:
        raise ValidationError('interleave.slant', f'not a rational number: {value!r}') from e


def load_scenario(path: Union[str, Path]) -> Scenario:
    '''
    Read, parse and validate a scenario file.

    The file is TOML. Only [geometry] is required; every other section and key falls back to its default.
    View image paths are resolved against the scenario's directory and must exist.

    Args:
        path (Union[str, Path]): The scenario file.

    Returns:
        Scenario: The validated scenario.

    Raises:
        OSError: If the file cannot be read.
        ParseError: If the file is not valid TOML.
        ValidationError: If a value is missing, unknown or out of range.
    '''
    path = Path(path)
    source = path.read_bytes()
    try:
        text = source.decode('utf-8')
    except UnicodeDecodeError as e:
        raise ParseError(0, f'not UTF-8: {e}') from e
    data = _parse(text)

    for name in data:
        if name not in _SECTIONS:
            raise ValidationError(name, 'unknown section')
    if 'geometry' not in data:
        raise ValidationError('geometry', 'section is required')

    geometry = _geometry(_Section('geometry', data['geometry']))
    viewers = _viewers(data.get('viewers'), geometry)

    schedule = _Section('schedule', data.get('schedule', {}))
    modes = {mode.value: mode for mode in ScheduleMode}
    mode = modes[schedule.get('mode', str, 'per_eye', lambda v: v in modes, f'one of {sorted(modes)}')]
    refresh_fraction = float(schedule.get('refresh_fraction', _NUMBER, DEFAULT_REFRESH_FRACTION,
                                          lambda v: 0 < v < 1, 'must lie in (0, 1)'))
    margin = float(schedule.get('margin', _NUMBER, 0.0, lambda v: v >= 0, 'must be >= 0'))
    guard_columns = schedule.get('guard_columns', int, 1, lambda v: v >= 0, 'must be >= 0')
    leak = float(schedule.get('leak', _NUMBER, DEFAULT_LEAK, lambda v: 0 < v < 1, 'must lie in (0, 1)'))
    clean = schedule.get('clean', bool, True)
    cycles = schedule.get('cycles', int, 1, lambda v: v >= 1, 'must be >= 1')
    extra = schedule.get('extra_forbidden', list, [])
    schedule.finish()

    extra_forbidden = []
    for pair in extra:
        if not (isinstance(pair, list) and len(pair) == 2 and all(type(v) is int for v in pair)
                and 0 <= pair[1] < geometry.led_column_count):
            raise ValidationError('schedule.extra_forbidden', f'expected [view, column] pairs, got {pair!r}')
        extra_forbidden.append((pair[0], pair[1]))

    if mode is ScheduleMode.PER_EYE and len(viewers) > 1:
        logger.warning('per-eye mode serves viewer %d only', viewers[0].viewer_id)

    interleave = _Section('interleave', data.get('interleave', {}))
    pattern = InterleavePattern(
        columns_per_lens=interleave.get('columns_per_lens', int, 2, lambda v: v >= 1, 'must be >= 1'),
        slant_columns_per_row=_slant(interleave.get('slant', (str, int, float), 0)),
        field_shift=interleave.get('field_shift', int, 0),
    )
    interleave.finish()

    views_section = _Section('views', data.get('views', {}))
    sources = {}
    for side in ('left', 'right'):
        value = views_section.get(side, str)
        if value is not None:
            resolved = (path.parent / value).resolve()
            if not resolved.is_file():
                raise ValidationError(f'views.{side}', f'file not found: {resolved}')
            sources[side] = resolved
    if len(sources) == 1:
        raise ValidationError('views', 'give both left and right, or neither')
    views = ViewSources(
        synthetic=views_section.get('synthetic', str, 'gradient', lambda v: v in SYNTHETIC_VIEWS,
                                    f'one of {list(SYNTHETIC_VIEWS)}'),
        height=views_section.get('height', int, 16, _positive, 'must be > 0'),
        **sources
    )
    views_section.finish()

    profile_section = _Section('profile', data.get('profile', {}))
    profile = ProfileSettings(
        z=float(profile_section.get('z', _NUMBER, geometry.design_distance, _positive, 'must be > 0')),
        x_range=_x_range(profile_section, (-0.2, 0.2)),
        step=float(profile_section.get('step', _NUMBER, 1e-4, _positive, 'must be > 0')),
    )
    profile_section.finish()

    sweep_section = _Section('sweep', data.get('sweep', {}))
    sweep = SweepSettings(
        z=float(sweep_section.get('z', _NUMBER, geometry.design_distance, _positive, 'must be > 0')),
        x_range=_x_range(sweep_section, DEFAULT_SWEEP_RANGE),
        step=float(sweep_section.get('step', _NUMBER, DEFAULT_SWEEP_STEP, _positive, 'must be > 0')),
        gap_threshold=float(sweep_section.get('gap_threshold', _NUMBER, DEFAULT_GAP_THRESHOLD,
                                              lambda v: 0 < v < 1, 'must lie in (0, 1)')),
        mix_threshold=float(sweep_section.get('mix_threshold', _NUMBER, DEFAULT_MIX_THRESHOLD,
                                              lambda v: 0 < v <= 1, 'must lie in (0, 1]')),
        crosstalk_window=float(sweep_section.get('crosstalk_window', _NUMBER, DEFAULT_IPD / 2,
                                                 _positive, 'must be > 0')),
    )
    sweep_section.finish()
    if sweep.gap_threshold >= sweep.mix_threshold:
        raise ValidationError('sweep.gap_threshold', 'must be below mix_threshold')

    oracle_section = _Section('oracle', data.get('oracle', {}))
    columns = oracle_section.get('columns', list, [geometry.led_column_count // 2])
    if not all(type(c) is int and 0 <= c < geometry.led_column_count for c in columns):
        raise ValidationError('oracle.columns', 'expected LED column indices')
    oracle = OracleSettings(
        rays=oracle_section.get('rays', int, 100_000, _positive, 'must be > 0'),
        columns=tuple(columns),
    )
    oracle_section.finish()

    output = _Section('output', data.get('output', {}))
    output_dir = Path(output.get('dir', str, 'out'))
    plot = output.get('plot', bool, False)
    output.finish()

    scenario = Scenario(
        geometry=geometry,
        viewers=viewers,
        mode=mode,
        refresh_fraction=refresh_fraction,
        margin=margin,
        guard_columns=guard_columns,
        leak=leak,
        clean=clean,
        extra_forbidden=extra_forbidden,
        cycles=cycles,
        pattern=pattern,
        views=views,
        profile=profile,
        sweep=sweep,
        oracle=oracle,
        output_dir=output_dir if output_dir.is_absolute() else path.parent / output_dir,
        plot=plot,
        source=source,
    )

    logger.info('loaded scenario %s: %d viewer(s), %s', path, len(viewers), mode.value)
    return scenario
