from src.display import DisplayGeometry
from src.errors import ParseError, ValidationError
from src.schedule import ScheduleMode
from src.scenario import load_scenario

from fractions import Fraction
from pathlib import Path

import pytest


DEFAULT_SCENARIO = Path(__file__).parent.parent / 'scenarios' / 'default.scenario'


def write(tmp_path, text, name='test.scenario'):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_default_scenario():
    scenario = load_scenario(DEFAULT_SCENARIO)

    assert scenario.geometry == DisplayGeometry.prototype()
    assert scenario.mode is ScheduleMode.PER_EYE
    assert len(scenario.viewers) == 1
    assert scenario.viewers[0].ipd == pytest.approx(0.063)
    assert scenario.pattern.field_shift == 1
    assert scenario.oracle.columns == (47, 48)
    assert scenario.output_dir == DEFAULT_SCENARIO.parent / 'out'
    assert scenario.source == DEFAULT_SCENARIO.read_bytes()


def test_minimal_scenario_uses_defaults(tmp_path):
    scenario = load_scenario(write(tmp_path, '[geometry]\npreset = "bench"\n'))

    assert scenario.geometry == DisplayGeometry.bench()
    assert scenario.viewers[0].left.x == pytest.approx(-0.0315)
    assert scenario.refresh_fraction == 0.25
    assert scenario.guard_columns == 1
    assert scenario.leak == 1e-4
    assert scenario.sweep.x_range == (-0.2, 0.2)
    assert scenario.sweep.crosstalk_window == pytest.approx(0.0315)


def test_geometry_overrides_keep_the_stack_focused(tmp_path):
    scenario = load_scenario(write(tmp_path, '[geometry]\npreset = "bench"\nled_lens_gap = 0.06\n'))
    assert scenario.geometry.led_lens_gap == 0.06
    assert scenario.geometry.is_design_matched()


def test_full_scenario(tmp_path):
    text = '''
[geometry]
preset = "prototype"
panel_field_rate = 360

[[viewers]]
id = 4
x = -0.1
z = 0.9

[[viewers]]
x = 0.1

[schedule]
mode = "per_viewer"
margin = 0.01
clean = false
extra_forbidden = [[0, 12]]

[interleave]
slant = "1/3"

[output]
dir = "artifacts"
plot = true
'''
    scenario = load_scenario(write(tmp_path, text))

    assert scenario.geometry.panel_field_rate == 360.0
    assert [v.viewer_id for v in scenario.viewers] == [4, 1]
    assert scenario.viewers[0].left.z == 0.9
    assert scenario.mode is ScheduleMode.PER_VIEWER
    assert not scenario.clean
    assert scenario.extra_forbidden == [(0, 12)]
    assert scenario.pattern.slant_columns_per_row == Fraction(1, 3)
    assert scenario.output_dir == tmp_path / 'artifacts'
    assert scenario.plot


def test_view_files_are_resolved(tmp_path):
    (tmp_path / 'l.pgm').write_bytes(b'P5\n1 1\n255\n\x00')
    scenario = load_scenario(write(tmp_path, '[geometry]\n[views]\nleft = "l.pgm"\nright = "l.pgm"\n'))
    assert scenario.views.left == (tmp_path / 'l.pgm').resolve()


@pytest.mark.parametrize('text, field', [
    ('', 'geometry'),
    ('[geometry]\nled_column_count = 0\n', 'geometry.led_column_count'),
    ('[geometry]\npreset = "tiny"\n', 'geometry.preset'),
    ('[geometry]\nwobble = 1\n', 'geometry.wobble'),
    ('[geometry]\n[extras]\n', 'extras'),
    ('[geometry]\n[schedule]\nmode = "per_frame"\n', 'schedule.mode'),
    ('[geometry]\n[schedule]\nrefresh_fraction = 1.5\n', 'schedule.refresh_fraction'),
    ('[geometry]\n[schedule]\ncycles = true\n', 'schedule.cycles'),
    ('[geometry]\n[schedule]\nleak = 0\n', 'schedule.leak'),
    ('[geometry]\n[schedule]\nextra_forbidden = [[0, 500]]\n', 'schedule.extra_forbidden'),
    ('[geometry]\n[interleave]\nslant = "1/0"\n', 'interleave.slant'),
    ('[geometry]\n[views]\nleft = "missing.pgm"\nright = "missing.pgm"\n', 'views.left'),
    ('[geometry]\n[sweep]\ngap_threshold = 0.6\n', 'sweep.gap_threshold'),
    ('[geometry]\n[sweep]\nx_min = 0.2\nx_max = -0.2\n', 'sweep.x_max'),
    ('[geometry]\n[oracle]\ncolumns = [96]\n', 'oracle.columns'),
    ('[geometry]\nviewers = 3\n', 'geometry.viewers'),
])
def test_validation_errors(tmp_path, text, field):
    with pytest.raises(ValidationError) as info:
        load_scenario(write(tmp_path, text))
    assert info.value.field == field


def test_parse_error_reports_the_line(tmp_path):
    with pytest.raises(ParseError) as info:
        load_scenario(write(tmp_path, '[geometry]\npreset = "bench"\nled_pitch = = 3\n'))
    assert info.value.line == 3
    assert str(info.value).startswith('line 3:')


def test_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_scenario(tmp_path / 'absent.scenario')
