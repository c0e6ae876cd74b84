from app import main
from src.app_manager import ExitStatus, RunManager, run
from src.scenario import load_scenario

import re

import pytest


SCENARIO = '''
[geometry]
preset = "prototype"

[[viewers]]
x = 0.0
z = 1.0

[schedule]
mode = "per_eye"
{schedule}

[interleave]
field_shift = 1

[views]
synthetic = "white"
height = 2

[profile]
x_min = -0.05
x_max = 0.05
step = 0.001

[sweep]
x_min = -0.05
x_max = 0.05
step = 0.005

[oracle]
rays = 2000
columns = [48]
'''


@pytest.fixture
def scenario_file(tmp_path):
    def make(schedule=''):
        path = tmp_path / 'run.scenario'
        path.write_text(SCENARIO.format(schedule=schedule))
        return path
    return make


def run_cli(capsys, *argv):
    status = main(list(argv))
    captured = capsys.readouterr()
    return status, captured.out.splitlines(), captured.err


def test_select(capsys, scenario_file, tmp_path):
    status, paths, _ = run_cli(capsys, 'select', '--scenario', str(scenario_file()), '--out', str(tmp_path / 'out'))

    assert status == ExitStatus.OK
    assert len(paths) == 1
    assert re.fullmatch(r'select-[0-9a-f]{12}\.csv', paths[0].rsplit('/', 1)[-1])

    lines = (tmp_path / 'out' / paths[0].rsplit('/', 1)[-1]).read_text().splitlines()
    assert lines[0] == 'viewer_id,side,x_m,z_m,mask_hex,columns'
    assert lines[1].startswith('0,left,-3.15000000e-02,1.00000000e+00,')
    assert lines[1].split(',')[-1] == '13 37 61 85'


@pytest.mark.parametrize('subcommand, count, suffix', [
    ('profile', 2, 'csv'),
    ('schedule', 2, None),
    ('interleave', 2, 'pgm'),
    ('render', 2, 'pgm'),
    ('sweep', 2, None),
    ('crosstalk', 1, 'csv'),
    ('oracle', 1, 'csv'),
])
def test_subcommands_write_artifacts(capsys, scenario_file, tmp_path, subcommand, count, suffix):
    status, paths, _ = run_cli(capsys, subcommand, '--scenario', str(scenario_file()), '--out', str(tmp_path))

    assert status == ExitStatus.OK
    assert len(paths) == count
    for path in paths:
        name = path.rsplit('/', 1)[-1]
        assert name.startswith(subcommand + '-')
        if suffix:
            assert name.endswith('.' + suffix)
        assert (tmp_path / name).stat().st_size > 0


def test_images_are_binary_netpbm(scenario_file, tmp_path):
    scenario = load_scenario(scenario_file())
    manager = RunManager(scenario, tmp_path)

    frames = manager.run('interleave').artifacts
    assert all(path.read_bytes().startswith(b'P5\n7680 2\n255\n') for path in frames)

    strip = [p for p in manager.run('sweep').artifacts if p.suffix == '.ppm'][0]
    assert strip.read_bytes().startswith(b'P6\n21 32\n255\n')


def test_region_x_violation_exits_with_one(capsys, scenario_file, tmp_path):
    status, _, err = run_cli(capsys, 'schedule', '--scenario', str(scenario_file('extra_forbidden = [[0, 61]]')),
                             '--out', str(tmp_path))
    assert status == ExitStatus.VIOLATIONS
    assert 'violation: RegionXLit(view_id=0, column=61)' in err


def test_invalid_scenario_exits_with_two(capsys, tmp_path):
    path = tmp_path / 'bad.scenario'
    path.write_text('[geometry]\nled_column_count = 0\n')
    status, paths, err = run_cli(capsys, 'select', '--scenario', str(path), '--out', str(tmp_path))

    assert status == ExitStatus.ERROR
    assert paths == []
    assert 'geometry.led_column_count' in err


def test_unparsable_scenario_exits_with_two(capsys, tmp_path):
    path = tmp_path / 'bad.scenario'
    path.write_text('[geometry\n')
    status, _, err = run_cli(capsys, 'select', '--scenario', str(path), '--out', str(tmp_path))
    assert status == ExitStatus.ERROR
    assert 'line 1' in err


def test_missing_scenario_exits_with_two(capsys, tmp_path):
    status, _, _ = run_cli(capsys, 'select', '--scenario', str(tmp_path / 'none'), '--out', str(tmp_path))
    assert status == ExitStatus.ERROR


def test_seed_must_fit_64_bits(capsys, scenario_file, tmp_path):
    status, _, err = run_cli(capsys, 'oracle', '--scenario', str(scenario_file()), '--seed', str(2 ** 64))
    assert status == ExitStatus.ERROR
    assert '--seed' in err


@pytest.mark.parametrize('subcommand', ['schedule', 'sweep', 'oracle'])
def test_runs_are_byte_identical(scenario_file, tmp_path, subcommand):
    scenario = load_scenario(scenario_file())
    first = RunManager(scenario, tmp_path / 'a', seed=9).run(subcommand).artifacts
    second = RunManager(scenario, tmp_path / 'b', seed=9).run(subcommand).artifacts

    assert [p.name for p in first] == [p.name for p in second]
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()


def test_unknown_subcommand(scenario_file, tmp_path):
    with pytest.raises(ValueError):
        RunManager(load_scenario(scenario_file()), tmp_path).run('explode')


def test_run_is_the_manager_in_one_call(scenario_file, tmp_path):
    scenario = load_scenario(scenario_file())
    result = run('select', scenario, tmp_path / 'a')
    expected = RunManager(scenario, tmp_path / 'b').run('select')

    assert result.status == ExitStatus.OK
    assert [p.read_bytes() for p in result.artifacts] == [p.read_bytes() for p in expected.artifacts]


def test_per_eye_crosstalk_with_a_second_viewer(capsys, scenario_file, tmp_path):
    path = scenario_file()
    path.write_text(path.read_text().replace('[schedule]', '[[viewers]]\nx = 0.2\nz = 1.0\n\n[schedule]'))

    status, paths, _ = run_cli(capsys, 'crosstalk', '--scenario', str(path), '--out', str(tmp_path))
    assert status == ExitStatus.OK

    rows = (tmp_path / paths[0].rsplit('/', 1)[-1]).read_text().splitlines()[1:]
    assert [row.split(',')[:2] for row in rows] == [['0', 'left'], ['0', 'right']]
