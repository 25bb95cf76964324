"""
End-to-end tests of the censorlab command line: exit codes and report files.
"""

import json
import sys
from pathlib import Path

import pandas as pd
import pytest

sys.path.append(str(Path(__file__).parent.parent / 'src'))

from main import main

CONFIG_DIR = Path(__file__).parent.parent / 'config'


def write_config(tmp_path, data, name='experiment.json'):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def out_dir(tmp_path, name='out'):
    path = tmp_path / name
    path.mkdir()
    return str(path)


def read_report(directory):
    return json.loads((Path(directory) / 'report.json').read_text())


def small_verify(system_file):
    return {
        'command': 'verify-censoring',
        'system_files': [str(system_file)],
        'params': {'max_len': 2, 'relaxed_len': 2, 'random_length': 2, 'depth': 2},
    }


def test_verify_small_path_is_certified(tmp_path):
    config = write_config(tmp_path, small_verify(CONFIG_DIR / 'systems' / 'ising_p3_b0.4.json'))
    out = out_dir(tmp_path)
    assert main(['verify-censoring', '--config', config, '--out', out]) == 0
    report = read_report(out)
    assert report['verdict'] == 'certified'
    assert report['wall_time'] is None
    assert list(Path(out).glob('case-*.json'))


def test_antiferromagnet_is_refused(tmp_path):
    config = write_config(tmp_path, small_verify(CONFIG_DIR / 'systems' / 'antiferro_p3.json'))
    out = out_dir(tmp_path)
    assert main(['verify-censoring', '--config', config, '--out', out]) == 2
    assert read_report(out)['verdict'] == 'refused'


def test_missing_output_directory(tmp_path):
    config = write_config(tmp_path, small_verify(CONFIG_DIR / 'systems' / 'ising_p3_b0.4.json'))
    assert main(['verify-censoring', '--config', config, '--out', str(tmp_path / 'absent')]) == 2


def test_command_mismatch(tmp_path):
    config = write_config(tmp_path, small_verify(CONFIG_DIR / 'systems' / 'ising_p3_b0.4.json'))
    assert main(['hanging', '--config', config, '--out', out_dir(tmp_path)]) == 2


def test_unknown_config_field(tmp_path):
    config = write_config(tmp_path, {'command': 'mc', 'speed': 3})
    assert main(['mc', '--config', config, '--out', out_dir(tmp_path)]) == 2


def test_cold_cycle_contraction_fails(tmp_path):
    out = out_dir(tmp_path)
    config = str(CONFIG_DIR / 'experiments' / 'contraction_cycle6_cold.json')
    assert main(['contraction', '--config', config, '--out', out]) == 1
    assert read_report(out)['verdict'] == 'contraction fails'
    phi = pd.read_csv(Path(out) / 'phi.csv')
    assert list(phi.columns) == ['u', 'B_anchor', 'phi', 'witness']


def test_hanging_curves_at_infinite_temperature(tmp_path):
    config = write_config(tmp_path, {
        'command': 'hanging',
        'params': {
            'j_values': [1, 4],
            'round_cap': 50,
            'random_length': 2,
            'cases': [{'label': 'tail-b0',
                       'model': {'kind': 'ising', 'family': 'custom', 'beta': 0.0,
                                 'graph_params': {'n': 5, 'edges': [[0, 1], [1, 2], [0, 2], [2, 3], [3, 4]]}},
                       'H': [2, 3, 4]}],
        },
    })
    out = out_dir(tmp_path)
    assert main(['hanging', '--config', config, '--out', out]) == 0
    curves = pd.read_csv(Path(out) / 'tv_curves.csv')
    assert list(curves.columns) == ['case', 'round', 'variant', 'tv_h']
    assert set(curves['case']) == {'tail-b0'}
    assert read_report(out)['verdict'] == 'certified'


def test_mc_coalescence_with_overrides(tmp_path):
    config = str(CONFIG_DIR / 'experiments' / 'mc_torus.json')
    out = out_dir(tmp_path)
    code = main(['mc', '--config', config, '--out', out, '--size', '4', '--beta', '0',
                 '--schedule', 'systematic', '--seeds', '3', '--seed', '100'])
    assert code == 0
    report = read_report(out)
    assert report['verdict'] == 'consistent'
    assert report['seed'] == 100
    coalescence = report['modes']['coalescence']
    assert coalescence['seeds'] == 3
    # at beta = 0 a systematic sweep coalesces after one pass over the 16 sites
    assert coalescence['median_steps'] == 16.0
    assert (Path(out) / 'trajectories.csv').is_file()


def coupon_config(tmp_path, band):
    return write_config(tmp_path, {
        'command': 'mc',
        'model': {'kind': 'ising', 'family': 'cycle', 'graph_params': {'n': 16}, 'beta': 0.0},
        'schedules': [{'kind': 'random_scan'}],
        'seeds': {'start': 0, 'count': 2000},
        'params': {'modes': ['coalescence'], 'checkpoints': 2, 'coupon_band': band},
    })


def test_infinite_temperature_coalescence_matches_coupon_collector(tmp_path):
    out = out_dir(tmp_path)
    assert main(['mc', '--config', coupon_config(tmp_path, 0.05), '--out', out]) == 0
    coalescence = read_report(out)['modes']['coalescence']
    assert coalescence['verdict'] == 'consistent'
    assert coalescence['coupon_collector_mean'] == pytest.approx(16 * sum(1.0 / k for k in range(1, 17)))
    assert abs(coalescence['mean_over_coupon_collector'] - 1.0) <= 0.05


def test_coalescence_outside_coupon_band_is_a_violation(tmp_path):
    out = out_dir(tmp_path)
    assert main(['mc', '--config', coupon_config(tmp_path, 1e-9), '--out', out]) == 1
    report = read_report(out)
    assert report['verdict'] == 'violated'
    assert report['witness'] == ['coalescence']


@pytest.mark.slow
@pytest.mark.parametrize('name,command', [
    ('verify_p3.json', 'verify-censoring'),
    ('compare_c4_p4.json', 'compare-schedules'),
    ('contraction_cycle6.json', 'contraction'),
    ('mc_soundness.json', 'mc'),
    ('mc_soundness_b0.2.json', 'mc'),
    ('mc_coupon.json', 'mc'),
    ('verify_grid.json', 'verify-censoring'),
])
def test_shipped_configs_pass(tmp_path, name, command):
    out = out_dir(tmp_path)
    assert main([command, '--config', str(CONFIG_DIR / 'experiments' / name), '--out', out]) == 0
    assert read_report(out)['verdict'] in ('certified', 'consistent')


def test_compare_schedules_checks_birthday_rounds(tmp_path):
    config = write_config(tmp_path, {
        'command': 'compare-schedules',
        'model': {'kind': 'ising', 'family': 'cycle', 'graph_params': {'n': 4}, 'beta': 0.2},
        'epsilon': 0.25,
        'seeds': {'start': 0, 'count': 20},
        'params': {'birthday': True},
    })
    out = out_dir(tmp_path)
    assert main(['compare-schedules', '--config', config, '--out', out]) == 0
    case = json.loads(next(Path(out).glob('case-*.json')).read_text())
    check = next(c for c in case['checks'] if c['check'] == 'systematic rounds <= birthday rounds')
    assert check['status'] == 'holds'
    assert check['lhs'] == -(-case['tau']['systematic']['top']['steps'] // 4)
    assert check['lhs'] <= check['rhs']
    assert read_report(out)['verdict'] == 'certified'
