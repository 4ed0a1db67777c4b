import json
import os

import pandas as pd
import pytest

from cli import EXIT_DEGENERATE, EXIT_INVALID, EXIT_OK, main

FAST = {'centers_per_axis': 3, 'radii_count': 4, 'marching_depth': 5, 'width_directions': 256,
        'bisection_tol': 1e-6, 'crofton_lines': 2000, 'crofton_steps': 256}


def write_config(tmp_path, data, name='config.json'):
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=2), encoding='utf-8')
    return str(path)


def run(tmp_path, experiment, data, out='out', extra=()):
    out_dir = str(tmp_path / out)
    status = main([experiment, '--config', write_config(tmp_path, data), '--out', out_dir, *extra])
    return status, out_dir


def load(out_dir, name):
    with open(os.path.join(out_dir, name), encoding='utf-8') as f:
        return json.load(f)


def test_exponent_run(tmp_path):
    status, out = run(tmp_path, 'exponent', {'experiment': 'exponent', 'params': {'A': 2, 'c': 1.0}})
    assert status == EXIT_OK
    frame = pd.read_csv(os.path.join(out, 'exponent.csv'))
    assert list(frame.columns) == ['j', 'N', 'log_F', 'log_bound']
    assert load(out, 'exponent.json')['alpha'] == 3.0
    manifest = load(out, 'manifest.json')
    assert manifest['exit_status'] == 0
    assert 'exponent.csv' in manifest['outputs']
    assert not os.path.exists(os.path.join(out, 'errors.json'))


def test_repeated_runs_are_byte_identical(tmp_path):
    data = {'experiment': 'nodal',
            'fields': [{'kind': 'torus_eigen', 'm': [2, 1], 'parity': ['cos', 'sin']}],
            'geometry': {'domain': 'periodic'},
            'params': {'methods': ['marching', 'crofton']},
            'numerics': dict(FAST)}
    first, out_a = run(tmp_path, 'nodal', data, 'a', ['--seed', '7', '--threads', '1'])
    second, out_b = run(tmp_path, 'nodal', data, 'b', ['--seed', '7', '--threads', '3'])
    assert first == second == EXIT_OK
    names = sorted(os.listdir(out_a))
    assert names == sorted(os.listdir(out_b))
    for name in names:
        if name == 'manifest.json':
            continue
        with open(os.path.join(out_a, name), 'rb') as fa, open(os.path.join(out_b, name), 'rb') as fb:
            assert fa.read() == fb.read(), name
    assert 'nodal.svg' in names


def test_manifest_hash_is_stable_across_runs(tmp_path):
    data = {'experiment': 'exponent', 'params': {'A': 3, 'c': 0.5}}
    _, out_a = run(tmp_path, 'exponent', data, 'a')
    _, out_b = run(tmp_path, 'exponent', data, 'b')
    assert load(out_a, 'manifest.json')['config_hash'] == load(out_b, 'manifest.json')['config_hash']


def test_invalid_config_exits_2(tmp_path):
    status, out = run(tmp_path, 'exponent', {'experiment': 'exponent', 'numerics': {'bogus': 1}})
    assert status == EXIT_INVALID
    assert not os.path.exists(os.path.join(out, 'manifest.json'))


def test_missing_seed_exits_2(tmp_path):
    data = {'experiment': 'simplex', 'params': {'covering': {'a_values': [0.5]}}}
    status, _ = run(tmp_path, 'simplex', data)
    assert status == EXIT_INVALID


def test_experiment_mismatch_exits_2(tmp_path):
    status, _ = run(tmp_path, 'freq', {'experiment': 'exponent'})
    assert status == EXIT_INVALID


def test_degenerate_field_exits_3_with_partial_outputs(tmp_path):
    data = {'experiment': 'freq',
            'fields': [{'kind': 'harmonic_poly', 'n': 2, 'k': 3, 'name': 'cubic'},
                       {'kind': 'affine', 'a': [0.0, 0.0], 'b': 0.0, 'name': 'zero'}],
            'params': {'radii': [0.25, 0.5, 1.0]}}
    status, out = run(tmp_path, 'freq', data)
    assert status == EXIT_DEGENERATE
    errors = load(out, 'errors.json')['errors']
    assert errors[0]['item'] == 'zero'
    assert errors[0]['error'] == 'DegenerateFieldError'
    frame = pd.read_csv(os.path.join(out, 'freq.csv'))
    assert set(frame['field']) == {'cubic'}
    assert load(out, 'manifest.json')['exit_status'] == EXIT_DEGENERATE


def test_bad_item_is_recorded_and_run_continues(tmp_path):
    data = {'experiment': 'doubling',
            'fields': [{'kind': 'bessel'}, {'kind': 'harmonic_poly', 'n': 2, 'k': 2}],
            'params': {'balls': [{'center': [0.0, 0.0], 'r': 0.5}]},
            'numerics': dict(FAST)}
    status, out = run(tmp_path, 'doubling', data)
    assert status == EXIT_INVALID
    assert load(out, 'errors.json')['errors'][0]['item'] == 'fields[0]'
    frame = pd.read_csv(os.path.join(out, 'doubling.csv'))
    ball = frame[frame['region'] == 'ball']
    assert ball['N'].iloc[0] == pytest.approx(2.0, abs=1e-9)


def test_mistyped_parameter_exits_2_with_manifest(tmp_path):
    data = {'experiment': 'freq', 'fields': [{'kind': 'harmonic_poly', 'n': 2, 'k': 3}],
            'params': {'radii': 'x'}}
    status, out = run(tmp_path, 'freq', data)
    assert status == EXIT_INVALID
    errors = load(out, 'errors.json')['errors']
    assert errors[0]['item'] == 'freq'
    assert errors[0]['error'] == 'ConfigError'
    assert load(out, 'manifest.json')['exit_status'] == EXIT_INVALID


def test_census_run(tmp_path):
    data = {'experiment': 'census',
            'fields': [{'kind': 'harmonic_poly', 'n': 2, 'k': 4}],
            'geometry': {'cube': {'center': [0.0, 0.0], 'half_side': 1.0}},
            'params': {'subcube': {'A': [3], 'c': 0.5}, 'hyperplane': {'A1': [3]},
                       'tree': {'A0': 2, 'n': 2, 'depth': 6, 'runs': 3}},
            'numerics': dict(FAST, seed=11)}
    status, out = run(tmp_path, 'census', data)
    assert status == EXIT_OK
    summary = pd.read_csv(os.path.join(out, 'census.csv'))
    assert list(summary['rule']) == ['max(N(Q)/(1+c),N0)', 'N/2-hyperplane']
    tree = pd.read_csv(os.path.join(out, 'census_tree.csv'))
    assert sorted(set(tree['seed'])) == [11, 12, 13]
    assert os.path.exists(os.path.join(out, 'census.svg'))


def test_simplex_run(tmp_path):
    data = {'experiment': 'simplex',
            'params': {'covering': {'a_values': [0.5], 'n': 2, 'shape_samples': 1},
                       'checks': [{'vertices': [[0, 0], [1, 0], [0.5, 0.8660254037844386]], 'K': 2.0, 'c1': 0.05,
                                   'delta': {'i': 0, 'rho': 2.0, 't': 3.0}}]},
            'numerics': dict(FAST, seed=5)}
    status, out = run(tmp_path, 'simplex', data)
    assert status == EXIT_OK
    result = load(out, 'simplex.json')
    assert result['checks'][0]['holds'] is True
    assert len(result['covering']) == 1


def test_smallness_and_yau_runs(tmp_path):
    status, out = run(tmp_path, 'smallness', {'experiment': 'smallness',
                                              'params': {'family': 'sinh_mode', 'k_values': [4, 8, 12, 16]}},
                      'small')
    assert status == EXIT_OK
    assert 'envelope_C' in load(out, 'smallness.json')
    status, out = run(tmp_path, 'yau', {'experiment': 'yau', 'params': {'n': 2, 'm0': [1, 2, 4, 8]}}, 'yau')
    assert status == EXIT_OK
    fit = load(out, 'yau.json')
    assert fit['fitted_exponent'] == pytest.approx(0.5, abs=0.02)
    assert os.path.exists(os.path.join(out, 'yau.svg'))


def test_shipped_configs_parse():
    from lab_config import load_experiment_config
    root = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'configs')
    for name in sorted(os.listdir(root)):
        config = load_experiment_config(os.path.join(root, name))
        assert config.experiment == name[:-len('.json')]
