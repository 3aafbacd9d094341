import json

import pytest

import app
from services import learning_service


@pytest.fixture(scope='module')
def demo_manifest(tmp_path_factory):
    corpus_dir = tmp_path_factory.mktemp('corpus')
    assert app.main(['synth', '-q', '--out', str(corpus_dir)]) == 0
    return str(corpus_dir / 'manifest.json')


def run(manifest, out, *argv):
    command, *rest = argv
    return app.main([command, '-q', '--manifest', manifest, '--out', str(out), *rest])


def test_stats_reports_each_scribe(demo_manifest, tmp_path, capsys):
    assert run(demo_manifest, tmp_path, 'stats') == 0
    assert 'stats: 2 scribes, 5 production units' in capsys.readouterr().out
    header = (tmp_path / 'stats.csv').read_text(encoding='utf-8').splitlines()[0]
    assert header.startswith('scribe,codices,production_units')
    assert (tmp_path / 'stats_codices.csv').exists()


def test_density_writes_table_report_and_plot(demo_manifest, tmp_path):
    assert run(demo_manifest, tmp_path, 'density', '--group-by', 'codex') == 0
    report = json.loads((tmp_path / 'density.json').read_text(encoding='utf-8'))
    assert report['config']['segment_size'] == 5000
    assert (tmp_path / 'density.svg').read_text(encoding='utf-8').startswith('<!-- generated by ScribeFlow')


def test_scatter_and_attribution(demo_manifest, tmp_path, capsys):
    assert run(demo_manifest, tmp_path, 'scatter', '--pca-dims', '5') == 0
    assert run(demo_manifest, tmp_path, 'attribute', '--query', 'beta', '--references', 'alpha') == 0
    out = capsys.readouterr().out
    assert 'scatter: 50 segments from alpha, beta' in out
    assert 'attribute beta: alpha' in out


def test_importance_can_save_its_model(demo_manifest, tmp_path):
    assert run(demo_manifest, tmp_path, 'importance', '--scribe', 'alpha', '--target', 'Gent-UB-2',
               '--trees', '10', '--save-model') == 0
    text = (tmp_path / 'importance_model.json').read_text(encoding='utf-8')
    model = json.loads(text)
    assert model['kind'] == 'forest'
    assert len(model['trees']) == 10

    report = json.loads((tmp_path / 'importance.json').read_text(encoding='utf-8'))
    saved_mdi = sorted(learning_service.rf_mdi(learning_service.model_from_json(text)), reverse=True)
    assert saved_mdi == pytest.approx([f['mdi'] for f in report['features']])


@pytest.mark.parametrize('argv', [
    ('stats',),
    ('density', '--group-by', 'codex+unit'),
    ('scatter',),
    ('scatter', '--method', 'neighbor'),
    ('pairwise', '--scribes', 'alpha', 'beta'),
    ('downsample',),
    ('outliers', '--scribe', 'alpha'),
    ('importance', '--scribe', 'alpha', '--target', 'Gent-UB-2', '--trees', '10', '--save-model'),
    ('attribute', '--query', 'beta', '--references', 'alpha'),
    ('synth',),
], ids=lambda argv: '-'.join(argv[:2]))
def test_outputs_are_byte_identical_across_runs_and_worker_counts(demo_manifest, tmp_path, argv):
    runs = [tmp_path / 'serial', tmp_path / 'parallel', tmp_path / 'again']
    for out, jobs in zip(runs, ('1', '8', '1')):
        assert run(demo_manifest, out, *argv, '--jobs', jobs) == 0
    names = sorted(p.name for p in runs[0].iterdir())
    assert names
    for out in runs[1:]:
        assert sorted(p.name for p in out.iterdir()) == names
        for name in names:
            assert (out / name).read_bytes() == (runs[0] / name).read_bytes(), name


def test_too_few_scribes_exits_with_analysis_code(demo_manifest, tmp_path, capsys):
    assert run(demo_manifest, tmp_path, 'scatter', '--min-segments', '1000') == 4
    assert 'InsufficientScribes' in capsys.readouterr().err


def test_empty_manifest_gives_empty_statistics(tmp_path):
    manifest = tmp_path / 'manifest.json'
    manifest.write_text('[]', encoding='utf-8')
    assert run(str(manifest), tmp_path / 'out', 'stats') == 0
    assert (tmp_path / 'out' / 'stats.csv').read_text(encoding='utf-8').strip().startswith('scribe')


def test_missing_manifest_is_a_data_error(tmp_path):
    assert run(str(tmp_path / 'absent.json'), tmp_path, 'stats') == 3


def test_out_of_range_nu_is_a_config_error(demo_manifest, tmp_path, capsys):
    assert run(demo_manifest, tmp_path, 'outliers', '--scribe', 'alpha', '--nu', '2') == 2
    assert 'ConfigError' in capsys.readouterr().err


def test_merge_relabels_scribes(demo_manifest, tmp_path, capsys):
    assert run(demo_manifest, tmp_path, 'stats', '--merge', 'beta=alpha') == 0
    assert 'stats: 1 scribes' in capsys.readouterr().out


def test_synth_from_a_single_profile(tmp_path, capsys):
    profile = tmp_path / 'gamma.json'
    profile.write_text(json.dumps({
        'base_lexicon': ['ende', 'van', 'den'],
        'abbreviation_rules': [{'full': 'van', 'abbreviated': 'vā', 'probability': 0.7}],
        'seed': 5,
    }, ensure_ascii=False), encoding='utf-8')
    out = tmp_path / 'corpus'
    assert app.main(['synth', '-q', '--out', str(out), '--profile', str(profile),
                     '--n-units', '2', '--n-clusters', '600']) == 0
    assert 'synth: 2 units' in capsys.readouterr().out
    manifest = json.loads((out / 'manifest.json').read_text(encoding='utf-8'))
    assert [(e['codex'], e['unit'], e['scribe']) for e in manifest] == [('gamma', '1', 'gamma'), ('gamma', '2', 'gamma')]

    assert run(str(out / 'manifest.json'), tmp_path / 'stats', 'stats') == 0
    assert 'stats: 1 scribes, 2 production units' in capsys.readouterr().out


def test_synth_plan_and_profile_are_exclusive(tmp_path):
    with pytest.raises(SystemExit):
        app.main(['synth', '--plan', 'a.json', '--profile', 'b.json', '--out', str(tmp_path)])
