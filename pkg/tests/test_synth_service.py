import json

import pytest

from errors import BadHyperparameter, EmptyLexicon, InvalidProfile
from models import AbbreviationRule, HabitProfile
from services.metrics_service import MetricsService


def always_abbreviate(probability=1.0, seed=0):
    return HabitProfile(('ende',), (AbbreviationRule('ende', 'eñ', probability),), seed=seed)


def test_certain_rule_gives_exact_density(synth_service):
    doc = synth_service.generate_unit(always_abbreviate(), 299, 'C1', 'I', 'A')
    assert len(doc.clusters) == 299
    assert MetricsService().abbreviation_density_chars(doc) == 0.5


def test_zero_probabilities_give_zero_density(synth_service, alpha_profile):
    profile = HabitProfile(alpha_profile.base_lexicon,
                           tuple(AbbreviationRule(r.full, r.abbreviated, 0.0) for r in alpha_profile.abbreviation_rules))
    doc = synth_service.generate_unit(profile, 2000, 'C1', 'I', 'A')
    assert MetricsService().abbreviation_density_chars(doc) == 0.0


def test_generation_is_deterministic_per_unit(synth_service, alpha_profile):
    first = synth_service.generate_unit(alpha_profile, 500, 'C1', 'I', 'A')
    second = synth_service.generate_unit(alpha_profile, 500, 'C1', 'I', 'A')
    other = synth_service.generate_unit(alpha_profile, 500, 'C1', 'II', 'A')
    assert first.text == second.text
    assert first.text != other.text


def test_expected_density_matches_large_sample(synth_service, alpha_profile):
    doc = synth_service.generate_unit(alpha_profile, 200_000, 'C1', 'I', 'A')
    observed = MetricsService().abbreviation_density_chars(doc)
    assert observed == pytest.approx(synth_service.expected_density_chars(alpha_profile), abs=0.01)


def test_expected_density_by_hand(synth_service):
    assert synth_service.expected_density_chars(always_abbreviate(0.5)) == pytest.approx(0.5 / 3)


def test_empty_lexicon(synth_service):
    with pytest.raises(EmptyLexicon):
        synth_service.validate_profile(HabitProfile(()))


def test_abbreviation_without_brevigraph(synth_service):
    profile = HabitProfile(('ende',), (AbbreviationRule('ende', 'end', 0.5),))
    with pytest.raises(InvalidProfile):
        synth_service.validate_profile(profile)


def test_probability_outside_unit_interval():
    with pytest.raises(InvalidProfile):
        HabitProfile(('ende',), (AbbreviationRule('ende', 'eñ', 1.5),))


def test_cluster_count_must_be_positive(synth_service):
    with pytest.raises(BadHyperparameter):
        synth_service.generate_unit(always_abbreviate(), 0, 'C1', 'I', 'A')


def test_generated_corpus_reloads_through_the_manifest(tmp_path, synth_service, corpus_service):
    plan = {
        'profiles': {'alpha': {'base_lexicon': ['ende', 'van'],
                               'abbreviation_rules': [{'full': 'van', 'abbreviated': 'vā', 'probability': 0.5}],
                               'seed': 3}},
        'units': [
            {'codex': 'C1', 'unit': 'I', 'scribe': 'alpha', 'profile': 'alpha', 'n_clusters': 100},
            {'codex': 'C1/x', 'unit': 'II', 'scribe': 'alpha', 'profile': 'alpha', 'n_clusters': 50},
        ],
    }
    docs = synth_service.generate_corpus(plan, out_dir=str(tmp_path))
    manifest = json.loads((tmp_path / 'manifest.json').read_text(encoding='utf-8'))
    assert [e['file'] for e in manifest] == ['000_C1_I.txt', '001_C1_x_II.txt']

    reloaded = corpus_service.load_corpus(corpus_service.load_manifest(str(tmp_path / 'manifest.json')))
    assert [u.text for u in reloaded] == [d.text.strip() for d in docs]


def test_plan_with_unknown_profile(synth_service):
    plan = {'profiles': {}, 'units': [{'codex': 'C1', 'unit': 'I', 'scribe': 'a', 'profile': 'x', 'n_clusters': 5}]}
    with pytest.raises(InvalidProfile):
        synth_service.generate_corpus(plan)


def write_profile(tmp_path, data, name='gamma.json'):
    path = tmp_path / name
    path.write_text(json.dumps(data, ensure_ascii=False), encoding='utf-8')
    return str(path)


def test_load_profile_names_it_after_the_file(tmp_path, synth_service):
    path = write_profile(tmp_path, {
        'base_lexicon': ['ende', 'van'],
        'abbreviation_rules': [{'full': 'van', 'abbreviated': 'vā', 'probability': 0.5}],
        'seed': 7,
    })
    profile = synth_service.load_profile(path)
    assert profile.name == 'gamma'
    assert profile.seed == 7
    assert profile.abbreviation_rules == (AbbreviationRule('van', 'vā', 0.5),)


def test_load_profile_keeps_an_explicit_name(tmp_path, synth_service):
    profile = synth_service.load_profile(write_profile(tmp_path, {'name': 'delta', 'base_lexicon': ['ende']}))
    assert profile.name == 'delta'


@pytest.mark.parametrize('content', ['[1, 2]', '{"base_lexicon": ', '{"base_lexicon": []}'])
def test_load_profile_rejects_bad_files(tmp_path, synth_service, content):
    path = tmp_path / 'bad.json'
    path.write_text(content, encoding='utf-8')
    with pytest.raises((InvalidProfile, EmptyLexicon)):
        synth_service.load_profile(str(path))


def test_load_profile_missing_file(tmp_path, synth_service):
    with pytest.raises(InvalidProfile):
        synth_service.load_profile(str(tmp_path / 'absent.json'))


def test_profile_corpus_numbers_units_and_writes_a_manifest(tmp_path, synth_service, alpha_profile):
    docs = synth_service.profile_corpus(alpha_profile, 2, 300, out_dir=str(tmp_path))
    assert [(d.codex_id, d.unit_id, d.scribe) for d in docs] == [('alpha', '1', 'alpha'), ('alpha', '2', 'alpha')]
    assert all(len(d.clusters) == 300 for d in docs)
    assert docs[0].text != docs[1].text
    manifest = json.loads((tmp_path / 'manifest.json').read_text(encoding='utf-8'))
    assert [e['unit'] for e in manifest] == ['1', '2']


def test_profile_corpus_needs_a_unit(synth_service, alpha_profile):
    with pytest.raises(BadHyperparameter):
        synth_service.profile_corpus(alpha_profile, 0, 300)
