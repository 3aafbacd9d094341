import unicodedata

import numpy as np
import pytest

from errors import ConfigError, EmptyDocument, EmptyGroup
from services.metrics_service import MetricsService, box_stats, split_words

BREVIGRAPHS = set('ñẽāēīōūãõꝫ⁊')
ALPHABET = list('aeinoudvct') + [' ', ' '] + sorted(BREVIGRAPHS)


@pytest.fixture
def metrics():
    return MetricsService()


def walk(text):
    """Independent re-count: (brevigraphs, letter-like clusters, abbreviated words, words)"""
    text = unicodedata.normalize('NFC', text)
    clusters = []
    for ch in text:
        if clusters and unicodedata.combining(ch):
            clusters[-1] += ch
        else:
            clusters.append(ch)
    n_brev = sum(1 for c in clusters if c[0] in BREVIGRAPHS)
    n_letter = sum(1 for c in clusters if c[0] not in BREVIGRAPHS and c[0].isalpha())
    words = text.split()
    abbreviated = sum(1 for w in words if any(ch in BREVIGRAPHS for ch in w))
    return n_brev, n_brev + n_letter, abbreviated, len(words)


def test_character_and_word_density_by_hand(corpus_service, metrics):
    doc = corpus_service.ingest_text('ende vā dat', 'C1', 'I', 'A')
    assert metrics.abbreviation_density_chars(doc) == pytest.approx(1 / 9)
    assert metrics.abbreviation_density_words(doc) == pytest.approx(1 / 3)


def test_densities_match_independent_walker(corpus_service, metrics):
    rng = np.random.default_rng(3)
    for _ in range(100):
        raw = ''.join(rng.choice(ALPHABET, size=int(rng.integers(20, 200))))
        doc = corpus_service.ingest_text(raw, 'C1', 'I', 'A')
        n_brev, n_total, abbreviated, n_words = walk(corpus_service.clean_text(raw))
        if n_total == 0:
            continue
        assert metrics.abbreviation_density_chars(doc) == n_brev / n_total
        assert metrics.abbreviation_density_words(doc) == abbreviated / n_words


def test_digits_only_document_is_empty(corpus_service, metrics):
    doc = corpus_service.ingest_text('12 34', 'C1', 'I', 'A')
    with pytest.raises(EmptyDocument):
        metrics.abbreviation_density_chars(doc)


def test_split_words_on_whitespace_runs(corpus_service):
    doc = corpus_service.ingest_text('eñ  van', 'C1', 'I', 'A')
    assert [''.join(c.text for c in w) for w in split_words(doc.clusters)] == ['eñ', 'van']


def test_box_stats_quartiles():
    assert box_stats([1, 2, 3, 4, 5]) == {'min': 1.0, 'q1': 2.0, 'median': 3.0, 'q3': 4.0, 'max': 5.0}


def test_density_report_by_codex_per_document(corpus_service, metrics):
    units = [
        corpus_service.ingest_text('eñ eñ', 'C1', 'I', 'A'),
        corpus_service.ingest_text('ende ende', 'C1', 'II', 'A'),
        corpus_service.ingest_text('vā van', 'C2', 'I', 'A'),
    ]
    report = metrics.density_report(units, group_by='codex', sample='document')
    rows = {row.key: row for row in report.rows}
    assert rows['C1'].n_documents == 2
    assert rows['C1'].per_sample_densities == [0.5, 0.0]
    assert rows['C1'].mean_density_char == pytest.approx(0.25)
    assert rows['C2'].mean_density_char == pytest.approx(1 / 5)
    assert rows['C2'].mean_density_word == pytest.approx(0.5)


def test_pooled_density_uses_summed_counts(corpus_service, metrics):
    units = [corpus_service.ingest_text('eñ', 'C1', 'I', 'A'), corpus_service.ingest_text('ende ende', 'C1', 'II', 'A')]
    report = metrics.density_report(units, group_by='scribe', sample='document', pooled=True)
    assert report.rows[0].mean_density_char == pytest.approx(1 / 10)


def test_unit_grouping_alias(corpus_service, metrics):
    units = [corpus_service.ingest_text('eñ', 'C1', 'I', 'A')]
    report = metrics.density_report(units, group_by='codex+unit', sample='document')
    assert report.group_key == 'unit'
    assert report.rows[0].key == 'C1 / I'


def test_segment_sampling_drops_short_units(corpus_service, metrics):
    units = [corpus_service.ingest_text('eñ van', 'C1', 'I', 'A'), corpus_service.ingest_text('eñ', 'C2', 'I', 'B')]
    with pytest.raises(EmptyGroup):
        metrics.density_report(units, group_by='scribe', sample='segment', segment_size=3)


def test_density_report_rejects_unknown_grouping(metrics):
    with pytest.raises(ConfigError):
        metrics.density_report([], group_by='century')


def test_contrast_report_target_against_rest(corpus_service, metrics):
    units = [
        corpus_service.ingest_text('eñ eñ eñ', 'Gent', 'I', 'A'),
        corpus_service.ingest_text('ende ende', 'Wien', 'I', 'A'),
        corpus_service.ingest_text('eñ', 'Other', 'I', 'B'),
    ]
    report = metrics.contrast_report(units, 'A', 'Wien', segment_size=4)
    assert [row.key for row in report.rows] == ['Wien', 'rest']
    assert report.rows[0].mean_density_char == 0.0
    assert report.rows[1].mean_density_char > 0.3


def test_corpus_statistics_by_hand(corpus_service, metrics):
    units = [
        corpus_service.ingest_text('en\u0303 van en\u0303', 'C1', 'I', 'A'),
        corpus_service.ingest_text('dat', 'C2', 'I', 'A'),
    ]
    table = metrics.corpus_statistics(units, segment_size=4)
    row = table.iloc[0].to_dict()
    assert row['scribe'] == 'A'
    assert row['codices'] == 2
    assert row['production_units'] == 2
    assert row['characters_codepoint'] == 14
    assert row['characters_grapheme'] == 12
    assert row['segments'] == 2
    assert row['unique_characters'] == 7
    assert row['ttr'] == pytest.approx(0.75)


def test_corpus_statistics_empty(metrics):
    assert metrics.corpus_statistics([]).empty


def test_codex_statistics(corpus_service, metrics):
    units = [corpus_service.ingest_text('van van dat', 'C1', 'I', 'A')]
    table = metrics.codex_statistics(units)
    assert table.to_dict(orient='records') == [{'codex': 'C1', 'scribe': 'A', 'words': 3, 'unique_words': 2}]


def test_type_token_ratio_and_unique_characters(corpus_service, metrics):
    doc = corpus_service.ingest_text('vā van vā dat', 'C1', 'I', 'A')
    assert metrics.type_token_ratio(doc) == pytest.approx(3 / 4)
    assert metrics.unique_characters(doc) == 6
