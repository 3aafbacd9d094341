# services/metrics_service.py

import logging
from collections import OrderedDict
from typing import Dict, Iterable, List, Sequence

import numpy as np
import pandas as pd

import config
from errors import ConfigError, EmptyDocument, EmptyGroup
from models import ClusterClass, DensityReport, DensityRow, GraphemeCluster, ProductionUnitDoc, Segment
from services.segmentation_service import SegmentationService

logger = logging.getLogger(__name__)

GROUP_KEYS = ('scribe', 'codex', 'unit')
LEVELS = ('character', 'word')
SAMPLES = ('segment', 'document')


def _clusters(doc) -> Sequence[GraphemeCluster]:
    return doc.clusters if hasattr(doc, 'clusters') else doc


def split_words(clusters: Sequence[GraphemeCluster]) -> List[List[GraphemeCluster]]:
    """Maximal runs of non-whitespace clusters"""
    words, current = [], []
    for cluster in clusters:
        if cluster.is_whitespace:
            if current:
                words.append(current)
                current = []
        else:
            current.append(cluster)
    if current:
        words.append(current)
    return words


def box_stats(values) -> Dict[str, float]:
    q = np.percentile(np.asarray(values, dtype=float), [0, 25, 50, 75, 100])
    return {'min': float(q[0]), 'q1': float(q[1]), 'median': float(q[2]), 'q3': float(q[3]), 'max': float(q[4])}


class MetricsService:
    def __init__(self, segmentation_service=None):
        self.segmentation = segmentation_service or SegmentationService()

    # ---------------------- PER-DOCUMENT METRICS ----------------------
    def char_counts(self, doc):
        """(brevigraph clusters, letter + brevigraph clusters)"""
        n_brev = n_letter = 0
        for cluster in _clusters(doc):
            if cluster.cls == ClusterClass.BREVIGRAPH:
                n_brev += 1
            elif cluster.cls == ClusterClass.LETTER:
                n_letter += 1
        return n_brev, n_letter + n_brev

    def word_counts(self, doc):
        """(abbreviated words, all words)"""
        words = split_words(_clusters(doc))
        abbreviated = sum(1 for w in words if any(c.is_brevigraph for c in w))
        return abbreviated, len(words)

    def abbreviation_density_chars(self, doc) -> float:
        n_brev, denominator = self.char_counts(doc)
        if denominator == 0:
            raise EmptyDocument('no letter or brevigraph clusters to measure')
        return n_brev / denominator

    def abbreviation_density_words(self, doc) -> float:
        abbreviated, n_words = self.word_counts(doc)
        if n_words == 0:
            raise EmptyDocument('no words to measure')
        return abbreviated / n_words

    def word_forms(self, doc) -> List[str]:
        return [''.join(c.text for c in w) for w in split_words(_clusters(doc))]

    def type_token_ratio(self, doc) -> float:
        forms = self.word_forms(doc)
        if not forms:
            raise EmptyDocument('no words to measure')
        return len(set(forms)) / len(forms)

    def unique_characters(self, doc) -> int:
        return len({c.text for c in _clusters(doc) if not c.is_whitespace})

    # ---------------------- GROUPED REPORTS ----------------------
    def _group_key(self, item, group_by):
        if group_by == 'scribe':
            return item.scribe
        if group_by == 'codex':
            return item.codex_id
        return f'{item.codex_id} / {item.unit_id}'

    def _samples(self, item, sample, segment_size):
        if isinstance(item, Segment) or sample == 'document':
            return [item]
        return self.segmentation.segment_unit(item, segment_size)

    def density_report(self, items: Iterable, group_by: str = 'scribe', level: str = 'character',
                       sample: str = 'segment', segment_size: int = config.SEGMENT_SIZE,
                       pooled: bool = False) -> DensityReport:
        """Mean and per-sample abbreviation densities per group.

        `items` are production units (cut into segments when sample='segment') or ready-made segments.
        pooled=True replaces the unweighted mean of samples by the ratio of summed counts.
        """
        if group_by == 'codex+unit':
            group_by = 'unit'
        if group_by not in GROUP_KEYS:
            raise ConfigError(f'group_by must be one of {GROUP_KEYS}, got {group_by!r}')
        if level not in LEVELS:
            raise ConfigError(f'level must be one of {LEVELS}, got {level!r}')
        if sample not in SAMPLES:
            raise ConfigError(f'sample must be one of {SAMPLES}, got {sample!r}')

        groups = OrderedDict()
        for item in items:
            group = groups.setdefault(self._group_key(item, group_by), {'units': set(), 'samples': []})
            group['units'].add((item.codex_id, item.unit_id))
            group['samples'].extend(self._samples(item, sample, segment_size))

        rows = []
        for key, group in groups.items():
            rows.append(self._density_row(key, group['units'], group['samples'], level, pooled))
        logger.info(f"Density report by {group_by} ({level} level, {sample} samples): {len(rows)} groups")
        return DensityReport(group_key=group_by, level=level, rows=rows, sample=sample, pooled=pooled)

    def _density_row(self, key, units, samples, level, pooled) -> DensityRow:
        char_values, word_values = [], []
        char_totals = np.zeros(2)
        word_totals = np.zeros(2)
        skipped = 0
        for s in samples:
            char_counts = self.char_counts(s)
            word_counts = self.word_counts(s)
            if char_counts[1] == 0 or word_counts[1] == 0:
                skipped += 1
                continue
            char_values.append(char_counts[0] / char_counts[1])
            word_values.append(word_counts[0] / word_counts[1])
            char_totals += char_counts
            word_totals += word_counts
        if skipped:
            logger.warning(f"{key}: skipped {skipped} samples without letters")
        if not char_values:
            raise EmptyGroup(f"group '{key}' has no measurable samples")

        if pooled:
            mean_char = float(char_totals[0] / char_totals[1])
            mean_word = float(word_totals[0] / word_totals[1])
        else:
            mean_char = float(np.mean(char_values))
            mean_word = float(np.mean(word_values))
        per_sample = char_values if level == 'character' else word_values
        return DensityRow(
            key=key,
            n_documents=len(units),
            n_samples=len(per_sample),
            mean_density_char=mean_char,
            mean_density_word=mean_word,
            per_sample_densities=per_sample,
            box=box_stats(per_sample),
        )

    def contrast_report(self, units: Iterable[ProductionUnitDoc], scribe: str, target_codex: str,
                        level: str = 'character', segment_size: int = config.SEGMENT_SIZE) -> DensityReport:
        """Per-segment densities of one codex against the rest of the scribe's corpus"""
        own = [u for u in units if u.scribe == scribe]
        target = [u for u in own if u.codex_id == target_codex]
        rest = [u for u in own if u.codex_id != target_codex]
        if not target:
            raise EmptyGroup(f"scribe '{scribe}' has no units in codex '{target_codex}'")
        if not rest:
            raise EmptyGroup(f"scribe '{scribe}' has no units outside codex '{target_codex}'")

        rows = []
        for key, group in ((target_codex, target), ('rest', rest)):
            samples = [s for u in group for s in self.segmentation.segment_unit(u, segment_size)]
            rows.append(self._density_row(key, {u.unit_key for u in group}, samples, level, pooled=False))
        return DensityReport(group_key='codex', level=level, rows=rows, sample='segment')

    # ---------------------- CORPUS TABLES ----------------------
    def corpus_statistics(self, units: Iterable[ProductionUnitDoc], segment_size: int = config.SEGMENT_SIZE) -> pd.DataFrame:
        """Per-scribe summary: codices, units, character counts, segments, unique characters, TTR"""
        by_scribe = OrderedDict()
        for unit in units:
            by_scribe.setdefault(unit.scribe, []).append(unit)

        records = []
        for scribe, scribe_units in by_scribe.items():
            forms = [f for u in scribe_units for f in self.word_forms(u)]
            records.append({
                'scribe': scribe,
                'codices': len({u.codex_id for u in scribe_units}),
                'production_units': len(scribe_units),
                'characters_codepoint': sum(len(u.text) for u in scribe_units),
                'characters_grapheme': sum(len(u.clusters) for u in scribe_units),
                'segments': sum(len(u.clusters) // segment_size for u in scribe_units),
                'unique_characters': len({c.text for u in scribe_units for c in u.clusters if not c.is_whitespace}),
                'ttr': len(set(forms)) / len(forms) if forms else 0.0,
            })
        columns = ['scribe', 'codices', 'production_units', 'characters_codepoint', 'characters_grapheme',
                   'segments', 'unique_characters', 'ttr']
        return pd.DataFrame.from_records(records, columns=columns)

    def codex_statistics(self, units: Iterable[ProductionUnitDoc]) -> pd.DataFrame:
        """Words and unique words per (codex, scribe)"""
        groups = OrderedDict()
        for unit in units:
            groups.setdefault((unit.codex_id, unit.scribe), []).extend(self.word_forms(unit))
        records = [
            {'codex': codex, 'scribe': scribe, 'words': len(forms), 'unique_words': len(set(forms))}
            for (codex, scribe), forms in groups.items()
        ]
        return pd.DataFrame.from_records(records, columns=['codex', 'scribe', 'words', 'unique_words'])
