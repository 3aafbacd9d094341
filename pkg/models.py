# models.py

import json
import unicodedata
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Tuple

import numpy as np
import pandas as pd

from errors import InvalidInventory, InvalidProfile

ScribeLabel = str

_BASIC_LETTERS = frozenset(ord(c) for c in 'abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ')


class ClusterClass(str, Enum):
    LETTER = 'letter'
    BREVIGRAPH = 'brevigraph'
    WHITESPACE = 'whitespace'
    OTHER = 'other'


@dataclass(frozen=True)
class GraphemeCluster:
    text: str
    cls: ClusterClass

    @property
    def code_points(self):
        return tuple(ord(c) for c in self.text)

    @property
    def is_whitespace(self):
        return self.cls == ClusterClass.WHITESPACE

    @property
    def is_brevigraph(self):
        return self.cls == ClusterClass.BREVIGRAPH


@dataclass(frozen=True)
class BrevigraphInventory:
    code_points: FrozenSet[int] = frozenset()
    combining_marks: FrozenSet[int] = frozenset()
    pua_ranges: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        clash = (self.code_points | self.combining_marks) & _BASIC_LETTERS
        if clash:
            listed = ', '.join(sorted(chr(cp) for cp in clash))
            raise InvalidInventory(f'inventory lists basic letters: {listed}')
        for lo, hi in self.pua_ranges:
            if lo > hi:
                raise InvalidInventory(f'range U+{lo:04X}..U+{hi:04X} is not well-ordered')
            if lo <= ord('z') and hi >= ord('A'):
                raise InvalidInventory(f'range U+{lo:04X}..U+{hi:04X} overlaps basic letters')

    def contains(self, cp):
        if cp in self.code_points or cp in self.combining_marks:
            return True
        return any(lo <= cp <= hi for lo, hi in self.pua_ranges)

    def protects(self, cp):
        """Explicitly listed marks survive punctuation removal"""
        return cp in self.code_points or cp in self.combining_marks

    def matches(self, text):
        """True when the cluster, or either canonical form of it, holds an inventory code point"""
        if any(self.contains(ord(c)) for c in text):
            return True
        for form in ('NFC', 'NFD'):
            normalized = unicodedata.normalize(form, text)
            if normalized != text and any(self.contains(ord(c)) for c in normalized):
                return True
        return False

    @classmethod
    def from_dict(cls, data):
        try:
            code_points = frozenset(int(h, 16) for h in data.get('code_points', []))
            combining = frozenset(int(h, 16) for h in data.get('combining_marks', []))
            ranges = tuple((int(lo, 16), int(hi, 16)) for lo, hi in data.get('pua_ranges', []))
        except (TypeError, ValueError, AttributeError) as e:
            raise InvalidInventory(f'inventory entries must be hex strings: {e}')
        return cls(code_points=code_points, combining_marks=combining, pua_ranges=ranges)

    def to_dict(self):
        return {
            'code_points': [f'{cp:04X}' for cp in sorted(self.code_points)],
            'combining_marks': [f'{cp:04X}' for cp in sorted(self.combining_marks)],
            'pua_ranges': [[f'{lo:04X}', f'{hi:04X}'] for lo, hi in self.pua_ranges],
        }


# --- Corpus ---

@dataclass(frozen=True)
class ManifestEntry:
    file_path: str
    codex_id: str
    unit_id: str
    scribe: ScribeLabel
    date_range: Optional[Tuple[int, int]] = None
    notes: Optional[str] = None


@dataclass(frozen=True)
class Manifest:
    entries: Tuple[ManifestEntry, ...]
    base_dir: str = '.'

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def scribes(self):
        return list(dict.fromkeys(e.scribe for e in self.entries))


@dataclass(frozen=True)
class ProductionUnitDoc:
    codex_id: str
    unit_id: str
    scribe: ScribeLabel
    clusters: Tuple[GraphemeCluster, ...]
    date_range: Optional[Tuple[int, int]] = None

    @property
    def text(self):
        return ''.join(c.text for c in self.clusters)

    @property
    def unit_key(self):
        return (self.codex_id, self.unit_id)


@dataclass(frozen=True, order=True)
class SegmentKey:
    codex_id: str
    unit_id: str
    scribe: ScribeLabel
    index: int

    @property
    def segment_id(self):
        return f'{self.codex_id}|{self.unit_id}|{self.index}'


@dataclass(frozen=True)
class Segment:
    codex_id: str
    unit_id: str
    scribe: ScribeLabel
    index: int
    clusters: Tuple[GraphemeCluster, ...]

    @property
    def key(self):
        return SegmentKey(self.codex_id, self.unit_id, self.scribe, self.index)

    @property
    def segment_id(self):
        return self.key.segment_id

    @property
    def unit_key(self):
        return (self.codex_id, self.unit_id)

    @property
    def text(self):
        return ''.join(c.text for c in self.clusters)


# --- Metrics ---

@dataclass
class DensityRow:
    key: str
    n_documents: int
    n_samples: int
    mean_density_char: float
    mean_density_word: float
    per_sample_densities: List[float]
    box: Dict[str, float]


@dataclass
class DensityReport:
    group_key: str
    level: str
    rows: List[DensityRow]
    sample: str = 'segment'
    pooled: bool = False

    def to_frame(self):
        records = []
        for row in self.rows:
            record = {
                'key': row.key,
                'n_documents': row.n_documents,
                'n_samples': row.n_samples,
                'mean_density_char': row.mean_density_char,
                'mean_density_word': row.mean_density_word,
            }
            record.update(row.box)
            record['per_sample_densities'] = json.dumps(row.per_sample_densities)
            records.append(record)
        columns = ['key', 'n_documents', 'n_samples', 'mean_density_char', 'mean_density_word',
                   'min', 'q1', 'median', 'q3', 'max', 'per_sample_densities']
        return pd.DataFrame.from_records(records, columns=columns)

    def to_dict(self):
        return {
            'group_key': self.group_key,
            'level': self.level,
            'sample': self.sample,
            'pooled': self.pooled,
            'rows': [asdict(r) for r in self.rows],
        }


# --- Features ---

@dataclass(frozen=True, order=True)
class Bigram:
    first: str
    second: str
    brevigraph: bool = field(default=False, compare=False)

    @property
    def label(self):
        return f'{self.first}{self.second}'.replace(' ', '_')


@dataclass(frozen=True)
class Vocabulary:
    bigrams: Tuple[Bigram, ...]
    counts: Tuple[int, ...]

    def __len__(self):
        return len(self.bigrams)

    def __iter__(self):
        return iter(self.bigrams)

    @property
    def labels(self):
        return [b.label for b in self.bigrams]

    def to_records(self):
        return [{'bigram': b.label, 'first': b.first, 'second': b.second, 'count': c}
                for b, c in zip(self.bigrams, self.counts)]


@dataclass(frozen=True)
class FeatureMatrix:
    rows: Tuple[SegmentKey, ...]
    columns: Tuple[Bigram, ...]
    values: np.ndarray
    weighting: str = 'raw'

    def __post_init__(self):
        if self.values.shape != (len(self.rows), len(self.columns)):
            raise ValueError(f'values shape {self.values.shape} does not match '
                             f'{len(self.rows)} rows x {len(self.columns)} columns')

    @property
    def shape(self):
        return self.values.shape

    def subset(self, mask):
        mask = np.asarray(mask, dtype=bool)
        rows = tuple(r for r, keep in zip(self.rows, mask) if keep)
        return FeatureMatrix(rows, self.columns, self.values[mask], self.weighting)

    def to_frame(self):
        frame = pd.DataFrame(self.values, columns=[b.label for b in self.columns])
        frame.insert(0, 'segment', [r.segment_id for r in self.rows])
        return frame


# --- Reduction ---

@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    explained_variance_ratio: np.ndarray

    @property
    def n_components(self):
        return self.components.shape[0]


@dataclass
class EmbeddingResult:
    coords: np.ndarray
    labels: List[SegmentKey]
    method: str
    seed: int
    explained_variance_ratio: Optional[List[float]] = None

    def to_frame(self):
        return pd.DataFrame({
            'x': self.coords[:, 0],
            'y': self.coords[:, 1],
            'scribe': [k.scribe for k in self.labels],
            'codex': [k.codex_id for k in self.labels],
            'unit': [k.unit_id for k in self.labels],
            'segment': [k.index for k in self.labels],
        })

    def to_dict(self):
        return {
            'method': self.method,
            'seed': self.seed,
            'n_rows': len(self.labels),
            'explained_variance_ratio': self.explained_variance_ratio,
            'scribes': sorted(set(k.scribe for k in self.labels)),
        }


# --- Learners ---

@dataclass(frozen=True)
class OcsvmModel:
    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    rho: float
    gamma: float
    nu: float
    n_train: int


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 200
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    features_per_split: Optional[int] = None
    bootstrap: bool = True
    seed: int = 42
    jobs: int = 1


@dataclass(frozen=True)
class TreeArrays:
    children_left: np.ndarray
    children_right: np.ndarray
    feature: np.ndarray
    threshold: np.ndarray
    impurity: np.ndarray
    weighted_samples: np.ndarray
    class_counts: np.ndarray

    @property
    def node_count(self):
        return len(self.feature)


@dataclass(frozen=True)
class ForestModel:
    trees: Tuple[TreeArrays, ...]
    params: ForestParams
    classes: Tuple
    n_features: int


# --- Analysis reports ---

@dataclass
class OutlierRow:
    codex_id: str
    unit_id: str
    n_segments: int
    n_inliers: int
    n_outliers: int

    @property
    def outlier_fraction(self):
        return self.n_outliers / self.n_segments if self.n_segments else 0.0


@dataclass
class OutlierReport:
    scribe: ScribeLabel
    rows: List[OutlierRow]
    aggregated_by: str
    params: Dict
    unit_rows: List[OutlierRow] = field(default_factory=list)

    def to_frame(self):
        return pd.DataFrame.from_records([
            {
                'scribe': self.scribe,
                'codex': r.codex_id,
                'unit': r.unit_id,
                'n_segments': r.n_segments,
                'n_inliers': r.n_inliers,
                'n_outliers': r.n_outliers,
                'outlier_fraction': r.outlier_fraction,
            } for r in self.rows
        ], columns=['scribe', 'codex', 'unit', 'n_segments', 'n_inliers', 'n_outliers', 'outlier_fraction'])

    def to_dict(self):
        def row_dict(r):
            d = asdict(r)
            d['outlier_fraction'] = r.outlier_fraction
            return d
        return {
            'scribe': self.scribe,
            'aggregated_by': self.aggregated_by,
            'params': self.params,
            'rows': [row_dict(r) for r in self.rows],
            'unit_rows': [row_dict(r) for r in self.unit_rows],
        }


@dataclass
class FeatureImportance:
    bigram: Bigram
    mdi: float
    target_mean_tfidf: float
    rest_mean_tfidf: float
    target_distribution: Dict[str, float]
    rest_distribution: Dict[str, float]


@dataclass
class ImportanceReport:
    target: Tuple[str, str]
    features: List[FeatureImportance]
    top_m: int
    params: Dict
    forest: Optional[ForestModel] = field(default=None, repr=False, compare=False)

    def top(self, m=None):
        return self.features[:m or self.top_m]

    def to_frame(self):
        records = []
        for rank, f in enumerate(self.features, start=1):
            record = {
                'rank': rank,
                'bigram': f.bigram.label,
                'mdi': f.mdi,
                'target_mean_tfidf': f.target_mean_tfidf,
                'rest_mean_tfidf': f.rest_mean_tfidf,
            }
            record.update({f'target_{k}': v for k, v in f.target_distribution.items()})
            record.update({f'rest_{k}': v for k, v in f.rest_distribution.items()})
            records.append(record)
        return pd.DataFrame.from_records(records)

    def to_dict(self):
        return {
            'target': {'codex': self.target[0], 'unit': self.target[1]},
            'top_m': self.top_m,
            'params': self.params,
            'features': [
                {
                    'bigram': f.bigram.label,
                    'mdi': f.mdi,
                    'target_mean_tfidf': f.target_mean_tfidf,
                    'rest_mean_tfidf': f.rest_mean_tfidf,
                    'target_distribution': f.target_distribution,
                    'rest_distribution': f.rest_distribution,
                } for f in self.features
            ],
        }


@dataclass
class AttributionRow:
    segment_id: str
    predicted: ScribeLabel
    distance: float


@dataclass
class AttributionReport:
    query: ScribeLabel
    references: List[ScribeLabel]
    rows: List[AttributionRow]
    verdict: ScribeLabel
    agreement: float
    k: int

    def to_frame(self):
        return pd.DataFrame.from_records([asdict(r) for r in self.rows],
                                         columns=['segment_id', 'predicted', 'distance'])

    def to_dict(self):
        return {
            'query': self.query,
            'references': self.references,
            'k': self.k,
            'verdict': self.verdict,
            'agreement': self.agreement,
            'rows': [asdict(r) for r in self.rows],
        }


# --- Synthetic corpora ---

@dataclass(frozen=True)
class AbbreviationRule:
    full: str
    abbreviated: str
    probability: float


@dataclass(frozen=True)
class HabitProfile:
    base_lexicon: Tuple[str, ...]
    abbreviation_rules: Tuple[AbbreviationRule, ...] = ()
    target_density_char: Optional[float] = None
    seed: int = 0
    name: str = 'profile'

    def __post_init__(self):
        for rule in self.abbreviation_rules:
            if not 0.0 <= rule.probability <= 1.0:
                raise InvalidProfile(f"rule {rule.full!r} -> {rule.abbreviated!r} has probability {rule.probability}")
        if self.target_density_char is not None and not 0.0 <= self.target_density_char <= 1.0:
            raise InvalidProfile(f'target_density_char must lie in [0, 1], got {self.target_density_char}')

    @classmethod
    def from_dict(cls, data):
        try:
            rules = tuple(
                AbbreviationRule(r['full'], r['abbreviated'], float(r['probability']))
                for r in data.get('abbreviation_rules', [])
            )
            return cls(
                base_lexicon=tuple(data.get('base_lexicon', [])),
                abbreviation_rules=rules,
                target_density_char=data.get('target_density_char'),
                seed=int(data.get('seed', 0)),
                name=data.get('name', 'profile'),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidProfile(f'malformed habit profile: {e}')
