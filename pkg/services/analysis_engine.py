# services/analysis_engine.py

import logging
from collections import Counter, OrderedDict
from typing import Iterable, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

import config
from errors import (
    BadHyperparameter, DegenerateInput, DuplicateLabel, EmptyClass, EmptyQuery, EmptyReference,
    InsufficientScribes, NotEnoughSegments, SingleUnit
)
from models import (
    AttributionReport, AttributionRow, EmbeddingResult, FeatureImportance, ForestParams, ImportanceReport,
    OutlierReport, OutlierRow, Segment
)
from services.feature_service import FeatureService
from services.learning_service import LearningService
from services.metrics_service import box_stats
from services.random_state import make_rng
from services.reduction_service import ReductionService

logger = logging.getLogger(__name__)

AGGREGATIONS = ('codex', 'unit')


def _score_unit(learner, train, test, nu, gamma):
    model = learner.ocsvm_train(train, nu=nu, gamma=gamma)
    labels, _ = learner.ocsvm_predict(model, test)
    return int((labels == 1).sum()), int((labels == -1).sum())


def _by_scribe(segments) -> 'OrderedDict[str, List[Segment]]':
    groups = OrderedDict()
    for segment in segments:
        groups.setdefault(segment.scribe, []).append(segment)
    return groups


class ScribalAnalysisEngine:
    """Scribe-profiling workflows: scatterplots, leave-one-unit-out outliers, MDI contrasts, kNN attribution.

    Every workflow fits its own bigram vocabulary on exactly the segments it analyses.
    """

    def __init__(self, feature_service=None, reduction_service=None, learning_service=None):
        self.features = feature_service or FeatureService()
        self.reduction = reduction_service or ReductionService()
        self.learning = learning_service or LearningService()

    # ---------------------- SCATTERPLOTS ----------------------
    def _embed(self, segments, top_k, pca_k, method, seed) -> EmbeddingResult:
        vocab, matrix = self.features.build_feature_matrix(segments, top_k)
        n, d = matrix.shape
        k = min(pca_k, n - 1, d)
        if k < 1:
            raise DegenerateInput(f'cannot project {n} segments x {d} features')
        if k < pca_k:
            logger.warning(f"PCA dimension clamped from {pca_k} to {k} for a {n}x{d} matrix")
        pca, scores = self.reduction.pca_fit_transform(matrix, k)
        result = self.reduction.embed_2d(scores, method=method, seed=seed, labels=list(matrix.rows))
        result.explained_variance_ratio = pca.explained_variance_ratio.tolist()
        logger.info(f"Embedded {n} segments ({d} bigrams, {k} components) with {method}")
        return result

    def scatter_analysis(self, segments: Iterable[Segment], min_segments: int = config.MIN_SEGMENTS,
                         pca_k: int = config.PCA_DIMS, method: str = config.EMBED_METHOD, seed: int = config.SEED,
                         top_k: int = config.TOP_K, exclude_codices: Sequence[str] = ()) -> EmbeddingResult:
        excluded = set(exclude_codices)
        groups = _by_scribe(s for s in segments if s.codex_id not in excluded)
        kept = []
        for scribe, scribe_segments in groups.items():
            if len(scribe_segments) < min_segments:
                logger.info(f"Dropping scribe '{scribe}': {len(scribe_segments)} < {min_segments} segments")
                continue
            kept.append(scribe)
        if len(kept) < 2:
            raise InsufficientScribes(f'{len(kept)} scribes have at least {min_segments} segments; 2 are needed')
        retained = [s for scribe in kept for s in groups[scribe]]
        return self._embed(retained, top_k, pca_k, method, seed)

    def pairwise_scatter(self, segments: Iterable[Segment], scribes: Sequence[str], **kwargs) -> EmbeddingResult:
        scribes = list(scribes)
        if len(set(scribes)) != len(scribes):
            raise DuplicateLabel(f'scribe labels repeat: {scribes}')
        if len(scribes) != 2:
            raise BadHyperparameter(f'pairwise scatter takes exactly 2 scribes, got {len(scribes)}')
        chosen = set(scribes)
        return self.scatter_analysis([s for s in segments if s.scribe in chosen], **kwargs)

    def downsampled_scatter(self, segments: Iterable[Segment], labels: Optional[Sequence[str]] = None,
                            n_per_scribe: Optional[int] = None, seed: int = config.SEED,
                            pca_k: int = config.PCA_DIMS, method: str = config.EMBED_METHOD,
                            top_k: int = config.TOP_K) -> EmbeddingResult:
        """Equal-size random samples per label, then the standard pipeline.

        Each label draws from its own stream seeded by (label, seed), so adding a label
        leaves the other samples unchanged. n_per_scribe defaults to the smallest label.
        """
        groups = _by_scribe(segments)
        labels = list(labels) if labels is not None else list(groups)
        if len(set(labels)) != len(labels):
            raise DuplicateLabel(f'labels repeat: {labels}')
        counts = {label: len(groups.get(label, [])) for label in labels}
        if n_per_scribe is None:
            n_per_scribe = min(counts.values()) if counts else 0
        if n_per_scribe < 1:
            raise BadHyperparameter(f'n_per_scribe must be >= 1, got {n_per_scribe}')

        sampled = []
        for label in labels:
            if counts[label] < n_per_scribe:
                raise NotEnoughSegments(label, counts[label], n_per_scribe)
            rng = make_rng(label, seed)
            picks = np.sort(rng.choice(counts[label], size=n_per_scribe, replace=False))
            sampled.extend(groups[label][i] for i in picks)
        logger.info(f"Downsampled {len(labels)} labels to {n_per_scribe} segments each")
        return self._embed(sampled, top_k, pca_k, method, seed)

    # ---------------------- OUTLIER DETECTION ----------------------
    def loo_outlier_analysis(self, segments: Iterable[Segment], scribe: str, nu: float = config.NU,
                             gamma=config.GAMMA, aggregate_by: str = 'codex', top_k: int = config.TOP_K,
                             seed: int = config.SEED, jobs: int = config.JOBS) -> OutlierReport:
        """Leave one production unit out: train on the scribe's other units, label this unit's segments"""
        if aggregate_by not in AGGREGATIONS:
            raise BadHyperparameter(f'aggregate_by must be one of {AGGREGATIONS}, got {aggregate_by!r}')
        own = [s for s in segments if s.scribe == scribe]
        unit_keys = list(OrderedDict.fromkeys(s.unit_key for s in own))
        if len(unit_keys) < 2:
            raise SingleUnit(f"scribe '{scribe}' has {len(unit_keys)} production units with segments; 2 are needed")

        _, matrix = self.features.build_feature_matrix(own, top_k)
        membership = np.array([unit_keys.index(s.unit_key) for s in own])
        counts = Parallel(n_jobs=jobs)(
            delayed(_score_unit)(self.learning, matrix.values[membership != i], matrix.values[membership == i], nu, gamma)
            for i in range(len(unit_keys))
        )

        unit_rows = [
            OutlierRow(codex_id=codex, unit_id=unit, n_segments=inliers + outliers, n_inliers=inliers, n_outliers=outliers)
            for (codex, unit), (inliers, outliers) in zip(unit_keys, counts)
        ]
        rows = unit_rows if aggregate_by == 'unit' else self._aggregate_codices(unit_rows)
        for row in unit_rows:
            logger.debug(f"{scribe} {row.codex_id} / {row.unit_id}: {row.n_outliers}/{row.n_segments} outliers")
        logger.info(f"Outlier analysis for '{scribe}': {len(unit_rows)} units, {len(own)} segments")
        params = {'nu': nu, 'gamma': gamma, 'top_k': top_k, 'seed': seed, 'n_features': matrix.shape[1]}
        return OutlierReport(scribe=scribe, rows=rows, aggregated_by=aggregate_by, params=params, unit_rows=unit_rows)

    def _aggregate_codices(self, unit_rows):
        codices = OrderedDict()
        for row in unit_rows:
            total = codices.setdefault(row.codex_id, OutlierRow(row.codex_id, '*', 0, 0, 0))
            total.n_segments += row.n_segments
            total.n_inliers += row.n_inliers
            total.n_outliers += row.n_outliers
        return list(codices.values())

    # ---------------------- FEATURE IMPORTANCE ----------------------
    def fit_importance_forest(self, segments: Sequence[Segment], target_codex: str, target_unit: Optional[str],
                              n_trees: int = config.N_TREES, seed: int = config.SEED, top_k: int = config.TOP_K,
                              jobs: int = config.JOBS):
        """(vocabulary, tf-idf matrix, target mask, forest) for a target-vs-rest split"""
        in_target = np.array([
            s.codex_id == target_codex and (target_unit is None or s.unit_id == target_unit) for s in segments
        ], dtype=bool)
        if not in_target.any():
            raise EmptyClass(f'target {target_codex} / {target_unit or "*"} has no segments')
        if in_target.all():
            raise EmptyClass('no segments outside the target')

        vocab, matrix = self.features.build_feature_matrix(segments, top_k)
        labels = np.where(in_target, 'target', 'rest')
        forest = self.learning.rf_train(matrix, labels, ForestParams(n_trees=n_trees, seed=seed, jobs=jobs))
        return vocab, matrix, in_target, forest

    def importance_analysis(self, segments: Iterable[Segment], target_codex: str, target_unit: Optional[str] = None,
                            scribe: Optional[str] = None, n_trees: int = config.N_TREES, seed: int = config.SEED,
                            top_m: int = config.TOP_M, top_k: int = config.TOP_K,
                            jobs: int = config.JOBS) -> ImportanceReport:
        """Random forest separating the target unit (or whole codex) from the rest, ranked by MDI"""
        own = [s for s in segments if scribe is None or s.scribe == scribe]
        vocab, matrix, in_target, forest = self.fit_importance_forest(own, target_codex, target_unit,
                                                                      n_trees, seed, top_k, jobs)
        mdi = self.learning.rf_mdi(forest)

        target_rows, rest_rows = matrix.values[in_target], matrix.values[~in_target]
        features = []
        for column in np.argsort(-mdi, kind='stable'):
            features.append(FeatureImportance(
                bigram=vocab.bigrams[column],
                mdi=float(mdi[column]),
                target_mean_tfidf=float(target_rows[:, column].mean()),
                rest_mean_tfidf=float(rest_rows[:, column].mean()),
                target_distribution=box_stats(target_rows[:, column]),
                rest_distribution=box_stats(rest_rows[:, column]),
            ))
        top = ', '.join(f.bigram.label for f in features[:3])
        logger.info(f"Importance for {target_codex} / {target_unit or '*'}: top bigrams {top}")
        params = {'n_trees': n_trees, 'seed': seed, 'top_k': top_k, 'scribe': scribe,
                  'n_target': int(in_target.sum()), 'n_rest': int((~in_target).sum())}
        return ImportanceReport(target=(target_codex, target_unit or '*'), features=features, top_m=top_m, params=params,
                                forest=forest)

    # ---------------------- ATTRIBUTION ----------------------
    def attribute_segments(self, segments: Iterable[Segment], query: str, references: Sequence[str],
                           k: int = config.KNN_K, top_k: int = config.TOP_K) -> AttributionReport:
        """Nearest-neighbour label for each query segment plus the majority verdict"""
        segments = list(segments)
        references = [r for r in OrderedDict.fromkeys(references) if r != query]
        query_segments = [s for s in segments if s.scribe == query]
        reference_segments = [s for s in segments if s.scribe in set(references)]
        if not query_segments:
            raise EmptyQuery(f"no segments for query label '{query}'")
        if not reference_segments:
            raise EmptyReference(f'no segments for reference labels {references}')

        _, matrix = self.features.build_feature_matrix(reference_segments + query_segments, top_k)
        n_ref = len(reference_segments)
        predicted, distances = self.learning.knn_classify_many(
            matrix.values[:n_ref], [s.scribe for s in reference_segments], matrix.values[n_ref:], k)

        votes = Counter(predicted)
        rank = {label: i for i, label in enumerate(references)}
        verdict = min(votes, key=lambda label: (-votes[label], rank[label]))
        rows = [
            AttributionRow(segment_id=s.segment_id, predicted=label, distance=float(d))
            for s, label, d in zip(query_segments, predicted, distances)
        ]
        agreement = votes[verdict] / len(rows)
        logger.info(f"Attribution of '{query}': {verdict} ({votes[verdict]}/{len(rows)} segments)")
        return AttributionReport(query=query, references=references, rows=rows, verdict=verdict,
                                 agreement=agreement, k=k)
