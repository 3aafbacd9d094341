# services/feature_service.py

import logging
from collections import Counter
from typing import List, Sequence, Tuple

import numpy as np
from sklearn.feature_extraction.text import CountVectorizer, TfidfTransformer

import config
from errors import BadHyperparameter, EmptyVocabulary
from models import Bigram, FeatureMatrix, Segment, Vocabulary

logger = logging.getLogger(__name__)


def _cluster_text(cluster):
    return ' ' if cluster.is_whitespace else cluster.text


class FeatureService:
    def iter_bigrams(self, segment: Segment):
        clusters = segment.clusters
        for left, right in zip(clusters, clusters[1:]):
            yield Bigram(_cluster_text(left), _cluster_text(right),
                         brevigraph=left.is_brevigraph or right.is_brevigraph)

    def extract_bigrams(self, segment: Segment) -> Counter:
        """All consecutive cluster pairs of one segment (n_clusters - 1 of them)"""
        return Counter(self.iter_bigrams(segment))

    def filter_brevigraph_bigrams(self, bigrams: Counter) -> Counter:
        return Counter({b: n for b, n in bigrams.items() if b.brevigraph})

    def brevigraph_bigrams(self, segment: Segment) -> List[Bigram]:
        """Filtered bigram occurrences in reading order"""
        return [b for b in self.iter_bigrams(segment) if b.brevigraph]

    def build_vocab(self, segments: Sequence[Segment], k: int = config.TOP_K) -> Vocabulary:
        """The k most frequent brevigraph bigrams; ties go to the lower code-point sequence"""
        if k < 1:
            raise BadHyperparameter(f'k must be >= 1, got {k}')
        totals = Counter()
        for segment in segments:
            totals.update(self.brevigraph_bigrams(segment))
        ranked = sorted(totals.items(), key=lambda item: (-item[1], item[0].first + item[0].second, item[0].first))
        kept = ranked[:k]
        logger.info(f"Vocabulary: kept {len(kept)} of {len(totals)} brevigraph bigrams")
        return Vocabulary(bigrams=tuple(b for b, _ in kept), counts=tuple(n for _, n in kept))

    def vectorize(self, segments: Sequence[Segment], vocab: Vocabulary) -> FeatureMatrix:
        """Raw counts of each vocabulary bigram per segment"""
        if len(vocab) == 0:
            raise EmptyVocabulary('vocabulary is empty; no bigram holds a brevigraph')
        vectorizer = CountVectorizer(
            analyzer=self.brevigraph_bigrams,
            lowercase=False,
            vocabulary={b: i for i, b in enumerate(vocab.bigrams)},
        )
        if segments:
            counts = vectorizer.fit_transform(segments).toarray().astype(np.float64)
        else:
            counts = np.zeros((0, len(vocab)))
        return FeatureMatrix(
            rows=tuple(s.key for s in segments),
            columns=vocab.bigrams,
            values=counts,
            weighting='raw',
        )

    def tfidf(self, matrix: FeatureMatrix) -> FeatureMatrix:
        """count * (ln((1 + N) / (1 + df)) + 1), then L2-normalised rows; zero rows stay zero"""
        if matrix.weighting != 'raw':
            raise ValueError(f'tfidf expects raw counts, got {matrix.weighting} weighting')
        transformer = TfidfTransformer(norm='l2', use_idf=True, smooth_idf=True, sublinear_tf=False)
        weighted = transformer.fit_transform(matrix.values)
        if hasattr(weighted, 'toarray'):
            weighted = weighted.toarray()
        return FeatureMatrix(rows=matrix.rows, columns=matrix.columns, values=weighted, weighting='tfidf')

    def build_feature_matrix(self, segments: Sequence[Segment], k: int = config.TOP_K) -> Tuple[Vocabulary, FeatureMatrix]:
        """Vocabulary fitted on exactly these segments, then TF-IDF weights"""
        vocab = self.build_vocab(segments, k)
        raw = self.vectorize(segments, vocab)
        return vocab, self.tfidf(raw)
