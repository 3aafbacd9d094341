# services/reduction_service.py

import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy import sparse
from sklearn.decomposition import PCA
from sklearn.neighbors import NearestNeighbors

import config
from errors import ConfigError, DegenerateInput
from models import EmbeddingResult, FeatureMatrix, PcaModel, SegmentKey

logger = logging.getLogger(__name__)


def _as_array(data):
    values = data.values if isinstance(data, FeatureMatrix) else data
    return np.asarray(values, dtype=np.float64)


class ReductionService:
    def __init__(self):
        self.n_neighbors = config.EMBED_NEIGHBORS
        self.n_epochs = config.EMBED_EPOCHS
        self.learning_rate = config.EMBED_LEARNING_RATE
        self.negative_samples = config.EMBED_NEGATIVE_SAMPLES

    # ---------------------- PCA ----------------------
    def pca_fit_transform(self, matrix, k: int = config.PCA_DIMS) -> Tuple[PcaModel, np.ndarray]:
        """Mean-centred projection on the top-k principal axes.

        Each axis is oriented so that its largest-magnitude loading is positive.
        """
        X = _as_array(matrix)
        if X.ndim != 2 or X.shape[0] < 2:
            raise DegenerateInput(f'PCA needs at least 2 rows, got shape {X.shape}')
        n, d = X.shape
        max_k = min(n - 1, d)
        if not 1 <= k <= max_k:
            raise DegenerateInput(f'k={k} outside 1..{max_k} for a {n}x{d} matrix')

        pca = PCA(n_components=k, svd_solver='full')
        pca.fit(X)
        components = pca.components_.copy()
        pivots = np.argmax(np.abs(components), axis=1)
        signs = np.sign(components[np.arange(k), pivots])
        signs[signs == 0] = 1.0
        components *= signs[:, None]

        model = PcaModel(
            mean=pca.mean_.copy(),
            components=components,
            explained_variance=pca.explained_variance_.copy(),
            explained_variance_ratio=pca.explained_variance_ratio_.copy(),
        )
        return model, self.transform(model, X)

    def transform(self, model: PcaModel, X) -> np.ndarray:
        return (_as_array(X) - model.mean) @ model.components.T

    def reconstruct(self, model: PcaModel, scores) -> np.ndarray:
        return model.mean + np.asarray(scores, dtype=np.float64) @ model.components

    # ---------------------- 2-D EMBEDDING ----------------------
    def embed_2d(self, scores, method: str = config.EMBED_METHOD, seed: int = config.SEED,
                 labels: Optional[List[SegmentKey]] = None) -> EmbeddingResult:
        Y = _as_array(scores)
        if Y.ndim != 2 or Y.shape[0] < 1:
            raise DegenerateInput(f'cannot embed an array of shape {Y.shape}')
        if labels is None:
            labels = [SegmentKey('', '', '', i) for i in range(Y.shape[0])]
        if len(labels) != Y.shape[0]:
            raise DegenerateInput(f'{len(labels)} labels for {Y.shape[0]} rows')

        if method == 'pca2d':
            coords = self._leading_two(Y)
        elif method == 'neighbor':
            if Y.shape[0] < 3:
                raise DegenerateInput(f'neighbor embedding needs at least 3 rows, got {Y.shape[0]}')
            coords = self._neighbor_embedding(Y, seed)
        else:
            raise ConfigError(f'unknown embedding method {method!r}')

        if not np.all(np.isfinite(coords)):
            raise DegenerateInput(f'{method} embedding produced non-finite coordinates')
        return EmbeddingResult(coords=coords, labels=list(labels), method=method, seed=seed)

    def _leading_two(self, Y):
        coords = np.zeros((Y.shape[0], 2))
        width = min(2, Y.shape[1])
        coords[:, :width] = Y[:, :width]
        return coords

    def _fuzzy_graph(self, Y):
        """Symmetrised k-NN membership strengths (fuzzy union of directed neighbourhoods)"""
        n = Y.shape[0]
        k = min(self.n_neighbors, n - 1)
        distances, indices = NearestNeighbors(n_neighbors=k).fit(Y).kneighbors()

        rho = distances[:, 0]
        gaps = np.maximum(distances - rho[:, None], 0.0)
        target = np.log2(k + 1)
        lo = np.zeros(n)
        hi = np.full(n, np.inf)
        sigma = np.ones(n)
        for _ in range(64):
            mass = np.exp(-gaps / sigma[:, None]).sum(axis=1)
            too_wide = mass > target
            hi = np.where(too_wide, sigma, hi)
            lo = np.where(too_wide, lo, sigma)
            sigma = np.where(np.isinf(hi), sigma * 2.0, (lo + hi) / 2.0)
        floor = 1e-3 * distances.mean() if distances.mean() > 0 else 1e-12
        sigma = np.maximum(sigma, floor)

        weights = np.exp(-gaps / sigma[:, None])
        rows = np.repeat(np.arange(n), k)
        directed = sparse.csr_matrix((weights.ravel(), (rows, indices.ravel())), shape=(n, n))
        graph = (directed + directed.T - directed.multiply(directed.T)).tocsr()
        graph.eliminate_zeros()
        graph.sort_indices()
        return graph.tocoo()

    def _initial_layout(self, Y, rng):
        layout = self._leading_two(Y)
        layout -= layout.mean(axis=0)
        spread = np.abs(layout).max()
        if spread == 0:
            return rng.normal(scale=1e-2, size=layout.shape)
        return layout * (10.0 / spread)

    def _neighbor_embedding(self, Y, seed):
        """Rows are laid out in lexicographic order of their values and mapped back afterwards,
        so the coordinates follow the rows when the input is permuted."""
        order = np.lexsort(Y.T[::-1])
        layout = self._force_layout(Y[order], seed)
        coords = np.empty_like(layout)
        coords[order] = layout
        return coords

    def _force_layout(self, Y, seed):
        """Attractive forces along k-NN edges, repulsion from negative samples; 1/(1 + d^2) kernel"""
        rng = np.random.default_rng(seed)
        n = Y.shape[0]
        graph = self._fuzzy_graph(Y)
        heads, tails, weights = graph.row, graph.col, graph.data
        embedding = self._initial_layout(Y, rng)

        edge_counts = np.maximum(np.bincount(heads, minlength=n), 1)
        neg_heads = np.repeat(heads, self.negative_samples)
        neg_counts = np.maximum(np.bincount(neg_heads, minlength=n), 1)

        for epoch in range(self.n_epochs):
            alpha = self.learning_rate * (1.0 - epoch / self.n_epochs)

            diff = embedding[heads] - embedding[tails]
            dist2 = np.einsum('ij,ij->i', diff, diff)
            pull = np.clip((-2.0 / (1.0 + dist2))[:, None] * diff, -4.0, 4.0) * weights[:, None]

            neg_tails = rng.integers(0, n, size=neg_heads.size)
            diff = embedding[neg_heads] - embedding[neg_tails]
            dist2 = np.einsum('ij,ij->i', diff, diff)
            push = np.clip((2.0 / ((0.001 + dist2) * (1.0 + dist2)))[:, None] * diff, -4.0, 4.0)
            push[neg_heads == neg_tails] = 0.0

            step = np.zeros_like(embedding)
            for axis in range(2):
                step[:, axis] = (np.bincount(heads, weights=pull[:, axis], minlength=n) / edge_counts
                                 + np.bincount(neg_heads, weights=push[:, axis], minlength=n) / neg_counts)
            embedding += alpha * step

        logger.debug(f"Neighbor embedding: {n} points, {len(heads)} edges, {self.n_epochs} epochs")
        return embedding
