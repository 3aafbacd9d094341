# services/learning_service.py

import json
import math
import logging
from collections import OrderedDict
from dataclasses import asdict
from typing import Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.ensemble import RandomForestClassifier
from sklearn.metrics.pairwise import rbf_kernel
from sklearn.svm import OneClassSVM

import config
from errors import (
    BadHyperparameter, DegenerateInput, DimensionMismatch, EmptyTrainingSet, NonFiniteInput, SingleClassInput
)
from models import FeatureMatrix, ForestModel, ForestParams, OcsvmModel, TreeArrays

logger = logging.getLogger(__name__)

MODEL_FORMAT = 'scribeflow-model'
MODEL_VERSION = 1
# decision values this close to zero count as ties (inlier)
DECISION_TIE = 1e-12


def _matrix(X, name='X'):
    values = X.values if isinstance(X, FeatureMatrix) else X
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values.reshape(1, -1)
    if values.ndim != 2:
        raise DimensionMismatch(f'{name} must be 2-dimensional, got shape {values.shape}')
    if not np.all(np.isfinite(values)):
        raise NonFiniteInput(f'{name} contains NaN or infinite values')
    return values


def scale_gamma(X) -> float:
    """1 / (d * var(X)); 1.0 when X has no variance"""
    variance = float(X.var())
    return 1.0 / (X.shape[1] * variance) if variance > 0 else 1.0


class LearningService:
    # ---------------------- ONE-CLASS SVM ----------------------
    def ocsvm_train(self, X, nu: float = config.NU, gamma=config.GAMMA) -> OcsvmModel:
        """Fit an RBF one-class SVM.

        The dual is solved by libsvm's SMO; coefficients are rescaled so they sum to 1
        (the box becomes 0 <= a_i <= 1/(nu*n)), and rho with them.
        """
        if not 0 < nu <= 1:
            raise BadHyperparameter(f'nu must lie in (0, 1], got {nu}')
        X = _matrix(X)
        n = X.shape[0]
        if n < 2:
            raise DegenerateInput(f'one-class SVM needs at least 2 training rows, got {n}')
        if gamma == 'scale':
            gamma = scale_gamma(X)
        elif not isinstance(gamma, (int, float)) or gamma <= 0:
            raise BadHyperparameter(f"gamma must be 'scale' or a positive number, got {gamma!r}")
        if nu == 1:
            return self._ocsvm_full_box(X, float(gamma))

        svm = OneClassSVM(kernel='rbf', gamma=float(gamma), nu=nu,
                          tol=config.OCSVM_TOL, max_iter=config.OCSVM_MAX_ITER)
        svm.fit(X)
        raw = svm.dual_coef_.ravel()
        total = raw.sum()
        model = OcsvmModel(
            support_vectors=svm.support_vectors_.copy(),
            dual_coefs=raw / total,
            rho=float(svm.offset_[0]) / total,
            gamma=float(gamma),
            nu=nu,
            n_train=n,
        )
        logger.debug(f"OCSVM: {n} rows, {len(raw)} support vectors, gamma={model.gamma:.4g}")
        return model

    def _ocsvm_full_box(self, X, gamma) -> OcsvmModel:
        """nu = 1 pins every coefficient at the bound 1/n; rho is the smallest training score"""
        n = X.shape[0]
        dual = np.full(n, 1.0 / n)
        rho = float((rbf_kernel(X, X, gamma=gamma) @ dual).min())
        logger.debug(f"OCSVM: nu=1, all {n} rows are support vectors")
        return OcsvmModel(support_vectors=X.copy(), dual_coefs=dual, rho=rho, gamma=gamma, nu=1.0, n_train=n)

    def ocsvm_decision(self, model: OcsvmModel, X) -> np.ndarray:
        X = _matrix(X)
        if X.shape[1] != model.support_vectors.shape[1]:
            raise DimensionMismatch(f'model expects {model.support_vectors.shape[1]} columns, got {X.shape[1]}')
        decision = rbf_kernel(X, model.support_vectors, gamma=model.gamma) @ model.dual_coefs - model.rho
        decision[np.abs(decision) <= DECISION_TIE] = 0.0
        return decision

    def ocsvm_predict(self, model: OcsvmModel, X) -> Tuple[np.ndarray, np.ndarray]:
        """(+1 inlier / -1 outlier per row, decision values); a zero decision is an inlier"""
        decision = self.ocsvm_decision(model, X)
        return np.where(decision >= 0, 1, -1), decision

    # ---------------------- RANDOM FOREST ----------------------
    def rf_train(self, X, y: Sequence, params: ForestParams = ForestParams()) -> ForestModel:
        X = _matrix(X)
        y = np.asarray(y)
        if len(y) != X.shape[0]:
            raise DimensionMismatch(f'{len(y)} labels for {X.shape[0]} rows')
        classes = np.unique(y)
        if len(classes) < 2:
            raise SingleClassInput(f'random forest needs two classes, got {classes.tolist()}')
        if params.n_trees < 1:
            raise BadHyperparameter(f'n_trees must be >= 1, got {params.n_trees}')

        n_features = X.shape[1]
        forest = RandomForestClassifier(
            n_estimators=params.n_trees,
            criterion='gini',
            max_depth=params.max_depth,
            min_samples_split=params.min_samples_split,
            max_features=params.features_per_split or math.ceil(math.sqrt(n_features)),
            bootstrap=params.bootstrap,
            random_state=params.seed,
            n_jobs=params.jobs,
        )
        forest.fit(X, y)
        trees = tuple(self._tree_arrays(estimator.tree_) for estimator in forest.estimators_)
        logger.info(f"Random forest: {len(trees)} trees on {X.shape[0]} rows x {n_features} features")
        return ForestModel(trees=trees, params=params, classes=tuple(forest.classes_.tolist()), n_features=n_features)

    def _tree_arrays(self, tree) -> TreeArrays:
        values = tree.value[:, 0, :].astype(np.float64)
        totals = values.sum(axis=1, keepdims=True)
        totals[totals == 0] = 1.0
        weighted = tree.weighted_n_node_samples.astype(np.float64)
        return TreeArrays(
            children_left=tree.children_left.copy(),
            children_right=tree.children_right.copy(),
            feature=tree.feature.copy(),
            threshold=tree.threshold.copy(),
            impurity=tree.impurity.copy(),
            weighted_samples=weighted,
            class_counts=values / totals * weighted[:, None],
        )

    def rf_mdi(self, forest: ForestModel) -> np.ndarray:
        """Weighted Gini decrease per feature, averaged over trees, normalised to sum 1"""
        importances = np.zeros(forest.n_features)
        for tree in forest.trees:
            internal = np.flatnonzero(tree.children_left != -1)
            if internal.size == 0:
                continue
            left = tree.children_left[internal]
            right = tree.children_right[internal]
            w, imp = tree.weighted_samples, tree.impurity
            decrease = w[internal] * imp[internal] - w[left] * imp[left] - w[right] * imp[right]
            per_feature = np.bincount(tree.feature[internal], weights=decrease, minlength=forest.n_features)
            importances += per_feature / w[0]
        importances /= len(forest.trees)
        total = importances.sum()
        return importances / total if total > 0 else importances

    def forest_predict(self, forest: ForestModel, X) -> np.ndarray:
        X = _matrix(X)
        if X.shape[1] != forest.n_features:
            raise DimensionMismatch(f'forest expects {forest.n_features} columns, got {X.shape[1]}')
        rows = np.arange(X.shape[0])
        proba = np.zeros((X.shape[0], len(forest.classes)))
        for tree in forest.trees:
            node = np.zeros(X.shape[0], dtype=np.intp)
            while True:
                inner = tree.children_left[node] != -1
                if not inner.any():
                    break
                current = node[inner]
                go_left = X[rows[inner], tree.feature[current]] <= tree.threshold[current]
                node[inner] = np.where(go_left, tree.children_left[current], tree.children_right[current])
            leaf = tree.class_counts[node]
            proba += leaf / leaf.sum(axis=1, keepdims=True)
        return np.asarray(forest.classes, dtype=object)[np.argmax(proba, axis=1)]

    # ---------------------- NEAREST NEIGHBOURS ----------------------
    def _vote(self, labels, distances):
        tally = OrderedDict()
        for label, distance in zip(labels, distances):
            votes, summed = tally.get(label, (0, 0.0))
            tally[label] = (votes + 1, summed + distance)
        return min(tally, key=lambda label: (-tally[label][0], tally[label][1]))

    def _check_knn(self, train_X, train_y, k):
        train_X = np.asarray(train_X.values if isinstance(train_X, FeatureMatrix) else train_X, dtype=np.float64)
        if train_X.size == 0 or len(train_y) == 0:
            raise EmptyTrainingSet('no training rows')
        train_X = _matrix(train_X, 'train_X')
        if len(train_y) != train_X.shape[0]:
            raise DimensionMismatch(f'{len(train_y)} labels for {train_X.shape[0]} training rows')
        if k < 1 or k > train_X.shape[0]:
            raise BadHyperparameter(f'k must lie in 1..{train_X.shape[0]}, got {k}')
        return train_X

    def knn_classify_many(self, train_X, train_y: Sequence, X, k: int = config.KNN_K):
        """Majority label among the k nearest training rows for each query row.

        Vote ties go to the smaller summed distance, then to the label seen first.
        Returns (labels, distance to the nearest training row).
        """
        train_X = self._check_knn(train_X, train_y, k)
        X = _matrix(X)
        if X.shape[1] != train_X.shape[1]:
            raise DimensionMismatch(f'training rows have {train_X.shape[1]} columns, query has {X.shape[1]}')
        train_y = list(train_y)
        distances = cdist(X, train_X)
        labels, nearest = [], []
        for row in distances:
            order = np.argsort(row, kind='stable')[:k]
            labels.append(self._vote([train_y[i] for i in order], row[order]))
            nearest.append(float(row[order[0]]))
        return labels, np.asarray(nearest)

    def knn_classify(self, train_X, train_y: Sequence, x, k: int = config.KNN_K):
        labels, _ = self.knn_classify_many(train_X, train_y, np.asarray(x, dtype=np.float64).reshape(1, -1), k)
        return labels[0]

    # ---------------------- SERIALIZATION ----------------------
    def model_to_json(self, model) -> str:
        if isinstance(model, OcsvmModel):
            payload = {
                'kind': 'ocsvm',
                'support_vectors': model.support_vectors.tolist(),
                'dual_coefs': model.dual_coefs.tolist(),
                'rho': model.rho,
                'gamma': model.gamma,
                'nu': model.nu,
                'n_train': model.n_train,
            }
        elif isinstance(model, ForestModel):
            payload = {
                'kind': 'forest',
                'params': asdict(model.params),
                'classes': list(model.classes),
                'n_features': model.n_features,
                'trees': [{name: getattr(t, name).tolist() for name in _TREE_FIELDS} for t in model.trees],
            }
        else:
            raise TypeError(f'cannot serialise {type(model).__name__}')
        return json.dumps({'format': MODEL_FORMAT, 'version': MODEL_VERSION, **payload}, ensure_ascii=False)

    def model_from_json(self, text: str):
        payload = json.loads(text)
        if payload.get('format') != MODEL_FORMAT or payload.get('version') != MODEL_VERSION:
            raise ValueError(f"unsupported model format {payload.get('format')!r} v{payload.get('version')}")
        if payload['kind'] == 'ocsvm':
            return OcsvmModel(
                support_vectors=np.asarray(payload['support_vectors'], dtype=np.float64),
                dual_coefs=np.asarray(payload['dual_coefs'], dtype=np.float64),
                rho=payload['rho'],
                gamma=payload['gamma'],
                nu=payload['nu'],
                n_train=payload['n_train'],
            )
        trees = tuple(
            TreeArrays(**{name: np.asarray(t[name], dtype=_TREE_FIELDS[name]) for name in _TREE_FIELDS})
            for t in payload['trees']
        )
        return ForestModel(trees=trees, params=ForestParams(**payload['params']),
                           classes=tuple(payload['classes']), n_features=payload['n_features'])


_TREE_FIELDS = {
    'children_left': np.intp,
    'children_right': np.intp,
    'feature': np.intp,
    'threshold': np.float64,
    'impurity': np.float64,
    'weighted_samples': np.float64,
    'class_counts': np.float64,
}
