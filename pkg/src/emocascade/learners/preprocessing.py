import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import DimensionMismatch


class Standardizer(TransformerMixin, BaseEstimator):
    """Per-dimension z-scoring fitted on training data.

    Zero-variance dimensions keep a stored std of 1, so they are only centered.
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.scale_ = np.where(std > 0, std, 1.0)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return (X - self.mean_) / self.scale_

    def to_dict(self):
        return {"means": self.mean_.tolist(), "stds": self.scale_.tolist()}

    @classmethod
    def from_dict(cls, data):
        obj = cls()
        obj.mean_ = np.asarray(data["means"], dtype=np.float64)
        obj.scale_ = np.asarray(data["stds"], dtype=np.float64)
        obj.n_features_in_ = len(obj.mean_)
        return obj


def fit_standardizer(X):
    return Standardizer().fit(X)


def apply_standardizer(standardizer, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return standardizer.transform(x[None, :])[0]
    return standardizer.transform(x)
