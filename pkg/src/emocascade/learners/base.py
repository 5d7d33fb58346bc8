import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..exceptions import DimensionMismatch, SingleClass
from .preprocessing import Standardizer


class BaseLearner(ClassifierMixin, BaseEstimator):
    """Shared plumbing: label encoding, optional standardization, persistence.

    Subclasses implement ``_fit_encoded(X, y_idx)``, ``_proba(X)`` and the
    payload (de)serializers. ``classes_`` is sorted, so label index order
    equals lexicographic label order.
    """

    kind = None

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=False)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise SingleClass(f"need at least 2 classes, got {list(self.classes_)}")
        self.n_features_in_ = X.shape[1]
        self.standardizer_ = Standardizer().fit(X) if self.standardize else None
        self._fit_encoded(self._scale(X), y_idx)
        return self

    def _scale(self, X):
        return X if self.standardizer_ is None else self.standardizer_.transform(X)

    def _check_input(self, X):
        check_is_fitted(self, "classes_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(f"model expects {self.n_features_in_} features, got {X.shape[1]}")
        return self._scale(X)

    def predict_proba(self, X):
        return self._proba(self._check_input(X))

    def predict(self, X):
        return self.classes_[self._predict_index(self._check_input(X))]

    def _predict_index(self, Xs):
        # argmax picks the first maximum: ties go to the lowest label index
        return np.argmax(self._proba(Xs), axis=1)

    # persistence -----------------------------------------------------

    def to_dict(self):
        check_is_fitted(self, "classes_")
        return {
            "kind": self.kind,
            "params": self.get_params(),
            "classes": [str(c) for c in self.classes_],
            "n_features": int(self.n_features_in_),
            "standardizer": None if self.standardizer_ is None else self.standardizer_.to_dict(),
            "payload": self._payload_to_dict(),
        }

    @classmethod
    def from_dict(cls, data):
        obj = cls(**data["params"])
        obj.classes_ = np.asarray(data["classes"])
        obj.n_features_in_ = int(data["n_features"])
        std = data["standardizer"]
        obj.standardizer_ = None if std is None else Standardizer.from_dict(std)
        obj._payload_from_dict(data["payload"])
        return obj
