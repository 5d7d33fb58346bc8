"""Soft-margin RBF SVM trained with simplified SMO, one-vs-one for multiclass."""

import logging
from dataclasses import dataclass
from itertools import chain, combinations

import numpy as np

from ..exceptions import DimensionMismatch, SingleClass
from .base import BaseLearner

logger = logging.getLogger(__name__)

SUPPORT_EPS = 1e-8
MIN_ALPHA_STEP = 1e-7
BOUND_EPS = 1e-10
MAX_TOTAL_PASSES = 10_000


@dataclass(frozen=True)
class SvmParams:
    c: float = 1.0
    gamma: float | str = "auto"
    tol: float = 1e-3
    max_passes: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.c <= 0 or self.tol <= 0 or self.max_passes < 1:
            raise ValueError("c, tol and max_passes must be positive")
        if self.gamma != "auto" and not float(self.gamma) > 0:
            raise ValueError("gamma must be positive or 'auto'")

    def resolve_gamma(self, n_features):
        return 1.0 / n_features if self.gamma == "auto" else float(self.gamma)


def rbf_kernel(A, B, gamma):
    sq = (A ** 2).sum(axis=1)[:, None] + (B ** 2).sum(axis=1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class BinarySvm:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    gamma: float

    def decision_function(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.support_vectors.shape[1]:
            raise DimensionMismatch(
                f"SVM expects {self.support_vectors.shape[1]} features, got {X.shape[1]}")
        return rbf_kernel(X, self.support_vectors, self.gamma) @ self.dual_coef + self.bias

    def to_dict(self):
        return {"support_vectors": self.support_vectors.tolist(), "dual_coef": self.dual_coef.tolist(),
                "bias": self.bias, "gamma": self.gamma}

    @classmethod
    def from_dict(cls, d):
        sv = np.asarray(d["support_vectors"], dtype=np.float64).reshape(len(d["dual_coef"]), -1)
        return cls(sv, np.asarray(d["dual_coef"], dtype=np.float64), float(d["bias"]), float(d["gamma"]))


@dataclass
class SmoResult:
    alphas: np.ndarray
    bias: float
    passes: int
    converged: bool


def dual_objective(alphas, y, K):
    ay = alphas * y
    return float(alphas.sum() - 0.5 * ay @ K @ ay)


def smo(K, y, c, tol, max_passes, rng):
    """Simplified SMO on a precomputed kernel matrix.

    For every KKT violator ``i`` a partner ``j`` is drawn at random; if that
    pair makes no progress the remaining partners are swept from a random
    offset. The bias is re-fitted to the KKT-feasible interval at the start of
    each pass. Stops after ``max_passes`` consecutive passes without an update,
    at which point every point satisfies KKT within ``tol``.
    """
    n = len(y)
    alphas = np.zeros(n)
    b = 0.0
    passes = total = 0
    while passes < max_passes and total < MAX_TOTAL_PASSES:
        total += 1
        raw = (alphas * y) @ K - y
        b = _feasible_bias(raw, alphas, y, c, tol, b)
        errors = raw + b
        changed = 0
        for i in range(n):
            r = y[i] * errors[i]
            if not ((r < -tol and alphas[i] < c) or (r > tol and alphas[i] > 0)):
                continue
            first = int(rng.integers(n - 1))
            first += first >= i
            offset = int(rng.integers(n))
            sweep = (j for j in np.roll(np.arange(n), -offset) if j != i and j != first)
            for j in chain([first], sweep):
                step = _take_step(i, j, alphas, y, errors, K, c, b)
                if step is not None:
                    b = step
                    changed += 1
                    break
        passes = passes + 1 if changed == 0 else 0
    if total >= MAX_TOTAL_PASSES:
        logger.warning("SMO stopped after %d passes without converging", total)
    return SmoResult(alphas, b, total, passes >= max_passes)


def _feasible_bias(raw_errors, alphas, y, c, tol, b):
    """Bias for the next pass.

    Points whose margin may still grow bound ``b`` from below, points whose
    margin may still shrink bound it from above. Within that interval the
    mean bias implied by the free support vectors is preferred. If the
    interval is empty its midpoint is used, which guarantees every remaining
    violator has a partner it can make progress with.
    """
    pos = y > 0
    up = (pos & (alphas < c)) | (~pos & (alphas > 0))
    low = (pos & (alphas > 0)) | (~pos & (alphas < c))
    lower = np.max(-tol - raw_errors[up]) if up.any() else -np.inf
    upper = np.min(tol - raw_errors[low]) if low.any() else np.inf
    if lower > upper:
        return float((lower + upper) / 2.0)
    free = (alphas > 0) & (alphas < c)
    target = float(np.mean(-raw_errors[free])) if free.any() else b
    return float(min(max(target, lower), upper))


def _snap(a, c):
    # Leftover multipliers a hair above 0 (or below C) would block the bias interval.
    if a < BOUND_EPS * c:
        return 0.0
    if a > c - BOUND_EPS * c:
        return c
    return a


def _take_step(i, j, alphas, y, errors, K, c, b):
    """Jointly optimize ``alphas[i], alphas[j]``; updates in place, returns new bias or None."""
    ai, aj = alphas[i], alphas[j]
    if y[i] != y[j]:
        lo, hi = max(0.0, aj - ai), min(c, c + aj - ai)
    else:
        lo, hi = max(0.0, ai + aj - c), min(c, ai + aj)
    if lo >= hi:
        return None
    eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
    if eta >= 0:
        return None
    new_aj = _snap(min(hi, max(lo, aj - y[j] * (errors[i] - errors[j]) / eta)), c)
    if abs(new_aj - aj) < MIN_ALPHA_STEP * (new_aj + aj + MIN_ALPHA_STEP):
        return None
    s = y[i] * y[j]
    new_ai = min(c, max(0.0, ai + s * (aj - new_aj)))
    snapped = _snap(new_ai, c)
    if snapped != new_ai:
        # keep sum(alpha * y) exact: push the snap residue back onto alpha_j
        new_ai = snapped
        new_aj = min(c, max(0.0, aj + s * (ai - new_ai)))
    dai, daj = new_ai - ai, new_aj - aj

    b1 = b - errors[i] - y[i] * dai * K[i, i] - y[j] * daj * K[i, j]
    b2 = b - errors[j] - y[i] * dai * K[i, j] - y[j] * daj * K[j, j]
    if 0 < new_ai < c:
        new_b = b1
    elif 0 < new_aj < c:
        new_b = b2
    else:
        new_b = (b1 + b2) / 2.0

    alphas[i], alphas[j] = new_ai, new_aj
    errors += y[i] * dai * K[i] + y[j] * daj * K[j] + (new_b - b)
    return new_b


def fit_svm_binary(X, y, params=None, rng=None):
    """Train one binary machine on standardized ``X`` with labels in {-1, +1}."""
    params = params or SvmParams()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise DimensionMismatch(f"X has shape {X.shape} but y has {len(y)} labels")
    if not (np.any(y == 1) and np.any(y == -1)):
        raise SingleClass("binary SVM needs both -1 and +1 labels")
    gamma = params.resolve_gamma(X.shape[1])
    K = rbf_kernel(X, X, gamma)
    rng = np.random.default_rng(params.seed) if rng is None else rng
    result = smo(K, y, params.c, params.tol, params.max_passes, rng)
    keep = result.alphas > SUPPORT_EPS
    return BinarySvm(X[keep].copy(), result.alphas[keep] * y[keep], result.bias, gamma)


def ovo_vote(decisions, pairs, n_classes):
    """Pairwise votes; ties broken by summed winning margins, then label index."""
    n = decisions.shape[0]
    votes = np.zeros((n, n_classes))
    margin = np.zeros((n, n_classes))
    rows = np.arange(n)
    for col, (a, b) in enumerate(pairs):
        d = decisions[:, col]
        winner = np.where(d >= 0, a, b)
        votes[rows, winner] += 1
        margin[rows, winner] += np.abs(d)
    top = votes == votes.max(axis=1, keepdims=True)
    ranked = np.where(top, margin, -np.inf)
    label = np.argmax(ranked, axis=1)
    return label, votes / len(pairs)


class SVMClassifier(BaseLearner):
    """RBF SVM; multiclass by one-vs-one voting.

    ``predict_proba`` returns normalized vote counts, not calibrated
    probabilities.
    """

    kind = "svm"

    def __init__(self, c=1.0, gamma="auto", tol=1e-3, max_passes=10, seed=0, standardize=True):
        self.c = c
        self.gamma = gamma
        self.tol = tol
        self.max_passes = max_passes
        self.seed = seed
        self.standardize = standardize

    def _fit_encoded(self, X, y):
        params = SvmParams(self.c, self.gamma, self.tol, self.max_passes, self.seed)
        self.pairs_ = list(combinations(range(len(self.classes_)), 2))
        self.machines_ = []
        for a, b in self.pairs_:
            mask = (y == a) | (y == b)
            target = np.where(y[mask] == a, 1.0, -1.0)
            rng = np.random.default_rng([self.seed, a, b])
            self.machines_.append(fit_svm_binary(X[mask], target, params, rng))

    def _decisions(self, Xs):
        return np.column_stack([m.decision_function(Xs) for m in self.machines_])

    def decision_function(self, X):
        return self._decisions(self._check_input(X))

    def _proba(self, Xs):
        return ovo_vote(self._decisions(Xs), self.pairs_, len(self.classes_))[1]

    def _predict_index(self, Xs):
        return ovo_vote(self._decisions(Xs), self.pairs_, len(self.classes_))[0]

    def _payload_to_dict(self):
        return {"pairs": [list(p) for p in self.pairs_], "machines": [m.to_dict() for m in self.machines_]}

    def _payload_from_dict(self, payload):
        self.pairs_ = [tuple(p) for p in payload["pairs"]]
        self.machines_ = [BinarySvm.from_dict(m) for m in payload["machines"]]


def fit_svm_multiclass(X, y, params=None):
    params = params or SvmParams()
    return SVMClassifier(params.c, params.gamma, params.tol, params.max_passes, params.seed).fit(X, y)


def predict_svm(model, x):
    """Label and normalized vote vector for one sample."""
    x = np.asarray(x, dtype=np.float64)[None, :]
    Xs = model._check_input(x)
    label, scores = ovo_vote(model._decisions(Xs), model.pairs_, len(model.classes_))
    return model.classes_[label[0]], scores[0]
