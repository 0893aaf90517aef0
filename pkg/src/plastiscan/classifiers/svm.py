"""RBF-kernel support vector machine trained by sequential minimal optimisation.

Features are z-scored with training-set statistics (zero-variance columns are
dropped with a warning).  The kernel is ``k(x, y) = exp(-sigma * ||x - y||^2)``
with ``sigma`` used directly as the exponential gain; the textbook
``exp(-||x - y||^2 / (2 s^2))`` form is the reparameterisation
``sigma = 1 / (2 s^2)``.  Internally plastic maps to +1 and water to -1; the
decision function is ``f(x) = sum_i dual_coef_i k(sv_i, x) + bias`` and a
pixel is plastic when ``f(x) >= 0``.

The solver follows Platt's SMO: pairwise coordinate ascent on the dual with
KKT screening, a second-choice heuristic maximising |E1 - E2|, and seeded
scan offsets so training is deterministic.  The bias is recomputed at the end
as the mean over free support vectors (0 < alpha < C).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..dataset import SampleTable, feature_matrix
from ..errors import (
    ClassTooSmallError,
    ConvergenceError,
    EmptyFeaturesError,
    EmptyInputError,
    LengthMismatchError,
    SingleClassError,
    SpecMismatchError,
)
from ..rng import seeded_rng
from ..spectra import FeatureSetSpec, FeatureVector, PLASTIC, WATER

__all__ = [
    "SVMHyperParams",
    "Scaler",
    "SVMModel",
    "rbf_kernel",
    "train_svm",
    "decision_function",
    "predict_svm",
    "predict_svm_batch",
]

_BOUND_EPS = 1e-10  # relative margin for "at bound" tests


@dataclass(frozen=True)
class SVMHyperParams:
    """Soft-margin and kernel controls."""

    C: float = 10.0
    sigma: float = 0.09  # RBF exponential gain
    tolerance: float = 1e-3  # KKT violation tolerance
    max_passes: int = 1000  # bound on optimisation passes
    seed: int = 0

    def __post_init__(self) -> None:
        if self.C <= 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.tolerance <= 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_passes < 1:
            raise ValueError(f"max_passes must be >= 1, got {self.max_passes}")


@dataclass(frozen=True)
class Scaler:
    """Per-feature z-score statistics from the training set."""

    mean: np.ndarray
    sd: np.ndarray
    kept: np.ndarray  # bool; False marks dropped zero-variance columns

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return (X[:, self.kept] - self.mean[self.kept]) / self.sd[self.kept]


def rbf_kernel(x, y, sigma: float) -> float:
    """exp(-sigma * ||x - y||^2) for two equal-length vectors."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    xa = np.asarray(x, dtype=np.float64).reshape(-1)
    ya = np.asarray(y, dtype=np.float64).reshape(-1)
    if xa.shape != ya.shape:
        raise LengthMismatchError(f"vector lengths differ: {xa.size} vs {ya.size}")
    diff = xa - ya
    return math.exp(-sigma * float(diff @ diff))


def _rbf_matrix(a: np.ndarray, b: np.ndarray, sigma: float) -> np.ndarray:
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.exp(-sigma * np.maximum(sq, 0.0))


@dataclass(eq=False)
class SVMModel:
    """Trained SVM: scaled support vectors, dual coefficients, bias."""

    spec: FeatureSetSpec
    hyperparams: SVMHyperParams
    scaler: Scaler
    support_vectors: np.ndarray  # (m, kept features), already scaled
    dual_coefs: np.ndarray  # alpha_i * y_i, length m
    bias: float
    n_train: int

    @property
    def n_support(self) -> int:
        return len(self.dual_coefs)


class _SMO:
    """Platt-style SMO over a precomputed kernel matrix."""

    def __init__(self, K: np.ndarray, y: np.ndarray, hp: SVMHyperParams):
        self.K = K
        self.y = y.astype(np.float64)
        self.C = float(hp.C)
        self.tol = float(hp.tolerance)
        self.max_passes = hp.max_passes
        self.rng = seeded_rng(hp.seed, "smo")
        self.n = len(y)
        self.alpha = np.zeros(self.n)
        self.b = 0.0
        self.f = np.zeros(self.n)  # current decision values on training rows

    def _refresh(self) -> None:
        self.f = self.K @ (self.alpha * self.y) + self.b

    def _take_step(self, i1: int, i2: int) -> bool:
        if i1 == i2:
            return False
        a1, a2 = self.alpha[i1], self.alpha[i2]
        y1, y2 = self.y[i1], self.y[i2]
        e1 = self.f[i1] - y1
        e2 = self.f[i2] - y2
        s = y1 * y2
        if s > 0:
            lo, hi = max(0.0, a1 + a2 - self.C), min(self.C, a1 + a2)
        else:
            lo, hi = max(0.0, a2 - a1), min(self.C, self.C + a2 - a1)
        if hi - lo < _BOUND_EPS * self.C:
            return False
        eta = self.K[i1, i1] + self.K[i2, i2] - 2.0 * self.K[i1, i2]
        if eta <= 1e-15:
            # identical points in kernel space share E values: no progress.
            return False
        a2_new = a2 + y2 * (e1 - e2) / eta
        a2_new = min(hi, max(lo, a2_new))
        if a2_new < _BOUND_EPS * self.C:
            a2_new = 0.0
        elif a2_new > self.C * (1.0 - _BOUND_EPS):
            a2_new = self.C
        if abs(a2_new - a2) < 1e-14 * (a2_new + a2 + 1e-14):
            return False
        a1_new = a1 + s * (a2 - a2_new)
        if a1_new < _BOUND_EPS * self.C:
            a1_new = 0.0
        elif a1_new > self.C * (1.0 - _BOUND_EPS):
            a1_new = self.C
        d1 = y1 * (a1_new - a1)
        d2 = y2 * (a2_new - a2)
        b1 = self.b - e1 - d1 * self.K[i1, i1] - d2 * self.K[i1, i2]
        b2 = self.b - e2 - d1 * self.K[i1, i2] - d2 * self.K[i2, i2]
        if 0.0 < a1_new < self.C:
            b_new = b1
        elif 0.0 < a2_new < self.C:
            b_new = b2
        else:
            b_new = (b1 + b2) / 2.0
        self.f += d1 * self.K[:, i1] + d2 * self.K[:, i2] + (b_new - self.b)
        self.alpha[i1] = a1_new
        self.alpha[i2] = a2_new
        self.b = b_new
        return True

    def _examine(self, i2: int) -> bool:
        y2 = self.y[i2]
        a2 = self.alpha[i2]
        r2 = (self.f[i2] - y2) * y2
        if not ((r2 < -self.tol and a2 < self.C) or (r2 > self.tol and a2 > 0.0)):
            return False
        free = np.nonzero((self.alpha > 0.0) & (self.alpha < self.C))[0]
        if free.size > 1:
            e2 = self.f[i2] - y2
            errs = np.abs((self.f[free] - self.y[free]) - e2)
            if self._take_step(int(free[np.argmax(errs)]), i2):
                return True
        if free.size:
            start = int(self.rng.integers(free.size))
            for k in range(free.size):
                if self._take_step(int(free[(start + k) % free.size]), i2):
                    return True
        start = int(self.rng.integers(self.n))
        for k in range(self.n):
            if self._take_step((start + k) % self.n, i2):
                return True
        return False

    def solve(self) -> tuple[np.ndarray, float]:
        examine_all = True
        num_changed = 1
        passes = 0
        while num_changed > 0 or examine_all:
            if passes >= self.max_passes:
                raise ConvergenceError(
                    f"SMO did not satisfy KKT (tolerance {self.tol}) within "
                    f"{self.max_passes} passes"
                )
            if examine_all:
                self._refresh()
                targets = range(self.n)
            else:
                targets = np.nonzero((self.alpha > 0.0) & (self.alpha < self.C))[0]
            num_changed = sum(self._examine(int(i)) for i in targets)
            passes += 1
            if examine_all:
                examine_all = False
            elif num_changed == 0:
                examine_all = True
        return self.alpha, self.b


def _final_bias(K: np.ndarray, y: np.ndarray, alpha: np.ndarray, C: float) -> float:
    """Mean bias over free rows; KKT-interval midpoint if none are free."""
    g = K @ (alpha * y)
    residual = y - g  # the bias that would put each row exactly on its margin
    lo_bound = alpha <= _BOUND_EPS * C
    hi_bound = alpha >= C * (1.0 - _BOUND_EPS)
    free = ~lo_bound & ~hi_bound
    if free.any():
        return float(np.mean(residual[free]))
    lowers = residual[(lo_bound & (y > 0)) | (hi_bound & (y < 0))]
    uppers = residual[(lo_bound & (y < 0)) | (hi_bound & (y > 0))]
    if lowers.size and uppers.size:
        return float((lowers.max() + uppers.min()) / 2.0)
    if lowers.size:
        return float(lowers.max())
    if uppers.size:
        return float(uppers.min())
    return 0.0


def train_svm(table: SampleTable, spec: FeatureSetSpec, hp: SVMHyperParams) -> SVMModel:
    """Fit an RBF SVM on ``table`` under ``spec``.

    Rows are canonically sorted before the seeded solver runs, so training is
    invariant to input row order.  Raises
    :class:`~plastiscan.errors.ConvergenceError` if SMO exhausts
    ``hp.max_passes``.
    """
    table = table.canonical()
    if len(table) < 2:
        raise ClassTooSmallError(f"need at least 2 training samples, got {len(table)}")
    X, labels = feature_matrix(table, spec)
    if len(set(labels.tolist())) < 2:
        raise SingleClassError("training data contains a single class")
    y = np.where(labels == PLASTIC, 1.0, -1.0)

    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    kept = sd > 0.0
    if not kept.any():
        raise EmptyFeaturesError("every feature is constant; nothing to train on")
    if not kept.all():
        dropped = [spec.members[i] for i in np.nonzero(~kept)[0]]
        warnings.warn(
            f"dropping zero-variance feature(s): {', '.join(dropped)}",
            stacklevel=2,
        )
    scaler = Scaler(mean=mean, sd=sd, kept=kept)
    Xs = scaler.transform(X)

    K = _rbf_matrix(Xs, Xs, hp.sigma)
    K = (K + K.T) / 2.0  # exact symmetry for the solver
    alpha, _ = _SMO(K, y, hp).solve()
    bias = _final_bias(K, y, alpha, hp.C)

    support = alpha > _BOUND_EPS * hp.C
    if not support.any():
        raise ConvergenceError("SMO ended with no support vectors")
    return SVMModel(
        spec=spec,
        hyperparams=hp,
        scaler=scaler,
        support_vectors=Xs[support],
        dual_coefs=(alpha * y)[support],
        bias=bias,
        n_train=len(table),
    )


def _decision_batch(model: SVMModel, X: np.ndarray) -> np.ndarray:
    Xs = model.scaler.transform(X)
    K = _rbf_matrix(Xs, model.support_vectors, model.hyperparams.sigma)
    return K @ model.dual_coefs + model.bias


def decision_function(model: SVMModel, fv: FeatureVector) -> float:
    """Signed margin f(x); plastic when f(x) >= 0."""
    if fv.spec_id != model.spec.spec_id:
        raise SpecMismatchError(
            f"feature vector is for {fv.spec_id}, model is for {model.spec.spec_id}"
        )
    return float(_decision_batch(model, np.asarray(fv.values)[None, :])[0])


def predict_svm_batch(model: SVMModel, X: np.ndarray) -> np.ndarray:
    """Class labels for rows of X (plastic on the non-negative side)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.spec.n_features:
        raise SpecMismatchError(
            f"expected shape (n, {model.spec.n_features}) for {model.spec.spec_id}, "
            f"got {X.shape}"
        )
    if len(X) == 0:
        raise EmptyInputError("no rows to predict")
    return np.where(_decision_batch(model, X) >= 0.0, PLASTIC, WATER)


def predict_svm(model: SVMModel, fv: FeatureVector) -> int:
    """Class label for one feature vector."""
    return PLASTIC if decision_function(model, fv) >= 0.0 else WATER
