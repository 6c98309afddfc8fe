"""Soft-margin SVM with an RBF kernel, trained by sequential minimal
optimization.  The score is the raw decision-function value, which is what a
rank-based evaluation (ROC/AUC) needs; no probability calibration.
"""

from __future__ import annotations

import numpy as np

from .base import (ConvergenceError, TrainedModel, check_binary_labels,
                   register_family)
from .tuning import CV_FOLDS, cross_validate

C_GRID = (0.1, 1.0, 10.0)
GAMMA_GRID = (0.01, 0.1, 1.0)
KKT_TOL = 1e-3
SMO_MAX_SWEEPS = 2000
_MIN_ALPHA_STEP = 1e-8


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    sq = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :]
          - 2.0 * (A @ B.T))
    return np.exp(-gamma * np.maximum(sq, 0.0))


def _smo(K, y_pm, C, tol, rng, max_sweeps=SMO_MAX_SWEEPS):
    """Platt-style SMO with random second-index choice.

    Alternates full sweeps with sweeps over non-bound multipliers; converges
    when a full sweep finds no KKT violation beyond `tol`.
    """
    n = y_pm.size
    alpha = np.zeros(n)
    b = 0.0
    f = np.zeros(n)  # decision values including b

    def examine(i):
        nonlocal b, f
        e_i = f[i] - y_pm[i]
        r = y_pm[i] * e_i
        if not ((r < -tol and alpha[i] < C) or (r > tol and alpha[i] > 0.0)):
            return False
        j = int(rng.integers(n - 1))
        if j >= i:
            j += 1
        e_j = f[j] - y_pm[j]
        if y_pm[i] != y_pm[j]:
            low = max(0.0, alpha[j] - alpha[i])
            high = min(C, C + alpha[j] - alpha[i])
        else:
            low = max(0.0, alpha[i] + alpha[j] - C)
            high = min(C, alpha[i] + alpha[j])
        if low >= high:
            return False
        eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
        if eta >= 0.0:
            return False
        a_j = alpha[j] - y_pm[j] * (e_i - e_j) / eta
        a_j = min(max(a_j, low), high)
        if abs(a_j - alpha[j]) < _MIN_ALPHA_STEP:
            return False
        a_i = alpha[i] + y_pm[i] * y_pm[j] * (alpha[j] - a_j)
        d_i = y_pm[i] * (a_i - alpha[i])
        d_j = y_pm[j] * (a_j - alpha[j])
        b1 = b - e_i - d_i * K[i, i] - d_j * K[i, j]
        b2 = b - e_j - d_i * K[i, j] - d_j * K[j, j]
        if 0.0 < a_i < C:
            b_new = b1
        elif 0.0 < a_j < C:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        f += d_i * K[:, i] + d_j * K[:, j] + (b_new - b)
        alpha[i] = a_i
        alpha[j] = a_j
        b = b_new
        return True

    examine_all = True
    for _ in range(max_sweeps):
        changed = 0
        if examine_all:
            targets = range(n)
        else:
            targets = np.flatnonzero((alpha > 0.0) & (alpha < C))
        for i in targets:
            if examine(int(i)):
                changed += 1
        if examine_all:
            if changed == 0:
                return alpha, b
            examine_all = False
        elif changed == 0:
            examine_all = True
    raise ConvergenceError(
        f"SMO did not satisfy KKT tolerance {tol:g} within {max_sweeps} sweeps",
        sweeps=max_sweeps,
    )


def fit_svm_rbf_raw(X, y, C: float, gamma: float, rng: np.random.Generator,
                    tol: float = KKT_TOL, max_sweeps: int = SMO_MAX_SWEEPS):
    """Single (C, gamma) fit; returns (support X, alpha*y over supports, b)."""
    X = np.asarray(X, dtype=float)
    y = check_binary_labels(y)
    y_pm = np.where(y == 1, 1.0, -1.0)
    K = rbf_kernel(X, X, gamma)
    alpha, b = _smo(K, y_pm, C, tol, rng, max_sweeps)
    support = alpha > 1e-10
    return X[support], (alpha * y_pm)[support], b


def fit_svm_rbf(X, y, C=C_GRID, gamma=GAMMA_GRID, folds: int = CV_FOLDS,
                rng: np.random.Generator | None = None, tol: float = KKT_TOL,
                max_sweeps: int = SMO_MAX_SWEEPS, feature_names=None,
                groups=None, group_folds: bool = False) -> TrainedModel:
    """RBF SVM with CV tuning over (C, gamma); AUC ties prefer smaller C then
    smaller gamma."""
    X = np.asarray(X, dtype=float)
    y = check_binary_labels(y)
    if rng is None:
        rng = np.random.default_rng(0)

    def as_tuple(v):
        return tuple(v) if isinstance(v, (tuple, list)) else (v,)

    candidates = [
        {"C": float(c), "gamma": float(g)}
        for c in as_tuple(C)
        for g in as_tuple(gamma)
    ]
    cv_meta = {}
    if len(candidates) == 1:
        selected = candidates[0]
    else:
        def fit_score(params, train_idx, valid_idx, child, state):
            sv, coef, b = fit_svm_rbf_raw(X[train_idx], y[train_idx],
                                          params["C"], params["gamma"], child,
                                          tol=tol, max_sweeps=max_sweeps)
            if sv.shape[0] == 0:
                return np.zeros(valid_idx.size) + b, None
            return rbf_kernel(X[valid_idx], sv, params["gamma"]) @ coef + b, None

        cv = cross_validate(candidates, X, y, fit_score, rng, folds=folds,
                            prefer=lambda prm: (-prm["C"], -prm["gamma"]),
                            groups=groups, group_folds=group_folds)
        selected = cv.selected
        cv_meta = {"cv_table": cv.table(), "folds": cv.folds,
                   "cv_mean_auc": cv.selected_mean_auc}
    sv, coef, b = fit_svm_rbf_raw(X, y, selected["C"], selected["gamma"], rng,
                                  tol=tol, max_sweeps=max_sweeps)
    names = list(feature_names) if feature_names is not None else [
        f"x{j}" for j in range(X.shape[1])
    ]
    return TrainedModel(
        family="svm_rbf",
        feature_names=names,
        hyperparams=dict(selected),
        params={"support_vectors": sv, "dual_coef": coef, "intercept": b,
                "gamma": selected["gamma"]},
        metadata={**cv_meta, "n_support": int(sv.shape[0])},
    )


def _score_svm(params, X):
    sv = np.asarray(params["support_vectors"], dtype=float)
    if sv.shape[0] == 0:
        return np.full(X.shape[0], float(params["intercept"]))
    coef = np.asarray(params["dual_coef"], dtype=float)
    return rbf_kernel(X, sv, float(params["gamma"])) @ coef + float(params["intercept"])


def _decode_svm(params):
    sv = np.asarray(params["support_vectors"], dtype=float)
    if sv.size == 0:
        sv = sv.reshape(0, 0)
    return {
        "support_vectors": sv,
        "dual_coef": np.asarray(params["dual_coef"], dtype=float),
        "intercept": float(params["intercept"]),
        "gamma": float(params["gamma"]),
    }


register_family("svm_rbf", _score_svm, _decode_svm)
