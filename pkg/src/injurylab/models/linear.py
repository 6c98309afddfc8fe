"""Logistic regression models: elastic-net penalized (coordinate descent) and
unregularized univariate fits (iteratively reweighted least squares).

The elastic net minimizes
    mean log-loss + lam * (alpha * ||beta||_1 + (1 - alpha) * ||beta||_2^2 / 2)
with an unpenalized intercept.  Each sweep refreshes the quadratic
approximation at the current point and cycles once through the coordinates.
"""

from __future__ import annotations

import numpy as np

from .base import (ConvergenceError, TrainedModel, check_binary_labels,
                   register_family, sigmoid)
from .tuning import CV_FOLDS, cross_validate

LAMBDA_GRID = tuple(float(v) for v in np.logspace(-4, 1, 7))
ALPHA_GRID = (0.0, 0.5, 1.0)

ENET_TOL = 1e-7
ENET_MAX_ITER = 10000
UNIVARIATE_TOL = 1e-8
UNIVARIATE_MAX_ITER = 100
_MIN_WEIGHT = 1e-5


def _soft_threshold(value: float, amount: float) -> float:
    if value > amount:
        return value - amount
    if value < -amount:
        return value + amount
    return 0.0


def log_loss(intercept, beta, X, y, lam: float = 0.0, alpha: float = 0.0) -> float:
    """Mean logistic log-loss plus the elastic-net penalty."""
    eta = intercept + X @ beta
    # log(1 + exp(-y_pm * eta)) with y in {0,1}, numerically stable
    margin = np.where(y == 1, eta, -eta)
    loss = float(np.mean(np.logaddexp(0.0, -margin)))
    penalty = lam * (alpha * np.abs(beta).sum() + (1 - alpha) * 0.5 * beta @ beta)
    return loss + penalty


def smooth_gradient(intercept, beta, X, y, lam: float = 0.0, alpha: float = 0.0):
    """Gradient of the smooth part (log-loss + ridge term) wrt (intercept, beta)."""
    n = X.shape[0]
    p_hat = sigmoid(intercept + X @ beta)
    resid = p_hat - y
    grad_b = float(resid.sum() / n)
    grad_beta = X.T @ resid / n + lam * (1 - alpha) * beta
    return grad_b, grad_beta


def fit_elastic_net_raw(X, y, lam: float, alpha: float, tol: float = ENET_TOL,
                        max_iter: int = ENET_MAX_ITER, init=None):
    """Coordinate-descent solve for one (lam, alpha); returns (b, beta, sweeps).

    Outer loop: re-linearize the log-loss at the current point (weighted least
    squares working response).  Inner loop: cyclic coordinate descent on the
    fixed quadratic, iterating the active set between full passes.  Converged
    when a re-linearization step moves no parameter by tol or more; sweeps
    across all inner passes count against max_iter.
    """
    X = np.asarray(X, dtype=float)
    y = check_binary_labels(y)
    n, p = X.shape
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    if lam < 0.0:
        raise ValueError("lam must be >= 0")
    if init is None:
        base = float(np.clip(y.mean(), 1e-6, 1 - 1e-6))
        b = float(np.log(base / (1.0 - base)))
        beta = np.zeros(p)
    else:
        b, beta = float(init[0]), np.asarray(init[1], dtype=float).copy()

    l1 = lam * alpha
    l2 = lam * (1.0 - alpha)
    A = np.column_stack([np.ones(n), X])
    theta = np.concatenate([[b], beta])
    ridge = np.full(p + 1, l2)
    ridge[0] = 0.0               # intercept unpenalized
    outer_change = float("inf")

    def fail(reason, iterations):
        return ConvergenceError(
            f"elastic net did not converge: {reason} (lam={lam:g}, alpha={alpha:g}, "
            f"iterations={iterations}, last change={outer_change:.3e})",
            lam=lam, alpha=alpha, iterations=iterations, last_delta=outer_change,
        )

    for iteration in range(1, max_iter + 1):
        eta = A @ theta
        p_hat = sigmoid(eta)
        w = np.maximum(p_hat * (1.0 - p_hat), _MIN_WEIGHT)
        # exact working gradient: c - G @ theta == -grad(mean log-loss)
        G = (A * w[:, None]).T @ A / n
        c = (A * w[:, None]).T @ eta / n + A.T @ (y - p_hat) / n
        H = G + np.diag(ridge)
        theta_start = theta.copy()

        if l1 == 0.0:
            # pure ridge subproblem: exact damped Newton step
            try:
                theta = np.linalg.solve(H, c)
            except np.linalg.LinAlgError as exc:
                raise fail(f"singular system ({exc})", iteration) from exc
        else:
            theta = _fista_quadratic(
                H, c, theta, l1,
                stop_tol=max(0.1 * tol, min(1e-3, 0.1 * outer_change)),
            )
            if theta is None:
                raise fail("inner solver stalled", iteration)
        # the quadratic model can overshoot the true loss when probabilities
        # saturate, so backtrack on the penalized objective
        direction = theta - theta_start
        current = log_loss(theta_start[0], theta_start[1:], X, y, lam, alpha)
        scale = 1.0
        accepted = False
        for _ in range(40):
            trial = theta_start + scale * direction
            if log_loss(trial[0], trial[1:], X, y, lam, alpha) <= current:
                theta = trial
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            # no descent along the subproblem direction: numerical optimum
            return float(theta_start[0]), theta_start[1:].copy(), iteration
        if float(np.max(np.abs(theta))) > 1e6:
            raise fail("coefficients diverging (data may be separable)", iteration)
        outer_change = float(np.max(np.abs(theta - theta_start)))
        if outer_change < tol:
            return float(theta[0]), theta[1:].copy(), iteration
    raise fail(f"iteration cap {max_iter} reached", max_iter)


def _fista_quadratic(H, c, theta0, l1, stop_tol, max_steps=100000):
    """Minimize 0.5 x'Hx - c'x + l1*||x[1:]||_1 by FISTA with adaptive restart.

    Returns the solution, or None if the step cap is hit.  The first
    coordinate (intercept) is never thresholded.
    """
    lip = float(np.linalg.eigvalsh(H)[-1])
    if lip <= 0.0:
        return None
    theta = theta0.copy()
    momentum = theta.copy()
    t_k = 1.0
    shrink = l1 / lip
    for _ in range(max_steps):
        grad = H @ momentum - c
        candidate = momentum - grad / lip
        candidate[1:] = np.sign(candidate[1:]) * np.maximum(
            np.abs(candidate[1:]) - shrink, 0.0)
        step = candidate - theta
        if float((momentum - candidate) @ step) > 0.0:
            momentum = candidate.copy()   # adaptive restart
            t_k = 1.0
        else:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k))
            momentum = candidate + ((t_k - 1.0) / t_next) * step
            t_k = t_next
        theta = candidate
        if float(np.max(np.abs(step))) < stop_tol:
            return theta
    return None


def _enet_candidates(lambdas, alphas):
    # alpha-major with lam descending: warm starts chain along a penalty path
    return [
        {"lam": float(lam), "alpha": float(alpha)}
        for alpha in alphas
        for lam in sorted(lambdas, reverse=True)
    ]


def fit_logistic_elastic_net(X, y, lambdas=LAMBDA_GRID, alphas=ALPHA_GRID,
                             folds: int = CV_FOLDS, rng: np.random.Generator | None = None,
                             feature_names=None, tol: float = ENET_TOL,
                             max_iter: int = ENET_MAX_ITER, groups=None,
                             group_folds: bool = False) -> TrainedModel:
    """Elastic-net logistic regression tuned by stratified k-fold AUC.

    AUC ties prefer the larger penalty, then the larger L1 share.
    """
    X = np.asarray(X, dtype=float)
    y = check_binary_labels(y)
    if rng is None:
        rng = np.random.default_rng(0)
    candidates = _enet_candidates(lambdas, alphas)
    cv_meta = {}
    if len(candidates) == 1:
        selected = candidates[0]
    else:
        def fit_score(params, train_idx, valid_idx, child, state):
            init = state if state is not None and state[2] == params["alpha"] else None
            init = (init[0], init[1]) if init is not None else None
            b, beta, _ = fit_elastic_net_raw(
                X[train_idx], y[train_idx], params["lam"], params["alpha"],
                tol=tol, max_iter=max_iter, init=init,
            )
            scores = sigmoid(b + X[valid_idx] @ beta)
            return scores, (b, beta, params["alpha"])

        cv = cross_validate(
            candidates, X, y, fit_score, rng, folds=folds,
            prefer=lambda prm: (prm["lam"], prm["alpha"]),
            groups=groups, group_folds=group_folds, chain_state=True,
        )
        selected = cv.selected
        cv_meta = {"cv_table": cv.table(), "fold_id": cv.fold_id,
                   "folds": cv.folds, "cv_mean_auc": cv.selected_mean_auc}
    b, beta, sweeps = fit_elastic_net_raw(X, y, selected["lam"], selected["alpha"],
                                          tol=tol, max_iter=max_iter)
    names = list(feature_names) if feature_names is not None else [
        f"x{j}" for j in range(X.shape[1])
    ]
    return TrainedModel(
        family="logistic_elastic_net",
        feature_names=names,
        hyperparams=dict(selected),
        params={"intercept": b, "beta": beta},
        metadata={"sweeps": sweeps, **cv_meta},
    )


def fit_logistic_irls(X, y, tol: float = UNIVARIATE_TOL,
                      max_iter: int = UNIVARIATE_MAX_ITER):
    """Unregularized logistic MLE by Newton steps with halving; returns (b, beta)."""
    X = np.asarray(X, dtype=float)
    y = check_binary_labels(y)
    n, p = X.shape
    A = np.column_stack([np.ones(n), X])
    theta = np.zeros(p + 1)
    loss = log_loss(theta[0], theta[1:], X, y)
    for _ in range(max_iter):
        p_hat = sigmoid(A @ theta)
        w = np.maximum(p_hat * (1.0 - p_hat), _MIN_WEIGHT)
        grad = A.T @ (p_hat - y) / n
        hess = (A * w[:, None]).T @ A / n
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        scale = 1.0
        for _ in range(40):
            candidate = theta - scale * step
            new_loss = log_loss(candidate[0], candidate[1:], X, y)
            if new_loss <= loss:
                break
            scale *= 0.5
        theta = theta - scale * step
        loss = new_loss
        if float(np.max(np.abs(scale * step))) < tol:
            break
    return float(theta[0]), theta[1:]


def fit_univariate_logistic(x, y, tol: float = UNIVARIATE_TOL,
                            max_iter: int = UNIVARIATE_MAX_ITER,
                            feature_name: str = "x0", column: int = 0) -> TrainedModel:
    """Maximum-likelihood logistic fit on a single predictor plus intercept."""
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    b, beta = fit_logistic_irls(x, y, tol=tol, max_iter=max_iter)
    return TrainedModel(
        family="univariate_logistic",
        feature_names=[feature_name],
        hyperparams={"column": column},
        params={"intercept": b, "slope": float(beta[0]), "column": column},
        metadata={},
    )


def fit_univariate_family(X, y, columns=None, folds: int = CV_FOLDS,
                          rng: np.random.Generator | None = None,
                          feature_names=None, groups=None,
                          group_folds: bool = False) -> TrainedModel:
    """Univariate logistic models per feature column; CV picks the best column."""
    X = np.asarray(X, dtype=float)
    y = check_binary_labels(y)
    if rng is None:
        rng = np.random.default_rng(0)
    names = list(feature_names) if feature_names is not None else [
        f"x{j}" for j in range(X.shape[1])
    ]
    if columns is None:
        columns = list(range(X.shape[1]))
    candidates = [{"column": int(j)} for j in columns]
    cv_meta = {}
    if len(candidates) == 1:
        selected = candidates[0]
    else:
        def fit_score(params, train_idx, valid_idx, child, state):
            j = params["column"]
            b, beta = fit_logistic_irls(X[train_idx, j:j + 1], y[train_idx])
            return sigmoid(b + beta[0] * X[valid_idx, j]), None

        cv = cross_validate(candidates, X, y, fit_score, rng, folds=folds,
                            prefer=lambda prm: -prm["column"],
                            groups=groups, group_folds=group_folds)
        selected = cv.selected
        cv_meta = {"cv_table": cv.table(), "folds": cv.folds,
                   "cv_mean_auc": cv.selected_mean_auc}
    j = selected["column"]
    model = fit_univariate_logistic(X[:, j], y, feature_name=names[j], column=j)
    # score contract: the model consumes the full feature matrix
    model.feature_names = names
    model.metadata.update(cv_meta)
    return model


def _score_linear(params, X):
    return sigmoid(params["intercept"] + X @ np.asarray(params["beta"], dtype=float))


def _decode_linear(params):
    return {"intercept": float(params["intercept"]),
            "beta": np.asarray(params["beta"], dtype=float)}


def _score_univariate(params, X):
    j = int(params["column"])
    return sigmoid(params["intercept"] + params["slope"] * X[:, j])


def _decode_univariate(params):
    return {"intercept": float(params["intercept"]),
            "slope": float(params["slope"]),
            "column": int(params["column"])}


register_family("logistic_elastic_net", _score_linear, _decode_linear)
register_family("univariate_logistic", _score_univariate, _decode_univariate)
