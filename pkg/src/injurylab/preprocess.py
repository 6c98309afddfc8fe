"""Imputation, standardization, PCA with a variance cut-off, and the two
class-imbalance sampling schemes (random under-sampling and SMOTE).

Every fit/transform pair is leakage-free: parameters, donor pools, loadings
and neighbours come from the data passed to fit, never from data passed to
transform.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, replace

import numpy as np

PMM_DONORS = 5
SMOTE_NEIGHBORS = 5
PCA_THRESHOLD = 0.95
_ZERO_VAR = 1e-12


# ---------------------------------------------------------------------------
# Predictive mean matching


@dataclass
class PmmImputer:
    """Predictive-mean-matching imputer fitted on a training matrix.

    For each column, the observed values are regressed on the fully observed
    columns; a missing entry is replaced by the observed value of one of the
    `donors` rows whose predicted value is closest to the missing row's
    prediction, chosen uniformly at random.  Imputed values are therefore
    always members of the observed support of their column.
    """

    n_columns: int
    complete_cols: np.ndarray
    col_means: np.ndarray
    coefs: dict[int, np.ndarray]
    donor_preds: dict[int, np.ndarray]
    donor_values: dict[int, np.ndarray]
    donors: int = PMM_DONORS

    @classmethod
    def fit(cls, X, donors: int = PMM_DONORS, column_names=None) -> "PmmImputer":
        X = np.asarray(X, dtype=float)
        n, p = X.shape
        missing = np.isnan(X)

        def colname(j):
            return column_names[j] if column_names is not None else f"column {j}"

        for j in range(p):
            n_obs = n - int(missing[:, j].sum())
            if n_obs == 0:
                raise ValueError(f"{colname(j)} is entirely missing")
            if n_obs < 10:
                raise ValueError(f"{colname(j)} has fewer than 10 observed values")
        complete_cols = np.flatnonzero(~missing.any(axis=0))
        if complete_cols.size == 0:
            raise ValueError("predictive mean matching needs at least one fully observed column")

        col_means = np.nanmean(X, axis=0)
        coefs: dict[int, np.ndarray] = {}
        donor_preds: dict[int, np.ndarray] = {}
        donor_values: dict[int, np.ndarray] = {}
        for j in range(p):
            predictors = complete_cols[complete_cols != j]
            obs = ~missing[:, j]
            A = np.column_stack([np.ones(int(obs.sum())), X[np.ix_(obs, predictors)]])
            target = X[obs, j]
            coef, *_ = np.linalg.lstsq(A, target, rcond=None)
            preds = A @ coef
            order = np.argsort(preds, kind="mergesort")
            coefs[j] = coef
            donor_preds[j] = preds[order]
            donor_values[j] = target[order]
        return cls(p, complete_cols, col_means, coefs, donor_preds, donor_values, donors)

    def transform(self, X, rng: np.random.Generator) -> np.ndarray:
        """Fill missing entries of X with donor values drawn from the fit data."""
        X = np.asarray(X, dtype=float)
        if X.shape[1] != self.n_columns:
            raise ValueError("column count differs from the fitted matrix")
        out = X.copy()
        missing = np.isnan(X)
        if not missing.any():
            return out
        # predictor block with train-mean fallback for any missing predictor
        base = X.copy()
        fill = np.broadcast_to(self.col_means, X.shape)
        base = np.where(np.isnan(base), fill, base)
        for j in range(self.n_columns):
            rows = np.flatnonzero(missing[:, j])
            if rows.size == 0:
                continue
            predictors = self.complete_cols[self.complete_cols != j]
            A = np.column_stack([np.ones(rows.size), base[np.ix_(rows, predictors)]])
            preds = A @ self.coefs[j]
            pool_preds = self.donor_preds[j]
            pool_values = self.donor_values[j]
            k = min(self.donors, pool_values.size)
            for row, pred in zip(rows, preds):
                pos = np.searchsorted(pool_preds, pred)
                lo = max(0, pos - k)
                hi = min(pool_preds.size, pos + k)
                window = np.arange(lo, hi)
                nearest = window[np.argsort(np.abs(pool_preds[window] - pred), kind="mergesort")[:k]]
                out[row, j] = pool_values[nearest[rng.integers(k)]]
        return out

    def to_dict(self) -> dict:
        return {
            "n_columns": self.n_columns,
            "complete_cols": self.complete_cols.tolist(),
            "col_means": self.col_means.tolist(),
            "coefs": {str(j): c.tolist() for j, c in self.coefs.items()},
            "donor_preds": {str(j): v.tolist() for j, v in self.donor_preds.items()},
            "donor_values": {str(j): v.tolist() for j, v in self.donor_values.items()},
            "donors": self.donors,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PmmImputer":
        return cls(
            n_columns=int(data["n_columns"]),
            complete_cols=np.asarray(data["complete_cols"], dtype=int),
            col_means=np.asarray(data["col_means"], dtype=float),
            coefs={int(j): np.asarray(c, dtype=float) for j, c in data["coefs"].items()},
            donor_preds={int(j): np.asarray(v, dtype=float) for j, v in data["donor_preds"].items()},
            donor_values={int(j): np.asarray(v, dtype=float) for j, v in data["donor_values"].items()},
            donors=int(data["donors"]),
        )


def pmm_impute(X, rng: np.random.Generator, donors: int = PMM_DONORS,
               column_names=None) -> np.ndarray:
    """Fit-and-apply predictive mean matching on a single matrix."""
    return PmmImputer.fit(X, donors=donors, column_names=column_names).transform(X, rng)


def impute_session_values(sessions, rng: np.random.Generator,
                          donors: int = PMM_DONORS):
    """Fill missing raw session fields (rpe and the load variables) by PMM.

    Runs once at ingest so that daily load series are complete; duration and
    the session-type indicator act as the fully observed predictors.  Imputed
    msr/hsr are clamped to the session distance to preserve row invariants.
    """
    fields = ("rpe", "distance_m", "msr_m", "hsr_m", "player_load")
    matrix = np.full((len(sessions), 2 + len(fields)), np.nan)
    for i, s in enumerate(sessions):
        matrix[i, 0] = s.duration_min
        matrix[i, 1] = 1.0 if s.session_type == "match" else 0.0
        for j, name in enumerate(fields):
            value = getattr(s, name)
            if value is not None:
                matrix[i, 2 + j] = float(value)
    if not np.isnan(matrix).any():
        return list(sessions)
    filled = pmm_impute(matrix, rng, donors=donors,
                        column_names=["duration_min", "is_match", *fields])
    out = []
    for i, s in enumerate(sessions):
        rpe = s.rpe if s.rpe is not None else int(round(filled[i, 2]))
        distance = s.distance_m if s.distance_m is not None else float(filled[i, 3])
        msr = s.msr_m if s.msr_m is not None else min(float(filled[i, 4]), distance)
        hsr = s.hsr_m if s.hsr_m is not None else min(float(filled[i, 5]), distance)
        player_load = s.player_load if s.player_load is not None else float(filled[i, 6])
        out.append(replace(s, rpe=rpe, distance_m=distance, msr_m=msr,
                           hsr_m=hsr, player_load=player_load))
    return out


# ---------------------------------------------------------------------------
# Standardization


def standardize(X):
    """Column-wise (x - mean) / sd with sample sd; constant columns get scale 1."""
    X = np.asarray(X, dtype=float)
    if np.isnan(X).any():
        raise ValueError("matrix contains missing values; impute first")
    means = X.mean(axis=0)
    scales = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.zeros(X.shape[1])
    scales = np.where(scales < _ZERO_VAR, 1.0, scales)
    return (X - means) / scales, means, scales


def apply_standardize(X, means, scales):
    return (np.asarray(X, dtype=float) - means) / scales


def invert_standardize(Z, means, scales):
    return np.asarray(Z, dtype=float) * scales + means


# ---------------------------------------------------------------------------
# PCA with explained-variance cut-off


@dataclass
class PcaProjection:
    means: np.ndarray
    scales: np.ndarray
    loadings: np.ndarray                 # (p, k), orthonormal columns
    n_components: int
    explained_variance_ratio: np.ndarray  # full spectrum, descending

    def to_dict(self) -> dict:
        return {
            "means": self.means.tolist(),
            "scales": self.scales.tolist(),
            "loadings": self.loadings.tolist(),
            "n_components": self.n_components,
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PcaProjection":
        return cls(
            means=np.asarray(data["means"], dtype=float),
            scales=np.asarray(data["scales"], dtype=float),
            loadings=np.asarray(data["loadings"], dtype=float),
            n_components=int(data["n_components"]),
            explained_variance_ratio=np.asarray(data["explained_variance_ratio"], dtype=float),
        )


def pca_fit(X, threshold: float = PCA_THRESHOLD) -> PcaProjection:
    """Correlation-matrix PCA keeping the smallest k components whose
    cumulative explained variance reaches `threshold`."""
    X = np.asarray(X, dtype=float)
    if not np.isfinite(X).all():
        raise ValueError("matrix contains non-finite entries")
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must be in (0, 1]")
    n, p = X.shape
    means = X.mean(axis=0)
    scales = X.std(axis=0, ddof=1) if n > 1 else np.zeros(p)
    scales = np.where(scales < _ZERO_VAR, 1.0, scales)
    Z = (X - means) / scales
    _, s, vt = np.linalg.svd(Z, full_matrices=False)
    var = s ** 2
    total = var.sum()
    if total <= 0.0:
        raise ValueError("matrix has no variance")
    fractions = var / total
    rank = int(np.sum(s > s[0] * max(n, p) * np.finfo(float).eps)) if s.size else 0
    rank = max(rank, 1)
    cumulative = np.cumsum(fractions)
    k = int(np.searchsorted(cumulative, threshold - 1e-12) + 1)
    k = min(k, rank)
    loadings = vt[:k].T.copy()
    # deterministic sign: largest-magnitude loading entry is positive
    for c in range(k):
        anchor = np.argmax(np.abs(loadings[:, c]))
        if loadings[anchor, c] < 0:
            loadings[:, c] = -loadings[:, c]
    return PcaProjection(means, scales, loadings, k, fractions)


def pca_transform(X, projection: PcaProjection) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if not np.isfinite(X).all():
        raise ValueError("matrix contains non-finite entries")
    return ((X - projection.means) / projection.scales) @ projection.loadings


# ---------------------------------------------------------------------------
# Class-imbalance sampling


@dataclass
class SamplingResult:
    """Resampled training rows.

    ``indices`` maps output rows to source rows (-1 for synthetic rows);
    ``synthetic`` flags rows that must never reach evaluation data.
    """

    X: np.ndarray
    y: np.ndarray
    indices: np.ndarray
    synthetic: np.ndarray
    synth_base: np.ndarray = dataclasses.field(default_factory=lambda: np.empty(0, dtype=int))
    synth_neighbor: np.ndarray = dataclasses.field(default_factory=lambda: np.empty(0, dtype=int))


def _class_split(y):
    y = np.asarray(y)
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("both classes must be present")
    return pos, neg


def undersample(X, y, rng: np.random.Generator) -> SamplingResult:
    """Randomly drop majority rows until the classes are balanced.

    All minority rows are retained; the kept majority subset is a uniform
    draw without replacement.  Output preserves the original row order.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    pos, neg = _class_split(y)
    if pos.size == neg.size:
        keep = np.arange(y.size)
    elif pos.size < neg.size:
        keep = np.sort(np.concatenate([pos, rng.choice(neg, pos.size, replace=False)]))
    else:
        keep = np.sort(np.concatenate([rng.choice(pos, neg.size, replace=False), neg]))
    return SamplingResult(X[keep], y[keep], keep,
                          np.zeros(keep.size, dtype=bool))


def smote(X, y, rng: np.random.Generator, k: int = SMOTE_NEIGHBORS,
          oversample_pct: float | None = None) -> SamplingResult:
    """SMOTE: synthesize minority rows, then under-sample the majority.

    Each synthetic row is x + u * (nn - x) for a minority row x, one of its k
    nearest minority neighbours nn (Euclidean) and u ~ Uniform(0, 1).  With
    the default ``oversample_pct=None`` enough rows are synthesized to
    balance the classes exactly without removing majority rows; an explicit
    percentage synthesizes round(pct/100 * n_minority) rows and the majority
    is under-sampled to match.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    pos, neg = _class_split(y)
    minority, majority = (pos, neg) if pos.size <= neg.size else (neg, pos)
    n_min, n_maj = minority.size, majority.size
    if n_min < 2:
        raise ValueError("SMOTE needs at least 2 minority rows")
    if oversample_pct is None:
        n_syn = n_maj - n_min
    else:
        if oversample_pct < 0:
            raise ValueError("oversample_pct must be >= 0")
        n_syn = min(int(round(n_min * oversample_pct / 100.0)), n_maj - n_min)
        n_syn = max(n_syn, 0)

    X_min = X[minority]
    diffs = X_min[:, None, :] - X_min[None, :, :]
    dist2 = np.einsum("ijk,ijk->ij", diffs, diffs)
    np.fill_diagonal(dist2, np.inf)
    k_eff = min(k, n_min - 1)
    neighbor_table = np.argsort(dist2, axis=1, kind="mergesort")[:, :k_eff]

    counts = np.full(n_min, n_syn // n_min, dtype=int)
    remainder = n_syn % n_min
    if remainder:
        counts[rng.choice(n_min, remainder, replace=False)] += 1

    synth_rows = []
    synth_base = []
    synth_neighbor = []
    for local_idx in range(n_min):
        for _ in range(counts[local_idx]):
            nn_local = int(neighbor_table[local_idx, rng.integers(k_eff)])
            u = rng.random()
            synth_rows.append(X_min[local_idx] + u * (X_min[nn_local] - X_min[local_idx]))
            synth_base.append(minority[local_idx])
            synth_neighbor.append(minority[nn_local])

    target_majority = n_min + n_syn
    if n_maj > target_majority:
        kept_majority = np.sort(rng.choice(majority, target_majority, replace=False))
    else:
        kept_majority = majority
    real = np.sort(np.concatenate([minority, kept_majority]))

    X_out = np.vstack([X[real]] + ([np.vstack(synth_rows)] if synth_rows else []))
    minority_label = y[minority[0]]
    y_out = np.concatenate([y[real], np.full(len(synth_rows), minority_label, dtype=y.dtype)])
    indices = np.concatenate([real, np.full(len(synth_rows), -1, dtype=int)])
    synthetic = np.concatenate([np.zeros(real.size, dtype=bool),
                                np.ones(len(synth_rows), dtype=bool)])
    return SamplingResult(X_out, y_out, indices, synthetic,
                          np.asarray(synth_base, dtype=int),
                          np.asarray(synth_neighbor, dtype=int))
