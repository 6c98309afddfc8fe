"""End-to-end modelling pipeline: impute, standardize, optional PCA, optional
re-sampling, cross-validated model fitting and test scoring - plus the
simulation repeats and learning curves built on top of a single run.

All randomness flows from one master seed through named substreams keyed by
(simulation index, stage), so results are reproducible and independent of
thread count or execution order.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import preprocess
from .domain import DailyPanel, SplitDataset
from .load_metrics import FeatureMatrix
from .metrics import auc
from .models import ModelSpec, TrainedModel, fit_model
from .models.base import model_from_dict, model_to_dict
from .preprocess import PcaProjection, PmmImputer

#: stage names -> fixed substream ids
_STREAMS = {"impute": 0, "sampling": 1, "cv": 2, "model": 3, "subsample": 4,
            "ingest": 5}

PROTOCOL_NAMES = ("none", "pca", "undersample", "smote",
                  "pca+undersample", "pca+smote")


@dataclass(frozen=True)
class Protocol:
    """A preprocessing protocol: optional PCA x optional re-sampling."""

    pca: bool = False
    sampling: str = "none"    # none | undersample | smote

    def __post_init__(self):
        if self.sampling not in ("none", "undersample", "smote"):
            raise ValueError(f"unknown sampling scheme {self.sampling!r}")

    @property
    def name(self) -> str:
        if not self.pca:
            return self.sampling
        return "pca" if self.sampling == "none" else f"pca+{self.sampling}"

    @classmethod
    def parse(cls, token: str) -> "Protocol":
        token = token.strip().lower()
        if token not in PROTOCOL_NAMES:
            raise ValueError(f"unknown protocol {token!r} (expected one of {PROTOCOL_NAMES})")
        pca = token.startswith("pca")
        sampling = token.removeprefix("pca").removeprefix("+") or "none"
        return cls(pca=pca, sampling=sampling)


@dataclass
class PipelineSettings:
    pca_threshold: float = preprocess.PCA_THRESHOLD
    pmm_donors: int = preprocess.PMM_DONORS
    smote_k: int = preprocess.SMOTE_NEIGHBORS
    smote_oversample_pct: float | None = None


def stream_rng(master_seed: int, sim_index: int, stage: str) -> np.random.Generator:
    """Named, order-independent substream of the master seed."""
    return np.random.default_rng(
        np.random.SeedSequence([int(master_seed), int(sim_index), _STREAMS[stage]])
    )


@dataclass
class ModelingData:
    """Feature matrices and labels for one train/test split."""

    feature_names: list[str]
    X_train: np.ndarray
    X_test: np.ndarray
    y_train: dict[str, np.ndarray]
    y_test: dict[str, np.ndarray]
    groups_train: np.ndarray
    new_player_test: np.ndarray

    @property
    def n_train(self) -> int:
        return self.X_train.shape[0]


def assemble_modeling_data(split: SplitDataset, features: FeatureMatrix) -> ModelingData:
    """Slice a panel-aligned feature matrix into the split's train/test sides."""
    return ModelingData(
        feature_names=list(features.columns),
        X_train=features.values[split.train_idx],
        X_test=features.values[split.test_idx],
        y_train={k: v.copy() for k, v in split.train.labels.items()},
        y_test={k: v.copy() for k, v in split.test.labels.items()},
        groups_train=np.asarray(split.train.athlete_ids, dtype=object),
        new_player_test=split.test.new_player.copy(),
    )


def modeling_data_from_records(sessions, injuries, athletes, train_seasons,
                               test_seasons, seed: int = 0, lag_days: int = 4,
                               monotony_cap: float = 10.0, pmm_donors: int = 5):
    """Records -> imputed sessions -> panel -> features -> split -> ModelingData.

    Returns (panel, features, split, data).  Raw missing session fields are
    filled once by predictive mean matching so every load series is complete.
    """
    from .domain import build_daily_panel, split_by_season
    from .load_metrics import build_feature_matrix, build_load_series
    from .preprocess import impute_session_values

    sessions = impute_session_values(sessions, stream_rng(seed, 0, "ingest"),
                                     donors=pmm_donors)
    panel = build_daily_panel(sessions, injuries, athletes, lag_days=lag_days)
    series = build_load_series(sessions, season_starts=panel.season_starts)
    features = build_feature_matrix(panel, series, monotony_cap=monotony_cap)
    split = split_by_season(panel, train_seasons, test_seasons)
    return panel, features, split, assemble_modeling_data(split, features)


@dataclass
class PreprocessBundle:
    """Training-fitted transforms, applied identically to any later matrix."""

    imputer: PmmImputer
    means: np.ndarray
    scales: np.ndarray
    pca: PcaProjection | None
    feature_names: list[str]

    def transform(self, X, rng: np.random.Generator) -> np.ndarray:
        filled = self.imputer.transform(X, rng)
        standardized = preprocess.apply_standardize(filled, self.means, self.scales)
        if self.pca is not None:
            return preprocess.pca_transform(standardized, self.pca)
        return standardized

    @property
    def output_names(self) -> list[str]:
        if self.pca is None:
            return list(self.feature_names)
        return [f"pc{i + 1}" for i in range(self.pca.n_components)]

    def to_dict(self) -> dict:
        return {
            "imputer": self.imputer.to_dict(),
            "means": self.means.tolist(),
            "scales": self.scales.tolist(),
            "pca": self.pca.to_dict() if self.pca is not None else None,
            "feature_names": list(self.feature_names),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PreprocessBundle":
        return cls(
            imputer=PmmImputer.from_dict(data["imputer"]),
            means=np.asarray(data["means"], dtype=float),
            scales=np.asarray(data["scales"], dtype=float),
            pca=PcaProjection.from_dict(data["pca"]) if data["pca"] else None,
            feature_names=list(data["feature_names"]),
        )


def fit_preprocessing(X_train, settings: PipelineSettings, protocol: Protocol,
                      rng: np.random.Generator, feature_names=None) -> tuple:
    """Fit imputer/standardizer/PCA on training data; returns (bundle, X_out)."""
    imputer = PmmImputer.fit(X_train, donors=settings.pmm_donors,
                             column_names=feature_names)
    filled = imputer.transform(X_train, rng)
    standardized, means, scales = preprocess.standardize(filled)
    pca = None
    out = standardized
    if protocol.pca:
        pca = preprocess.pca_fit(standardized, threshold=settings.pca_threshold)
        out = preprocess.pca_transform(standardized, pca)
    names = list(feature_names) if feature_names is not None else [
        f"x{j}" for j in range(X_train.shape[1])
    ]
    return PreprocessBundle(imputer, means, scales, pca, names), out


@dataclass
class PipelineRun:
    model: TrainedModel
    bundle: PreprocessBundle
    test_scores: np.ndarray
    test_auc: float
    train_auc: float | None = None
    n_model_rows: int = 0


def run_pipeline_once(X_train, y_train, X_test, y_test, spec: ModelSpec,
                      protocol: Protocol, settings: PipelineSettings,
                      master_seed: int, sim_index: int = 0,
                      groups_train=None, feature_names=None,
                      compute_train_auc: bool = False) -> PipelineRun:
    """One full pass: preprocess on train, fit (with CV tuning), score test."""
    rng_impute = stream_rng(master_seed, sim_index, "impute")
    rng_sampling = stream_rng(master_seed, sim_index, "sampling")
    rng_model = stream_rng(master_seed, sim_index, "model")

    y_train = np.asarray(y_train)
    y_test = np.asarray(y_test)
    bundle, Z_train = fit_preprocessing(X_train, settings, protocol, rng_impute,
                                        feature_names)
    Z_test = bundle.transform(X_test, rng_impute)

    groups = (np.asarray(groups_train, dtype=object) if groups_train is not None
              else np.array([f"r{i}" for i in range(Z_train.shape[0])], dtype=object))
    X_fit, y_fit, groups_fit = Z_train, y_train, groups
    if protocol.sampling == "undersample":
        result = preprocess.undersample(Z_train, y_train, rng_sampling)
        X_fit, y_fit = result.X, result.y
        groups_fit = groups[result.indices]
    elif protocol.sampling == "smote":
        result = preprocess.smote(Z_train, y_train, rng_sampling,
                                  k=settings.smote_k,
                                  oversample_pct=settings.smote_oversample_pct)
        X_fit, y_fit = result.X, result.y
        # synthetic rows act as independent singleton groups
        groups_fit = np.array(
            [groups[i] if i >= 0 else f"synthetic{k}"
             for k, i in enumerate(result.indices)], dtype=object)

    model = fit_model(spec, X_fit, y_fit, rng_model,
                      feature_names=bundle.output_names, groups=groups_fit)
    test_scores = model.score(Z_test)
    run = PipelineRun(
        model=model,
        bundle=bundle,
        test_scores=test_scores,
        test_auc=auc(test_scores, y_test),
        n_model_rows=X_fit.shape[0],
    )
    if compute_train_auc:
        # train AUC is reported on the real (pre-sampling) training rows
        run.train_auc = auc(model.score(Z_train), y_train)
    return run


# ---------------------------------------------------------------------------
# Simulation repeats


@dataclass(frozen=True)
class Cell:
    """One (model family, outcome, preprocessing protocol) grid cell."""

    spec: ModelSpec
    outcome: str
    protocol: Protocol

    @property
    def key(self) -> tuple:
        return (self.spec.family, self.outcome, self.protocol.name)


@dataclass
class CellSummary:
    family: str
    outcome: str
    protocol: str
    aucs: list
    errors: dict = field(default_factory=dict)   # sim index -> message
    single_run: bool = False

    @property
    def n_completed(self) -> int:
        return sum(1 for a in self.aucs if a is not None)

    @property
    def complete(self) -> bool:
        return not self.errors

    @property
    def mean_auc(self) -> float:
        values = [a for a in self.aucs if a is not None]
        return float(np.mean(values)) if values else float("nan")

    @property
    def sd_auc(self) -> float:
        values = [a for a in self.aucs if a is not None]
        if len(values) <= 1:
            return 0.0
        return float(np.std(values, ddof=1))


@dataclass
class SimulationSummary:
    cells: list[CellSummary]
    n_sims: int
    master_seed: int

    @property
    def all_complete(self) -> bool:
        return all(cell.complete for cell in self.cells)


def run_simulations(data: ModelingData, cells, n_sims: int, master_seed: int,
                    settings: PipelineSettings | None = None,
                    threads: int = 1) -> SimulationSummary:
    """Repeat the whole pipeline n_sims times per cell with per-simulation
    seeds derived from (master_seed, sim index).

    Individual failures are recorded per cell rather than aborting the batch.
    """
    if n_sims < 1:
        raise ValueError("n_sims must be >= 1")
    settings = settings or PipelineSettings()
    cells = list(cells)

    def one(cell_index: int, sim: int):
        cell = cells[cell_index]
        run = run_pipeline_once(
            data.X_train, data.y_train[cell.outcome],
            data.X_test, data.y_test[cell.outcome],
            cell.spec, cell.protocol, settings, master_seed, sim_index=sim,
            groups_train=data.groups_train, feature_names=data.feature_names,
        )
        return run.test_auc

    tasks = [(c, s) for c in range(len(cells)) for s in range(n_sims)]
    results: dict[tuple, object] = {}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(_run_quiet, one, c, s): (c, s) for c, s in tasks}
            for future, key in futures.items():
                results[key] = future.result()
    else:
        for c, s in tasks:
            results[(c, s)] = _run_quiet(one, c, s)

    summaries = []
    for c, cell in enumerate(cells):
        aucs, errors = [], {}
        for s in range(n_sims):
            value = results[(c, s)]
            if isinstance(value, str):
                errors[s] = value
                aucs.append(None)
            else:
                aucs.append(float(value))
        summaries.append(CellSummary(cell.spec.family, cell.outcome,
                                     cell.protocol.name, aucs, errors,
                                     single_run=n_sims == 1))
    return SimulationSummary(summaries, n_sims, master_seed)


def _run_quiet(fn, *args):
    """Run one simulation, converting failures into an error string."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            return fn(*args)
        except Exception as exc:  # recorded per cell, batch continues
            return f"{type(exc).__name__}: {exc}"


# ---------------------------------------------------------------------------
# Learning curves


@dataclass
class LearningCurvePoint:
    size: int
    train_aucs: list[float]
    test_aucs: list[float]

    @property
    def train_mean(self) -> float:
        return float(np.mean(self.train_aucs))

    @property
    def train_sd(self) -> float:
        return float(np.std(self.train_aucs, ddof=1)) if len(self.train_aucs) > 1 else 0.0

    @property
    def test_mean(self) -> float:
        return float(np.mean(self.test_aucs))

    @property
    def test_sd(self) -> float:
        return float(np.std(self.test_aucs, ddof=1)) if len(self.test_aucs) > 1 else 0.0


def _stratified_subsample(y, size: int, rng: np.random.Generator) -> np.ndarray:
    """Class-proportional subsample without replacement with >= 2 positives."""
    y = np.asarray(y)
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if size >= y.size:
        return np.arange(y.size)
    n_pos = max(2, int(round(size * pos.size / y.size)))
    n_pos = min(n_pos, pos.size)
    n_neg = min(size - n_pos, neg.size)
    chosen = np.concatenate([rng.choice(pos, n_pos, replace=False),
                             rng.choice(neg, n_neg, replace=False)])
    return np.sort(chosen)


def learning_curve(data: ModelingData, outcome: str, spec: ModelSpec,
                   protocol: Protocol, sizes, repeats: int, master_seed: int,
                   settings: PipelineSettings | None = None) -> list[LearningCurvePoint]:
    """Train/test AUC versus training-set size, re-sampled `repeats` times.

    Train AUC is measured on the drawn subset itself; test AUC on the fixed
    test split.
    """
    settings = settings or PipelineSettings()
    y_train = data.y_train[outcome]
    if np.count_nonzero(y_train == 1) < 2:
        raise ValueError("training data needs at least 2 positive rows")
    sizes = sorted(int(s) for s in sizes)
    if sizes[0] < 10:
        raise ValueError("sizes must be at least 10 rows")
    if sizes[-1] > data.n_train:
        raise ValueError(f"size {sizes[-1]} exceeds training rows {data.n_train}")
    points = []
    for size_index, size in enumerate(sizes):
        train_aucs, test_aucs = [], []
        for repeat in range(repeats):
            sim = size_index * 100003 + repeat + 1
            rng_sub = stream_rng(master_seed, sim, "subsample")
            idx = _stratified_subsample(y_train, size, rng_sub)
            run = run_pipeline_once(
                data.X_train[idx], y_train[idx], data.X_test, data.y_test[outcome],
                spec, protocol, settings, master_seed, sim_index=sim,
                groups_train=data.groups_train[idx],
                feature_names=data.feature_names, compute_train_auc=True,
            )
            train_aucs.append(run.train_auc)
            test_aucs.append(run.test_auc)
        points.append(LearningCurvePoint(size, train_aucs, test_aucs))
    return points


# ---------------------------------------------------------------------------
# Model bundle serialization (preprocessing + model in one flat file)

BUNDLE_VERSION = 1


def bundle_to_dict(run_bundle: PreprocessBundle, model: TrainedModel,
                   extra: dict | None = None) -> dict:
    return {
        "bundle_version": BUNDLE_VERSION,
        "preprocess": run_bundle.to_dict(),
        "model": model_to_dict(model),
        "extra": extra or {},
    }


def bundle_from_dict(data: dict) -> tuple[PreprocessBundle, TrainedModel, dict]:
    if data.get("bundle_version") != BUNDLE_VERSION:
        raise ValueError(f"unsupported bundle version {data.get('bundle_version')!r}")
    return (PreprocessBundle.from_dict(data["preprocess"]),
            model_from_dict(data["model"]),
            data.get("extra", {}))


def save_bundle(path, bundle: PreprocessBundle, model: TrainedModel,
                extra: dict | None = None) -> None:
    import json

    from .models.base import _ArrayEncoder

    with open(path, "w") as fh:
        json.dump(bundle_to_dict(bundle, model, extra), fh, cls=_ArrayEncoder)


def load_bundle(path) -> tuple[PreprocessBundle, TrainedModel, dict]:
    import json

    with open(path) as fh:
        return bundle_from_dict(json.load(fh))
