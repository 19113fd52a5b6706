"""Training protocol: seeded 80/20 split, grid search by 3-fold CV mean
squared error, refit on the training split, metrics on the holdout.

The tree-count axis of the grid is scored from checkpoints of a single
boosting run per (depth, learning rate, fold), which is equivalent to
training each count separately because boosting is prefix-stable.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DiveError
from ..formula import Composition
from .features import MissingProperty, UnknownElement, featurize, schema_hash
from .gbdt import RegressionTree, predict_ensemble, train_ensemble

TREE_COUNTS = (100, 300, 600)
MAX_DEPTHS = (3, 5, 7)
LEARNING_RATES = (0.05, 0.1)

GRID = [
    {"n_trees": n, "max_depth": d, "learning_rate": lr}
    for n in TREE_COUNTS for d in MAX_DEPTHS for lr in LEARNING_RATES
]

MODEL_FORMAT = "dive-gbdt-v1"


class DatasetTooSmall(DiveError):
    pass


class DegenerateTarget(DiveError):
    pass


class SchemaMismatch(DiveError):
    pass


@dataclass
class TrainConfig:
    seed: int = 7
    test_fraction: float = 0.2
    cv_folds: int = 3
    min_dataset_size: int = 25
    grid: list[dict] = field(default_factory=lambda: [dict(g) for g in GRID])


@dataclass
class ModelMetrics:
    r2: float
    mae: float
    rmse: float
    n_train: int
    n_test: int

    def to_dict(self) -> dict:
        return {"r2": self.r2, "mae": self.mae, "rmse": self.rmse,
                "n_train": self.n_train, "n_test": self.n_test}


@dataclass
class GBDTModel:
    base_score: float
    learning_rate: float
    trees: list[RegressionTree]
    feature_schema_hash: str
    training_meta: dict

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        return predict_ensemble(self.base_score, self.learning_rate, self.trees, X)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "feature_schema_hash": self.feature_schema_hash,
            "training_meta": self.training_meta,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GBDTModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a {MODEL_FORMAT} model file")
        return cls(
            base_score=float(d["base_score"]),
            learning_rate=float(d["learning_rate"]),
            trees=[RegressionTree.from_dict(t) for t in d["trees"]],
            feature_schema_hash=str(d["feature_schema_hash"]),
            training_meta=dict(d.get("training_meta") or {}),
        )


def featurize_dataset(dataset: list[tuple[Composition, float]]):
    """Feature matrix plus targets; rows that cannot be featurized are
    skipped and counted."""
    rows, targets, skipped = [], [], 0
    for comp, target in dataset:
        if comp is None or target is None or not math.isfinite(target):
            skipped += 1
            continue
        try:
            rows.append(featurize(comp).values)
        except (UnknownElement, MissingProperty, ValueError):
            skipped += 1
            continue
        targets.append(float(target))
    if not rows:
        raise DatasetTooSmall("no featurizable rows")
    return np.vstack(rows), np.asarray(targets, dtype=np.float64), skipped


def _metrics(pred: np.ndarray, target: np.ndarray, n_train: int) -> ModelMetrics:
    if len(target) == 0:
        raise DegenerateTarget("empty holdout")
    ss_tot = float(((target - target.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise DegenerateTarget("holdout target has zero variance")
    ss_res = float(((target - pred) ** 2).sum())
    return ModelMetrics(
        r2=1.0 - ss_res / ss_tot,
        mae=float(np.abs(target - pred).mean()),
        rmse=float(np.sqrt(((target - pred) ** 2).mean())),
        n_train=n_train,
        n_test=len(target),
    )


def _cv_mse(X: np.ndarray, y: np.ndarray, folds: list[np.ndarray],
            max_depth: int, learning_rate: float,
            checkpoints: tuple[int, ...]) -> dict[int, float]:
    """Mean CV MSE at each tree-count checkpoint for one (depth, lr)."""
    top = max(checkpoints)
    sums = {c: 0.0 for c in checkpoints}
    for k, val_idx in enumerate(folds):
        train_idx = np.concatenate([f for i, f in enumerate(folds) if i != k])
        X_tr, y_tr = X[train_idx], y[train_idx]
        X_val, y_val = X[val_idx], y[val_idx]
        val_pred = np.full(len(y_val), float(y_tr.mean()), dtype=np.float64)

        def monitor(i, tree):
            val_pred[:] += learning_rate * tree.predict(X_val)
            if (i + 1) in sums:
                sums[i + 1] += float(((y_val - val_pred) ** 2).mean())

        train_ensemble(X_tr, y_tr, top, max_depth, learning_rate, monitor=monitor)
    return {c: sums[c] / len(folds) for c in checkpoints}


def train(dataset: list[tuple[Composition, float]],
          config: TrainConfig | None = None) -> tuple[GBDTModel, ModelMetrics]:
    config = config or TrainConfig()
    X, y, skipped = featurize_dataset(dataset)
    if len(y) < config.min_dataset_size:
        raise DatasetTooSmall(f"{len(y)} usable rows < {config.min_dataset_size}")
    if float(y.var()) == 0.0:
        raise DegenerateTarget("target has zero variance")

    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(len(y))
    n_test = max(1, int(round(config.test_fraction * len(y))))
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    X_tr, y_tr = X[train_idx], y[train_idx]

    fold_perm = rng.permutation(len(train_idx))
    folds = np.array_split(fold_perm, config.cv_folds)

    depths = sorted({g["max_depth"] for g in config.grid})
    rates = sorted({g["learning_rate"] for g in config.grid})
    counts = tuple(sorted({g["n_trees"] for g in config.grid}))
    cv_scores: dict[tuple, float] = {}
    for depth in depths:
        for lr in rates:
            staged = _cv_mse(X_tr, y_tr, folds, depth, lr, counts)
            for n, mse in staged.items():
                cv_scores[(n, depth, lr)] = mse

    best = None
    best_mse = math.inf
    for g in config.grid:
        key = (g["n_trees"], g["max_depth"], g["learning_rate"])
        if cv_scores[key] < best_mse:
            best_mse = cv_scores[key]
            best = g

    base, trees = train_ensemble(X_tr, y_tr, best["n_trees"], best["max_depth"],
                                 best["learning_rate"])
    model = GBDTModel(
        base_score=base,
        learning_rate=best["learning_rate"],
        trees=trees,
        feature_schema_hash=schema_hash(),
        training_meta={
            "seed": config.seed,
            "grid_point": dict(best),
            "cv_mse": best_mse,
            "n_train": len(train_idx),
            "n_test": len(test_idx),
            "n_skipped": skipped,
            "cv_scores": {f"{n}/{d}/{lr}": mse for (n, d, lr), mse in sorted(cv_scores.items())},
        },
    )
    metrics = _metrics(model.predict_matrix(X[test_idx]), y[test_idx], len(train_idx))
    return model, metrics


def predict(model: GBDTModel, c: Composition) -> float:
    if model.feature_schema_hash != schema_hash():
        raise SchemaMismatch("model was trained under a different feature schema")
    value = float(model.predict_matrix(featurize(c).values[None, :])[0])
    if not math.isfinite(value):
        raise ValueError("non-finite prediction")
    return value


def evaluate_model(model: GBDTModel, holdout: list[tuple[Composition, float]]) -> ModelMetrics:
    if not holdout:
        raise DegenerateTarget("empty holdout")
    X, y, _ = featurize_dataset(holdout)
    return _metrics(model.predict_matrix(X), y, n_train=0)


def save_model(model: GBDTModel, path) -> None:
    Path(path).write_text(_canonical_dump(model), "utf-8")


def load_model(path) -> GBDTModel:
    return GBDTModel.from_dict(json.loads(Path(path).read_text("utf-8")))


def _canonical_dump(model: GBDTModel) -> str:
    return json.dumps(model.to_dict(), sort_keys=True, separators=(",", ":"))


def model_digest(model: GBDTModel) -> str:
    return hashlib.sha256(_canonical_dump(model).encode("utf-8")).hexdigest()
