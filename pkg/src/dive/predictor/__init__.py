from .features import (
    FEATURE_NAMES,
    FeatureVector,
    MissingProperty,
    UnknownElement,
    featurize,
    schema_hash,
)
from .gbdt import RegressionTree, train_ensemble
from .train import (
    DatasetTooSmall,
    DegenerateTarget,
    GBDTModel,
    ModelMetrics,
    SchemaMismatch,
    TrainConfig,
    evaluate_model,
    load_model,
    model_digest,
    predict,
    save_model,
    train,
)

__all__ = [
    "FEATURE_NAMES", "FeatureVector", "MissingProperty", "UnknownElement",
    "featurize", "schema_hash", "RegressionTree", "train_ensemble",
    "DatasetTooSmall", "DegenerateTarget", "GBDTModel", "ModelMetrics",
    "SchemaMismatch", "TrainConfig", "evaluate_model", "load_model",
    "model_digest", "predict", "save_model", "train",
]
