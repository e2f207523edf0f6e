"""Network definitions, objectives, training loops and inference."""

from rulfp.models.arch import (HEAD_OUT, HEADS, MODEL_KINDS, ArchitectureSpec, Model, build_model,
                               model_from_manifest, preset, small_arch)
from rulfp.models.losses import (LossWeights, check_labels, classification_loss, dw_nll_loss,
                                 dw_pretrain_loss, mtl_loss, nll_events, regression_loss)
from rulfp.models.predict import PredictionRecord, evaluate, frozen_leaves, predict, predict_arrays
from rulfp.models.training import (TrainConfig, dw_pretrain, dw_train, fit, network_outputs,
                                   objective, train, train_any, validation_score)

__all__ = [
    "HEAD_OUT", "HEADS", "MODEL_KINDS", "ArchitectureSpec", "Model", "build_model",
    "model_from_manifest", "preset", "small_arch", "LossWeights", "check_labels",
    "classification_loss", "dw_nll_loss", "dw_pretrain_loss", "mtl_loss", "nll_events",
    "regression_loss", "PredictionRecord", "evaluate", "frozen_leaves", "predict",
    "predict_arrays", "TrainConfig", "dw_pretrain", "dw_train", "fit", "network_outputs",
    "objective", "train", "train_any", "validation_score",
]
