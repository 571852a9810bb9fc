from .artifacts import ModelArtifact, load_artifact, save_artifact
from .config import ModelConfig, ModelKind, desk_profile, paper_profile
from .forest import RandomForest, rf_predict, rf_train
from .nets import SequenceModel, head_param_names
from .training import TrainLog, predict_labels, seq_train, train_loop

__all__ = [
    "ModelArtifact",
    "ModelConfig",
    "ModelKind",
    "RandomForest",
    "SequenceModel",
    "TrainLog",
    "desk_profile",
    "head_param_names",
    "load_artifact",
    "paper_profile",
    "predict_labels",
    "rf_predict",
    "rf_train",
    "save_artifact",
    "seq_train",
    "train_loop",
]
