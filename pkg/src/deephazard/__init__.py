"""DeepHazard: per-interval neural networks for additive hazards with time-varying covariates."""

from .survival_data import TimeGrid, SurvivalRecord, build_working_dataset
from .train import TrainConfig, DeepHazardModel, fit
from .predict import predict_survival, risk_path
from .metrics import c_index_td, c_index_traditional, imspe
from .simulate import generate_dataset, get_model

__version__ = "0.1.0"

__all__ = [
    "TimeGrid",
    "SurvivalRecord",
    "build_working_dataset",
    "TrainConfig",
    "DeepHazardModel",
    "fit",
    "predict_survival",
    "risk_path",
    "c_index_td",
    "c_index_traditional",
    "imspe",
    "generate_dataset",
    "get_model",
]
