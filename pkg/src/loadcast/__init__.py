"""loadcast: multi-source power load forecasting toolkit.

Serial/parallel CNN-GRU(-attention) model families on a from-scratch
float64 autodiff engine, data-driven feature screening (correlations,
copula entropy, Granger causality), four-metric evaluation, and a numeric
lab for generalization-bound quantities.
"""

__version__ = "0.1.0"

from .estimators import FeatureScreener, LoadForecaster, WindowScaler
from .models import ARCHITECTURES, Hyper, ModelSpec, build_model, train_model

__all__ = [
    "__version__",
    "ARCHITECTURES",
    "Hyper",
    "ModelSpec",
    "build_model",
    "train_model",
    "LoadForecaster",
    "WindowScaler",
    "FeatureScreener",
]
