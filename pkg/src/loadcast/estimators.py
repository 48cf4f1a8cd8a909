"""scikit-learn style estimators wrapping the forecasting core.

``LoadForecaster`` is a regressor over flattened windows: each row of X is
the dynamic block (time-major) followed by the static vector, i.e.
``X[i] = [dyn(t0,f0), dyn(t0,f1), ..., dyn(T-1,fD), stat_0, ..., stat_S]``.
``WindowScaler`` applies the train-fitted z-score with the constant-column
rule. ``FeatureScreener`` selects columns that pass the Granger +
copula-entropy screen. All three follow the get_params/set_params protocol
so they compose with pipelines and model selection.
"""

from __future__ import annotations

import warnings

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .featsel import screen
from .models import ARCHITECTURES, Hyper, ModelSpec, build_model, predict_batched, train_model

__all__ = ["LoadForecaster", "WindowScaler", "FeatureScreener"]


class LoadForecaster(BaseEstimator, RegressorMixin):
    """One of the eleven architectures behind a fit/predict interface.

    Parameters mirror the model hyperparameter table; ``time_steps``,
    ``dyn_features`` and ``stat_features`` define how each row of X splits
    into the dynamic window and the static vector.
    """

    def __init__(self, architecture: str = "pcga", time_steps: int = 12,
                 dyn_features: int = 1, stat_features: int = 0,
                 epochs: int = 50, batch_size: int = 64,
                 learning_rate: float = 1e-4, dropout: float = 0.3,
                 decay_factor: float = 0.5, decay_every: int = 10,
                 hidden_size: int = 150, hidden_layers: int = 2,
                 channels: tuple = (64, 128), kernel_size: int = 3,
                 cnn_fc_dim: int = 150, attention_rows: int = 8,
                 validation_fraction: float = 0.1, seed: int = 0):
        self.architecture = architecture
        self.time_steps = time_steps
        self.dyn_features = dyn_features
        self.stat_features = stat_features
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.dropout = dropout
        self.decay_factor = decay_factor
        self.decay_every = decay_every
        self.hidden_size = hidden_size
        self.hidden_layers = hidden_layers
        self.channels = channels
        self.kernel_size = kernel_size
        self.cnn_fc_dim = cnn_fc_dim
        self.attention_rows = attention_rows
        self.validation_fraction = validation_fraction
        self.seed = seed

    def _spec(self) -> ModelSpec:
        hyper = Hyper(epochs=self.epochs, batch_size=self.batch_size,
                      learning_rate=self.learning_rate, dropout=self.dropout,
                      decay_factor=self.decay_factor, decay_every=self.decay_every,
                      hidden_size=self.hidden_size, hidden_layers=self.hidden_layers,
                      channels=tuple(self.channels), kernel_size=self.kernel_size,
                      cnn_fc_dim=self.cnn_fc_dim, attention_rows=self.attention_rows)
        return ModelSpec(architecture=self.architecture, time_steps=self.time_steps,
                         dyn_features=self.dyn_features,
                         stat_features=self.stat_features, hyper=hyper)

    def _split_blocks(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        width = self.time_steps * self.dyn_features + self.stat_features
        if X.shape[1] != width:
            raise ValueError(
                f"X has {X.shape[1]} columns; expected "
                f"{self.time_steps}*{self.dyn_features} + {self.stat_features} = {width}")
        dyn = X[:, :self.time_steps * self.dyn_features].reshape(
            len(X), self.time_steps, self.dyn_features)
        stat = X[:, self.time_steps * self.dyn_features:]
        return dyn, stat

    def fit(self, X, y):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        X = check_array(X, dtype=np.float64)
        y = check_array(y, dtype=np.float64, ensure_2d=False)
        if y.ndim != 1 or len(y) != len(X):
            raise ValueError("y must be 1-D and aligned with X")
        dyn, stat = self._split_blocks(X)
        n_val = max(1, int(len(X) * self.validation_fraction))
        n_train = len(X) - n_val
        if n_train < 2:
            raise ValueError("not enough samples to hold out a validation tail")
        model = build_model(self._spec(), seed=self.seed)
        self.log_ = train_model(
            model,
            (dyn[:n_train], stat[:n_train], y[:n_train]),
            (dyn[n_train:], stat[n_train:], y[n_train:]),
            seed=self.seed)
        self.model_ = model
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        dyn, stat = self._split_blocks(X)
        return predict_batched(self.model_, dyn, stat)


class WindowScaler(BaseEstimator, TransformerMixin):
    """Column z-score fit on the training portion; constant columns keep
    scale 1 (with a warning) so they pass through unchanged."""

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        degenerate = scale == 0.0
        if degenerate.any():
            warnings.warn(f"{int(degenerate.sum())} constant column(s); scale left at 1")
            scale = scale.copy()
            scale[degenerate] = 1.0
        self.scale_ = scale
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "scale_")
        X = check_array(X, dtype=np.float64)
        return (X - self.mean_) / self.scale_

    def inverse_transform(self, X):
        check_is_fitted(self, "scale_")
        X = check_array(X, dtype=np.float64)
        return X * self.scale_ + self.mean_


class FeatureScreener(BaseEstimator, TransformerMixin):
    """Column selector driven by the Granger + copula-entropy screen.

    X columns are time-ordered feature series aligned with the target y.
    After fit, ``support_`` masks the retained columns and ``report_``
    holds the full screen report.
    """

    def __init__(self, alpha: float = 0.05, ce_min: float | None = None,
                 lag: int = 4, knn_k: int = 3, feature_names: list | None = None):
        self.alpha = alpha
        self.ce_min = ce_min
        self.lag = lag
        self.knn_k = knn_k
        self.feature_names = feature_names

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        y = check_array(y, dtype=np.float64, ensure_2d=False)
        if y.ndim != 1 or len(y) != len(X):
            raise ValueError("y must be 1-D and aligned with X")
        names = (list(self.feature_names) if self.feature_names is not None
                 else [f"feature_{i}" for i in range(X.shape[1])])
        if len(names) != X.shape[1]:
            raise ValueError(f"{len(names)} names for {X.shape[1]} columns")
        frame = pd.DataFrame(dict(zip(names, X.T)))
        frame["__target__"] = y
        self.report_ = screen(frame, target="__target__", alpha=self.alpha,
                              ce_min=self.ce_min, lag=self.lag, knn_k=self.knn_k)
        retained = set(self.report_.retained_features())
        self.support_ = np.array([n in retained for n in names])
        self.n_features_in_ = X.shape[1]
        return self

    def get_support(self) -> np.ndarray:
        check_is_fitted(self, "support_")
        return self.support_

    def transform(self, X):
        check_is_fitted(self, "support_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, fitted on "
                             f"{self.n_features_in_}")
        return X[:, self.support_]
