"""Native interpretable baselines: LDA and logistic regression.

Both follow the sklearn estimator conventions (fit/predict/decision_function,
get_params) but the math is implemented here so every number is auditable.
Score convention: positive score means AD; exact zero breaks ties toward
non-AD (a screening framing favors fewer false positives).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

POSITIVE = "AD"
NEGATIVE = "non_AD"

MODEL_FORMAT_VERSION = "adscreen-model-1"


class ModelError(ValueError):
    pass


class DegenerateClass(ModelError):
    """A class has fewer than 2 training examples."""


class SingularCovariance(ModelError):
    """Pooled covariance is not positive-definite even after ridge."""


class DimensionMismatch(ModelError):
    pass


class NonFiniteLoss(ModelError):
    """Training diverged; the learning rate is too large."""


class ModelFormatError(ModelError):
    """Serialized model does not match the expected format or feature names."""


@dataclass(frozen=True)
class Prediction:
    participant_id: str
    label: str
    score: float
    source: str

    def to_dict(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "label": self.label,
            "score": self.score,
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Prediction":
        return cls(d["participant_id"], d["label"], float(d["score"]), d["source"])


def _check_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch(f"X must be 2-D, got shape {X.shape}")
    y = np.asarray(y)
    if y.shape[0] != X.shape[0]:
        raise DimensionMismatch("X and y lengths differ")
    return X, y


def _labels_from_scores(scores: np.ndarray) -> np.ndarray:
    return np.where(scores > 0, POSITIVE, NEGATIVE)


class LdaClassifier(ClassifierMixin, BaseEstimator):
    """Two-class linear discriminant analysis with pooled covariance.

    Pooled within-class covariance is bias-corrected and stabilized with a
    ridge term lambda = ridge_scale * trace(Sigma) / dim.
    """

    def __init__(self, ridge_scale: float = 1e-6):
        self.ridge_scale = ridge_scale

    def fit(self, X, y, feature_names: list[str] | None = None):
        X, y = _check_xy(X, y)
        n, dim = X.shape
        means = {}
        scatter = np.zeros((dim, dim))
        priors = {}
        for label in (POSITIVE, NEGATIVE):
            Xc = X[y == label]
            if Xc.shape[0] < 2:
                raise DegenerateClass(
                    f"class {label!r} has {Xc.shape[0]} examples, needs >= 2"
                )
            mu = Xc.mean(axis=0)
            means[label] = mu
            centered = Xc - mu
            scatter += centered.T @ centered
            priors[label] = Xc.shape[0] / n
        cov = scatter / (n - 2)
        ridge = self.ridge_scale * np.trace(cov) / dim
        cov = cov + ridge * np.eye(dim)
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise SingularCovariance(
                "pooled covariance not positive-definite after ridge"
            ) from exc
        self.class_means_ = means
        self.pooled_covariance_ = cov
        self.priors_ = priors
        self.feature_names_ = (
            list(feature_names) if feature_names is not None else None
        )
        self._cov_inv_ = np.linalg.inv(cov)
        self.n_features_in_ = dim
        return self

    def _check_fitted(self):
        if not hasattr(self, "pooled_covariance_"):
            raise NotFittedError("LdaClassifier is not fitted")

    def decision_function(self, X) -> np.ndarray:
        """Discriminant difference (AD minus non-AD), including log priors."""
        self._check_fitted()
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        scores = np.zeros(X.shape[0])
        for sign, label in ((1.0, POSITIVE), (-1.0, NEGATIVE)):
            mu = self.class_means_[label]
            w = self._cov_inv_ @ mu
            delta = X @ w - 0.5 * mu @ w + np.log(self.priors_[label])
            scores += sign * delta
        return scores

    def predict(self, X) -> np.ndarray:
        return _labels_from_scores(self.decision_function(X))

    def to_json(self) -> dict:
        self._check_fitted()
        return {
            "version": MODEL_FORMAT_VERSION,
            "kind": "lda",
            "params": self.get_params(),
            "feature_names": self.feature_names_,
            "class_means": {k: v.tolist() for k, v in self.class_means_.items()},
            "pooled_covariance": self.pooled_covariance_.tolist(),
            "priors": self.priors_,
        }

    @classmethod
    def from_json(cls, doc: dict, expected_feature_names: list[str] | None = None):
        if doc.get("version") != MODEL_FORMAT_VERSION or doc.get("kind") != "lda":
            raise ModelFormatError(f"not a {MODEL_FORMAT_VERSION} lda document")
        if (
            expected_feature_names is not None
            and doc.get("feature_names") != list(expected_feature_names)
        ):
            raise ModelFormatError(
                f"feature_names mismatch: stored {doc.get('feature_names')}"
            )
        model = cls(**doc["params"])
        model.class_means_ = {
            k: np.asarray(v, dtype=float) for k, v in doc["class_means"].items()
        }
        model.pooled_covariance_ = np.asarray(doc["pooled_covariance"], dtype=float)
        model.priors_ = {k: float(v) for k, v in doc["priors"].items()}
        model.feature_names_ = doc["feature_names"]
        model._cov_inv_ = np.linalg.inv(model.pooled_covariance_)
        model.n_features_in_ = model.pooled_covariance_.shape[0]
        return model


def logistic_loss_and_grad(
    w: np.ndarray, b: float, X: np.ndarray, y01: np.ndarray, l2: float
) -> tuple[float, np.ndarray, float]:
    """Mean regularized NLL and its analytic gradient (bias unregularized)."""
    with np.errstate(over="ignore"):
        z = X @ w + b
        # stable log(1 + exp(-|z|)) formulation
        nll = np.mean(np.maximum(z, 0) - z * y01 + np.log1p(np.exp(-np.abs(z))))
        loss = nll + 0.5 * l2 * float(w @ w)
        p = 1.0 / (1.0 + np.exp(-z))
    residual = p - y01
    grad_w = X.T @ residual / X.shape[0] + l2 * w
    grad_b = float(residual.mean())
    return float(loss), grad_w, grad_b


class LogisticClassifier(ClassifierMixin, BaseEstimator):
    """Full-batch gradient descent on the regularized negative log-likelihood."""

    def __init__(self, lr: float = 0.1, epochs: int = 500, l2: float = 0.0):
        self.lr = lr
        self.epochs = epochs
        self.l2 = l2

    def fit(self, X, y, feature_names: list[str] | None = None):
        if self.lr <= 0:
            raise ModelError("lr must be > 0")
        if self.epochs < 1:
            raise ModelError("epochs must be >= 1")
        if self.l2 < 0:
            raise ModelError("l2 must be >= 0")
        X, y = _check_xy(X, y)
        y01 = (y == POSITIVE).astype(float)
        w = np.zeros(X.shape[1])
        b = 0.0
        log: list[tuple[int, float]] = []
        for epoch in range(1, self.epochs + 1):
            loss, grad_w, grad_b = logistic_loss_and_grad(w, b, X, y01, self.l2)
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"loss became non-finite at epoch {epoch}")
            w = w - self.lr * grad_w
            b = b - self.lr * grad_b
            log.append((epoch, loss))
        if not np.all(np.isfinite(w)) or not np.isfinite(b):
            raise NonFiniteLoss("parameters became non-finite")
        self.weights_ = w
        self.bias_ = b
        self.training_log_ = log
        self.feature_names_ = (
            list(feature_names) if feature_names is not None else None
        )
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "weights_"):
            raise NotFittedError("LogisticClassifier is not fitted")

    def decision_function(self, X) -> np.ndarray:
        self._check_fitted()
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        return X @ self.weights_ + self.bias_

    def predict(self, X) -> np.ndarray:
        return _labels_from_scores(self.decision_function(X))

    def to_json(self) -> dict:
        self._check_fitted()
        return {
            "version": MODEL_FORMAT_VERSION,
            "kind": "logistic",
            "params": self.get_params(),
            "feature_names": self.feature_names_,
            "weights": self.weights_.tolist(),
            "bias": self.bias_,
            "training_log": [[e, l] for e, l in self.training_log_],
        }

    @classmethod
    def from_json(cls, doc: dict, expected_feature_names: list[str] | None = None):
        if doc.get("version") != MODEL_FORMAT_VERSION or doc.get("kind") != "logistic":
            raise ModelFormatError(f"not a {MODEL_FORMAT_VERSION} logistic document")
        if (
            expected_feature_names is not None
            and doc.get("feature_names") != list(expected_feature_names)
        ):
            raise ModelFormatError(
                f"feature_names mismatch: stored {doc.get('feature_names')}"
            )
        model = cls(**doc["params"])
        model.weights_ = np.asarray(doc["weights"], dtype=float)
        model.bias_ = float(doc["bias"])
        model.training_log_ = [(int(e), float(l)) for e, l in doc["training_log"]]
        model.feature_names_ = doc["feature_names"]
        model.n_features_in_ = model.weights_.shape[0]
        return model


def save_model(model, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_json(), indent=2), encoding="utf-8")


def load_model(path: str | Path, expected_feature_names: list[str] | None = None):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    kind = doc.get("kind")
    if kind == "lda":
        return LdaClassifier.from_json(doc, expected_feature_names)
    if kind == "logistic":
        return LogisticClassifier.from_json(doc, expected_feature_names)
    raise ModelFormatError(f"unknown model kind {kind!r}")


def predict_records(model, participant_ids: list[str], X, source: str) -> list[Prediction]:
    scores = model.decision_function(X)
    labels = _labels_from_scores(scores)
    return [
        Prediction(pid, label, float(score), source)
        for pid, label, score in zip(participant_ids, labels, scores)
    ]
