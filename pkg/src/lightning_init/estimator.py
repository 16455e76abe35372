"""scikit-learn compatible classifier wrapping the dense network trainer."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .initializers import InitializerSpec, InitKind, LightningConfig, build_network
from .network import TrainConfig, forward, train


class _Arrays:
    def __init__(self, images, labels):
        self.images = images
        self.labels = labels


class LightningMLPClassifier(ClassifierMixin, BaseEstimator):
    """Relu MLP with softmax output trained by plain minibatch SGD.

    Parameters
    ----------
    hidden_layer_sizes : tuple of int
    init : {"glorot_uniform", "he_normal", "truncated_normal", "lightning"}
    std : float
        Standard deviation for ``init="truncated_normal"``.
    n_lightnings, strength :
        Lightning parameters, used when ``init="lightning"``.
    learning_rate, batch_size, epochs, shuffle :
        SGD settings.
    random_state : int
        Seeds both the initializer and the shuffling.

    Attributes
    ----------
    network_ : DenseNetwork
    history_ : list of ExperimentRecord
    classes_ : ndarray
    """

    def __init__(
        self,
        hidden_layer_sizes=(300, 100),
        init="glorot_uniform",
        std=0.1,
        n_lightnings=1000,
        strength=0.5,
        learning_rate=0.05,
        batch_size=100,
        epochs=30,
        shuffle=True,
        random_state=0,
    ):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.init = init
        self.std = std
        self.n_lightnings = n_lightnings
        self.strength = strength
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.shuffle = shuffle
        self.random_state = random_state

    def _spec(self) -> InitializerSpec:
        kind = InitKind(self.init)
        seed = 0 if self.random_state is None else int(self.random_state)
        return InitializerSpec(
            kind,
            seed,
            std=self.std if kind is InitKind.TRUNCATED_NORMAL else None,
            lightning=LightningConfig(int(self.n_lightnings), float(self.strength), seed),
        )

    def fit(self, X, y, X_val=None, y_val=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        check_classification_targets(y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        sizes = [X.shape[1], *self.hidden_layer_sizes, len(self.classes_)]
        self.network_ = build_network(sizes, self._spec())
        config = TrainConfig(
            self.learning_rate,
            min(self.batch_size, X.shape[0]),
            self.epochs,
            0 if self.random_state is None else int(self.random_state),
            self.shuffle,
        )
        validation = None
        if X_val is not None:
            X_val = check_array(X_val, dtype=np.float64)
            validation = _Arrays(X_val, np.searchsorted(self.classes_, y_val))
        self.history_ = train(self.network_, _Arrays(X, encoded), config, validation)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "network_")
        X = check_array(X, dtype=np.float64)
        return forward(self.network_, X)

    def predict(self, X):
        check_is_fitted(self, "network_")
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
