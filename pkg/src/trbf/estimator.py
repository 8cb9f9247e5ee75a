"""scikit-learn estimator wrapping SOM quantization and TRBF training."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .core import NetConfig
from .errors import DimensionError
from .ols import TrainConfig, train_ensemble
from .quantizer import SomQuantizer


def check_token_array(X, nfe: int, n_features=None) -> np.ndarray:
    """Validate tokens as ``(N, nfe, n)``; 2-D input is split into ``nfe`` frames."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        if X.shape[1] % nfe:
            raise DimensionError(f"{X.shape[1]} columns cannot be split into {nfe} frames")
        X = X.reshape(X.shape[0], nfe, X.shape[1] // nfe)
    if X.ndim != 3 or X.shape[1] != nfe:
        raise DimensionError(f"expected tokens of shape (N, {nfe}, n), got {X.shape}")
    if n_features is not None and X.shape[2] != n_features:
        raise DimensionError(f"tokens have {X.shape[2]} features per frame, model expects {n_features}")
    if X.shape[0] == 0:
        raise ValueError("no tokens given")
    if not np.all(np.isfinite(X)):
        raise ValueError("tokens contain NaN or infinity")
    return X


class TRBFClassifier(ClassifierMixin, BaseEstimator):
    """Temporal RBF classifier: one block-structured network per class.

    Parameters
    ----------
    nfe : int
        Frames per token.
    nde : int
        Frames per hidden-unit sub-window; each block has ``nfe - nde + 1`` units.
    sigma : float
        Gaussian receptive field.
    epsilon : float
        Stop once the unexplained target energy fraction is at most this.
    max_blocks : int
        Cap on hidden blocks per class network.
    drop_tol : float
        Blocks with an orthogonalized column of squared norm at or below
        this are discarded.
    quantize : bool
        Draw candidate centres from per-class SOM codebooks; otherwise every
        training token is a candidate.
    som_rows, som_cols, som_epochs, som_alpha0, min_hits
        Codebook map settings.
    n_jobs : int or None
        Threads used to train class networks.
    random_state : int
        Seed for the codebook maps.

    Attributes
    ----------
    classes_, ensemble_, prototypes_, prototype_labels_, ols_states_
    """

    def __init__(
        self,
        nfe=5,
        nde=4,
        sigma=1.0,
        epsilon=0.1,
        max_blocks=60,
        drop_tol=1e-10,
        quantize=True,
        som_rows=16,
        som_cols=16,
        som_epochs=50,
        som_alpha0=0.5,
        min_hits=1,
        n_jobs=None,
        random_state=0,
    ):
        self.nfe = nfe
        self.nde = nde
        self.sigma = sigma
        self.epsilon = epsilon
        self.max_blocks = max_blocks
        self.drop_tol = drop_tol
        self.quantize = quantize
        self.som_rows = som_rows
        self.som_cols = som_cols
        self.som_epochs = som_epochs
        self.som_alpha0 = som_alpha0
        self.min_hits = min_hits
        self.n_jobs = n_jobs
        self.random_state = random_state

    def _net_config(self, n):
        return NetConfig(n=n, nfe=self.nfe, nde=self.nde, sigma=self.sigma)

    def _train_config(self):
        return TrainConfig(
            epsilon=self.epsilon, max_blocks=self.max_blocks, drop_tol=self.drop_tol, seed=int(self.random_state or 0)
        )

    def fit(self, X, y, prototypes=None, prototype_labels=None):
        """Fit class networks.

        Precomputed ``prototypes`` (with ``prototype_labels``) skip the
        quantization step.
        """
        X = check_token_array(X, self.nfe)
        y = np.asarray(y).astype(str)
        if y.shape != (X.shape[0],):
            raise ValueError(f"{X.shape[0]} tokens but {y.shape} labels")
        netcfg = self._net_config(X.shape[2])
        self.classes_ = np.unique(y)

        if prototypes is not None:
            protos = check_token_array(prototypes, self.nfe, X.shape[2])
            plabels = np.asarray(prototype_labels).astype(str)
        elif self.quantize:
            q = SomQuantizer(
                rows=self.som_rows,
                cols=self.som_cols,
                epochs=self.som_epochs,
                alpha0=self.som_alpha0,
                min_hits=self.min_hits,
                random_state=self.random_state,
            ).fit(X, y)
            protos, plabels = q.prototypes_, q.prototype_labels_.astype(str)
        else:
            protos, plabels = X, y

        self.prototypes_ = protos
        self.prototype_labels_ = plabels
        self.ensemble_, self.ols_states_ = train_ensemble(
            protos, plabels, X, y, netcfg, self._train_config(), classes=list(self.classes_), n_jobs=self.n_jobs
        )
        self.n_features_in_ = X.shape[1] * X.shape[2]
        return self

    @classmethod
    def from_ensemble(cls, ensemble):
        """Wrap a loaded ensemble as a fitted classifier."""
        cfg = ensemble.cfg
        clf = cls(nfe=cfg.nfe, nde=cfg.nde, sigma=cfg.sigma)
        clf.ensemble_ = ensemble
        clf.classes_ = np.asarray(ensemble.classes)
        clf.n_features_in_ = cfg.nfe * cfg.n
        return clf

    def decision_function(self, X):
        check_is_fitted(self, "ensemble_")
        X = check_token_array(X, self.nfe, self.ensemble_.cfg.n)
        return self.ensemble_.scores(X)

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]
