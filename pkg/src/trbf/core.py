"""Block-structured temporal RBF networks.

A token is an ``(nfe, n)`` window of feature frames. A hidden block holds
``nnc = nfe - nde + 1`` Gaussian units; unit ``j`` compares the token's
sub-window at frame offset ``j`` (``nde`` frames, flattened frame-major)
with its own centre. A network is a weighted sum over all units of all
blocks; one network per class forms an ensemble, classified by argmax.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .errors import DimensionError

STD_FLOOR = 1e-8
_CHUNK = 1 << 22  # elements per distance batch


@dataclass(frozen=True)
class NetConfig:
    n: int = 13
    nfe: int = 5
    nde: int = 4
    sigma: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not (1 <= self.nde <= self.nfe):
            raise ValueError(f"time delay must satisfy 1 <= Nde <= Nfe, got Nde={self.nde}, Nfe={self.nfe}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def nnc(self) -> int:
        return block_size(self.nfe, self.nde)

    @property
    def center_dim(self) -> int:
        return self.n * self.nde


def block_size(nfe: int, nde: int) -> int:
    """Units per hidden block for an ``nfe``-frame window and ``nde`` delay."""
    if not (1 <= nde <= nfe):
        raise ValueError(f"time delay must satisfy 1 <= Nde <= Nfe, got Nde={nde}, Nfe={nfe}")
    return nfe - nde + 1


def token_subwindow(token: np.ndarray, j: int, nde: int) -> np.ndarray:
    token = np.asarray(token, dtype=float)
    if not (0 <= j <= token.shape[0] - nde):
        raise ValueError(f"shift {j} outside 0..{token.shape[0] - nde}")
    return token[j : j + nde].ravel()


def subwindows(X: np.ndarray, nde: int) -> np.ndarray:
    """All shifted sub-windows: ``(N, nfe, n) -> (N, nnc, nde * n)``."""
    X = np.asarray(X, dtype=float)
    nnc = X.shape[1] - nde + 1
    return np.stack([X[:, j : j + nde].reshape(X.shape[0], -1) for j in range(nnc)], axis=1)


def gaussian_kernel(r, sigma: float = 1.0):
    return np.exp(-np.square(r) / (2.0 * sigma * sigma))


def kernel_matrix(X: np.ndarray, centers: np.ndarray, sigma: float) -> np.ndarray:
    """Unit activations for every token against every block.

    ``X`` is ``(N, nfe, n)`` and ``centers`` is ``(B, nnc, nde * n)``.
    Returns ``(N, B * nnc)`` with column ``b * nnc + j`` holding unit
    ``(b, j)``.
    """
    nnc = centers.shape[1]
    nde = centers.shape[2] // X.shape[2]
    sub = subwindows(X, nde)
    n_tok, n_blk, dim = X.shape[0], centers.shape[0], centers.shape[2]
    out = np.empty((n_tok, n_blk, nnc))
    step = max(1, _CHUNK // max(1, n_blk * dim))
    for j in range(nnc):
        c = centers[:, j]
        for lo in range(0, n_tok, step):
            diff = sub[lo : lo + step, j, None, :] - c[None, :, :]
            d2 = np.einsum("nbk,nbk->nb", diff, diff)
            out[lo : lo + step, :, j] = np.exp(-d2 / (2.0 * sigma * sigma))
    return out.reshape(n_tok, -1)


@dataclass
class HiddenBlock:
    centers: np.ndarray  # (nnc, nde * n)
    source_id: str = ""

    @classmethod
    def from_token(cls, token, cfg: NetConfig, source_id: str = "") -> "HiddenBlock":
        return cls(subwindows(np.asarray(token, dtype=float)[None], cfg.nde)[0], source_id)


@dataclass
class TrbfNetwork:
    cfg: NetConfig
    blocks: List[HiddenBlock]
    weights: np.ndarray
    class_id: str = ""

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.size != len(self.blocks) * self.cfg.nnc:
            raise DimensionError(
                f"{len(self.blocks)} blocks of {self.cfg.nnc} units need "
                f"{len(self.blocks) * self.cfg.nnc} weights, got {self.weights.size}"
            )

    @property
    def centers(self) -> np.ndarray:
        if not self.blocks:
            return np.zeros((0, self.cfg.nnc, self.cfg.center_dim))
        return np.stack([b.centers for b in self.blocks])

    def response(self, X) -> np.ndarray:
        """Scores for a batch of (already standardized) tokens."""
        X = check_tokens(X, self.cfg)
        if not self.blocks:
            return np.zeros(X.shape[0])
        return kernel_matrix(X, self.centers, self.cfg.sigma) @ self.weights


def network_response(net: TrbfNetwork, token) -> float:
    return float(net.response(np.asarray(token, dtype=float)[None])[0])


@dataclass
class Stats:
    mean: np.ndarray
    std: np.ndarray


def fit_stats(tokens) -> Stats:
    """Per-feature mean and standard deviation over every frame of every token."""
    frames = np.asarray(tokens, dtype=float)
    frames = frames.reshape(-1, frames.shape[-1])
    if frames.shape[0] == 0:
        raise ValueError("cannot fit statistics on zero tokens")
    return Stats(frames.mean(axis=0), frames.std(axis=0))


def standardize(stats: Stats, tokens) -> np.ndarray:
    return (np.asarray(tokens, dtype=float) - stats.mean) / np.maximum(stats.std, STD_FLOOR)


def check_tokens(X, cfg: NetConfig) -> np.ndarray:
    """Coerce X to ``(N, nfe, n)``; flattened ``(N, nfe * n)`` rows are accepted."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2 and X.shape[1] == cfg.nfe * cfg.n:
        X = X.reshape(X.shape[0], cfg.nfe, cfg.n)
    if X.ndim != 3 or X.shape[1:] != (cfg.nfe, cfg.n):
        raise DimensionError(f"tokens must have shape (N, {cfg.nfe}, {cfg.n}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("tokens contain non-finite values")
    return X


@dataclass
class TrbfEnsemble:
    cfg: NetConfig
    networks: List[TrbfNetwork]
    stats: Stats
    classes: List[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def scores(self, X, standardized: bool = False) -> np.ndarray:
        """``(N, n_classes)`` network responses. Raw tokens are standardized first."""
        X = check_tokens(X, self.cfg)
        if not standardized:
            X = standardize(self.stats, X)
        return np.stack([net.response(X) for net in self.networks], axis=1)

    def predict_index(self, X, standardized: bool = False) -> np.ndarray:
        return np.argmax(self.scores(X, standardized), axis=1)

    def predict(self, X, standardized: bool = False) -> np.ndarray:
        return np.asarray(self.classes)[self.predict_index(X, standardized)]


def classify(ens: TrbfEnsemble, token, standardized: bool = False) -> Tuple[str, np.ndarray]:
    """Winning class (lowest index on ties) and all class scores for one token."""
    s = ens.scores(np.asarray(token, dtype=float)[None], standardized)[0]
    return ens.classes[int(np.argmax(s))], s
