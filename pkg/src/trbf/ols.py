"""Dynamic orthogonal least squares: forward selection of whole hidden blocks.

Each round scores every remaining candidate block by the summed error
reduction of its ``nnc`` columns, orthogonalized against the columns
already chosen and against the block's own earlier columns (shift order).
The best block is committed, and the candidate pool is deflated against
the new orthogonal directions. Selection stops when the unexplained
fraction of target energy drops to ``epsilon``, when ``max_blocks`` is
reached, or when no admissible block remains. Output weights come from
back-substitution on the unit upper-triangular factor.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import (
    HiddenBlock,
    NetConfig,
    TrbfEnsemble,
    TrbfNetwork,
    check_tokens,
    fit_stats,
    kernel_matrix,
    standardize,
    subwindows,
)
from .errors import DegenerateTargetError, DimensionError, EmptyInputError

log = logging.getLogger(__name__)

# Called with every finished OlsState; tests hook invariant checks here.
STATE_OBSERVERS: List[Callable[["OlsState"], None]] = []


@dataclass(frozen=True)
class TrainConfig:
    epsilon: float = 0.1
    max_blocks: int = 60
    drop_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.max_blocks < 1:
            raise ValueError(f"max_blocks must be >= 1, got {self.max_blocks}")
        if self.drop_tol < 0:
            raise ValueError("drop_tol must be >= 0")


def build_candidates(prototypes, train, cfg: NetConfig, ids: Optional[Sequence[str]] = None):
    """Candidate blocks from prototype tokens and their activation matrix.

    Returns ``(blocks, P)``; ``P`` has one row per training token and
    ``nnc`` consecutive columns per block.
    """
    prototypes = np.asarray(prototypes, dtype=float)
    train = np.asarray(train, dtype=float)
    if prototypes.size == 0 or train.size == 0:
        raise EmptyInputError("need at least one prototype and one training token")
    prototypes = check_tokens(prototypes, cfg)
    train = check_tokens(train, cfg)
    if ids is None:
        ids = [str(k) for k in range(len(prototypes))]
    centers = subwindows(prototypes, cfg.nde)
    blocks = [HiddenBlock(c, str(i)) for c, i in zip(centers, ids)]
    return blocks, kernel_matrix(train, centers, cfg.sigma)


def orthogonalize_column(p, W, passes: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Gram-Schmidt step: remove from ``p`` its components along the columns of W.

    Returns ``(w, alphas)`` with ``p == w + W @ alphas``. ``passes=2``
    repeats the projection on the remainder and accumulates the
    coefficients, which keeps ``w`` orthogonal to working precision.
    """
    w = np.array(p, dtype=float)
    W = np.asarray(W, dtype=float).reshape(w.shape[0], -1)
    alphas = np.zeros(W.shape[1])
    if W.shape[1] == 0:
        return w, alphas
    norms = np.einsum("ij,ij->j", W, W)
    for _ in range(passes):
        a = (W.T @ w) / norms
        w = w - W @ a
        alphas += a
    return w, alphas


def error_reduction(w, d) -> float:
    """Fraction of target energy ``d`` explained by the orthogonal column ``w``."""
    w = np.asarray(w, dtype=float)
    d = np.asarray(d, dtype=float)
    dd = float(d @ d)
    if dd <= 0.0:
        raise DegenerateTargetError("target vector has zero energy")
    ww = float(w @ w)
    if ww <= 0.0:
        return 0.0
    g = float(w @ d) / ww
    return g * g * ww / dd


def solve_weights(A, g) -> np.ndarray:
    """Back-substitution for ``A @ theta = g`` with A unit upper triangular."""
    A = np.asarray(A, dtype=float)
    g = np.asarray(g, dtype=float)
    M = g.shape[0]
    if A.shape != (M, M):
        raise DimensionError(f"A has shape {A.shape}, g has length {M}")
    theta = np.zeros(M)
    for k in range(M - 1, -1, -1):
        theta[k] = (g[k] - A[k, k + 1 :] @ theta[k + 1 :]) / A[k, k]
    return theta


@dataclass
class OlsState:
    P: np.ndarray
    d: np.ndarray
    nnc: int
    drop_tol: float = 1e-10
    W: np.ndarray = None
    A: np.ndarray = None
    g: np.ndarray = None
    err: List[float] = field(default_factory=list)
    err_sum: float = 0.0
    selected: List[int] = field(default_factory=list)
    discarded: List[int] = field(default_factory=list)
    history: List[Tuple[int, int, float, float, float]] = field(default_factory=list)
    trajectory: List[Tuple[int, float]] = field(default_factory=list)

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=float)
        self.d = np.asarray(self.d, dtype=float)
        N, cols = self.P.shape
        if self.d.shape != (N,):
            raise DimensionError(f"target length {self.d.shape} does not match {N} rows")
        if cols % self.nnc:
            raise DimensionError(f"{cols} candidate columns are not a multiple of block size {self.nnc}")
        self.dd = float(self.d @ self.d)
        if self.dd <= 0.0:
            raise DegenerateTargetError("target vector has zero energy")
        self.W = np.zeros((N, 0))
        self.A = np.zeros((0, 0))
        self.g = np.zeros(0)
        # candidate columns deflated against W, shape (active blocks, nnc, N)
        self._ids = np.arange(cols // self.nnc)
        self._pool = self.P.T.copy(order="C").reshape(-1, self.nnc, N)

    @property
    def n_blocks(self) -> int:
        return self.P.shape[1] // self.nnc

    @property
    def residual_fraction(self) -> float:
        return 1.0 - self.err_sum

    def score_candidates(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Summed error reduction for every active block.

        Returns ``(ids, scores, admissible)`` aligned with the active pool.
        """
        pool = self._pool
        n_act = pool.shape[0]
        U = np.empty_like(pool)
        norms = np.empty((n_act, self.nnc))
        for j in range(self.nnc):
            u = pool[:, j, :].copy()
            for i in range(j):
                denom = np.where(norms[:, i] > 0.0, norms[:, i], 1.0)
                coef = np.einsum("bn,bn->b", U[:, i, :], pool[:, j, :]) / denom
                u -= coef[:, None] * U[:, i, :]
            U[:, j, :] = u
            norms[:, j] = np.einsum("bn,bn->b", u, u)
        admissible = np.all(norms > self.drop_tol, axis=1)
        proj = U @ self.d
        safe = np.where(norms > 0.0, norms, 1.0)
        scores = np.sum(proj * proj / safe, axis=1) / self.dd
        scores[~admissible] = -np.inf
        return self._ids.copy(), scores, admissible

    def select_next_block(self) -> Optional[int]:
        """Commit the best admissible block; None when the pool is exhausted."""
        if self._ids.size == 0:
            return None
        ids, scores, admissible = self.score_candidates()
        if (~admissible).any():
            self.discarded.extend(int(b) for b in ids[~admissible])
        if not admissible.any():
            self._drop(np.ones(ids.size, dtype=bool))
            return None
        pos = int(np.argmax(scores))
        block = int(ids[pos])
        self._commit(block)
        remove = ~admissible
        remove[pos] = True
        self._drop(remove)
        return block

    def _drop(self, mask):
        keep = ~mask
        self._ids = self._ids[keep]
        self._pool = self._pool[keep]

    def _commit(self, block: int):
        k0 = self.W.shape[1]
        new_w = []
        block_err = 0.0
        for j in range(self.nnc):
            p = self.P[:, block * self.nnc + j]
            w, alphas = orthogonalize_column(p, self.W, passes=2)
            ww = float(w @ w)
            k = self.W.shape[1]
            A = np.zeros((k + 1, k + 1))
            A[:k, :k] = self.A
            A[:k, k] = alphas
            A[k, k] = 1.0
            g = float(w @ self.d) / ww
            e = g * g * ww / self.dd
            self.A = A
            self.g = np.append(self.g, g)
            self.W = np.column_stack([self.W, w])
            self.err.append(e)
            self.err_sum += e  # running sum of non-negative terms stays monotone
            block_err += e
            new_w.append(w)
        self.selected.append(block)
        Wn = np.column_stack(new_w)
        if self._pool.shape[0]:
            flat = self._pool.reshape(-1, self._pool.shape[2])
            coef = (flat @ Wn) / np.einsum("ij,ij->j", Wn, Wn)
            flat -= coef @ Wn.T
        it = len(self.selected)
        self.history.append((it, block, block_err, self.err_sum, 1.0 - self.err_sum))
        self.trajectory.append((self.W.shape[1], self.err_sum))
        assert self.W.shape[1] == k0 + self.nnc

    def weights(self) -> np.ndarray:
        return solve_weights(self.A, self.g)


def fit_ols(P, d, nnc: int, cfg: TrainConfig = TrainConfig()) -> OlsState:
    """Run block selection on a precomputed activation matrix."""
    state = OlsState(P, d, nnc, drop_tol=cfg.drop_tol)
    while len(state.selected) < cfg.max_blocks:
        if state.selected and state.residual_fraction <= cfg.epsilon:
            break
        if state.select_next_block() is None:
            break
    if not state.selected:
        raise DegenerateTargetError("no admissible candidate block; every column collapsed below drop_tol")
    for observer in STATE_OBSERVERS:
        observer(state)
    return state


def one_vs_all(labels, class_id) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size == 0:
        raise DegenerateTargetError("empty target set")
    d = (labels == class_id).astype(float)
    if d.all() or not d.any():
        raise DegenerateTargetError(f"class {class_id!r} targets are all {int(d[0])}; need both in- and out-of-class tokens")
    return d


def train_network(
    prototypes,
    train,
    labels,
    netcfg: NetConfig,
    traincfg: TrainConfig = TrainConfig(),
    class_id=1,
    candidates=None,
) -> Tuple[TrbfNetwork, OlsState]:
    """Train the binary network for ``class_id`` (targets 1 in-class, 0 otherwise).

    ``candidates`` may carry a precomputed ``(blocks, P)`` pair from
    :func:`build_candidates`, shared between class networks.
    """
    d = one_vs_all(labels, class_id)
    blocks, P = candidates if candidates is not None else build_candidates(prototypes, train, netcfg)
    state = fit_ols(P, d, netcfg.nnc, traincfg)
    net = TrbfNetwork(netcfg, [blocks[b] for b in state.selected], state.weights(), str(class_id))
    return net, state


def train_ensemble(
    prototypes,
    prototype_labels,
    train,
    labels,
    netcfg: NetConfig,
    traincfg: TrainConfig = TrainConfig(),
    classes: Optional[Sequence] = None,
    n_jobs: Optional[int] = None,
) -> Tuple[TrbfEnsemble, Dict[str, OlsState]]:
    """Standardize, build the shared candidate pool and train one network per class.

    Every class network draws its blocks from the pooled prototypes of all
    classes. Returns the ensemble and the per-class selection states.
    """
    train = check_tokens(train, netcfg)
    prototypes = check_tokens(prototypes, netcfg)
    labels = np.asarray(labels).astype(str)
    prototype_labels = np.asarray(prototype_labels).astype(str)
    if classes is None:
        classes = list(np.unique(labels))
    classes = [str(c) for c in classes]
    if len(classes) < 2:
        raise DegenerateTargetError("need at least two classes")

    stats = fit_stats(train)
    Xs = standardize(stats, train)
    Ps = standardize(stats, prototypes)
    counts: Dict[str, int] = {}
    ids = []
    for lab in prototype_labels:
        ids.append(f"{lab}:{counts.get(lab, 0)}")
        counts[lab] = counts.get(lab, 0) + 1
    candidates = build_candidates(Ps, Xs, netcfg, ids)
    log.info("candidate pool: %d blocks x %d units over %d tokens", len(candidates[0]), netcfg.nnc, len(Xs))

    def run(cls):
        return train_network(None, None, labels, netcfg, traincfg, cls, candidates)

    if n_jobs is not None and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run, classes))
    else:
        results = [run(c) for c in classes]

    nets = [r[0] for r in results]
    states = {c: r[1] for c, r in zip(classes, results)}
    for c, s in states.items():
        log.info("class %s: %d blocks, 1-err_sum=%.4f", c, len(s.selected), s.residual_fraction)
    meta = {
        "targets": "0/1",
        "kernel": "gaussian exp(-r^2/(2 sigma^2))",
        "epsilon": traincfg.epsilon,
        "max_blocks": traincfg.max_blocks,
        "drop_tol": traincfg.drop_tol,
    }
    return TrbfEnsemble(netcfg, nets, stats, classes, meta), states


def format_training_log(states: Dict[str, OlsState]) -> str:
    """Tab-separated per-iteration log for every class network."""
    lines = ["class\titeration\tblock\tblock_err\terr_sum\tresidual"]
    for cls, state in states.items():
        for it, block, berr, esum, resid in state.history:
            lines.append(f"{cls}\t{it}\t{block}\t{berr!r}\t{esum!r}\t{resid!r}")
    return "\n".join(lines) + "\n"


def check_invariants(state: OlsState, tol: float = 1e-8) -> None:
    """Raise AssertionError when a selection run breaks a structural invariant."""
    W = state.W
    if W.shape[1] > 1:
        norms = np.linalg.norm(W, axis=0)
        G = np.abs(W.T @ W) / np.outer(norms, norms)
        np.fill_diagonal(G, 0.0)
        assert G.max() <= tol, f"orthogonality lost: {G.max():.3e}"
    A = state.A
    assert np.allclose(np.tril(A, -1), 0.0) and np.all(np.diag(A) == 1.0), "A is not unit upper triangular"
    prev = -np.inf
    for ncols, esum in state.trajectory:
        assert ncols % state.nnc == 0, f"{ncols} committed columns not a multiple of {state.nnc}"
        assert esum >= prev, "err_sum decreased"
        assert -1e-12 <= esum <= 1.0 + tol, f"err_sum {esum} out of [0, 1]"
        prev = esum
