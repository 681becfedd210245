"""Exact un-hashed reference model and the collision-error decomposition.

The reference model keeps one explicit weight per token (and per user-scoped
token in personalized mode), trained by the same SGD schedule as the hashed
learner: same step counts, same learning rates, same example order.  Any gap
between the two is therefore pure hashing effect, split into

  distortion   eps_d: a vector's own tokens colliding among themselves,
                      measured against the matching reference weights;
  interference eps_i: everything else sharing the bucket array, i.e. other
                      users' weights plus global-vs-personal cross talk.

Tracking explicit weights is only affordable at small vocab * user products;
the constructor enforces that.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError, OracleModeError, TrainingDiverged
from .hashcore import (
    HashConfig,
    SparseVector,
    feature_map,
    hashed_inner,
    personalized_token,
)
from .learner import (
    BIAS_TOKEN,
    DEFAULT_LR0,
    Example,
    HashedModel,
    featurize,
    predict,
)

ORACLE_WEIGHT_LIMIT = 1_000_000


class OracleModel:
    """Explicit-weight twin of the hashed learner.

    ``w0`` maps raw tokens to global weights; ``wu`` maps each task (user) to
    its own token weights.  ``vocab_size`` and the task count are declared up
    front so the weight-table budget is checked before any training happens.
    """

    def __init__(self, vocab_size: int, n_tasks: int = 0, lr0: float = DEFAULT_LR0):
        if vocab_size < 1 or n_tasks < 0:
            raise InputError("vocab_size must be >= 1 and n_tasks >= 0")
        budget = vocab_size * (n_tasks + 1)
        if budget > ORACLE_WEIGHT_LIMIT:
            raise OracleModeError(
                f"explicit weights need vocab * (tasks + 1) <= {ORACLE_WEIGHT_LIMIT}, "
                f"got {vocab_size} * {n_tasks + 1} = {budget}"
            )
        if not (math.isfinite(lr0) and lr0 > 0):
            raise InputError(f"lr0 must be finite and > 0, got {lr0!r}")
        self.vocab_size = vocab_size
        self.n_tasks = n_tasks
        self.lr0 = lr0
        self.w0: dict[bytes, float] = {}
        self.wu: dict[bytes, dict[bytes, float]] = {}
        self.examples_seen = 0

    def task_weights(self, user: bytes) -> dict[bytes, float]:
        w = self.wu.get(user)
        if w is None:
            if len(self.wu) >= self.n_tasks:
                raise OracleModeError(
                    f"task {user!r} exceeds the declared task count {self.n_tasks}"
                )
            w = self.wu[user] = {}
        return w

    def score(self, ex: Example, *, personalized: bool, include_bias: bool = True) -> float:
        counts = Counter(ex.tokens)
        w0 = self.w0
        s = 0.0
        for t, c in counts.items():
            g = w0.get(t)
            if g is not None:
                s += g * c
        if personalized:
            wu = self.wu.get(ex.user)
            if wu:
                for t, c in counts.items():
                    p = wu.get(t)
                    if p is not None:
                        s += p * c
        if include_bias:
            s += w0.get(BIAS_TOKEN, 0.0)
        return s

    def train_example(self, ex: Example, *, personalized: bool, include_bias: bool = True) -> None:
        if not ex.tokens:
            raise InputError(f"training example for user {ex.user!r} has no tokens")
        t = self.examples_seen + 1
        score = self.score(ex, personalized=personalized, include_bias=include_bias)
        if not math.isfinite(score):
            raise TrainingDiverged(t, None, score)
        r = self.lr0 / math.sqrt(t) * (ex.label - score)
        counts = Counter(ex.tokens)
        w0 = self.w0
        for tok, c in counts.items():
            w0[tok] = w0.get(tok, 0.0) + r * c
        if personalized:
            wu = self.task_weights(ex.user)
            for tok, c in counts.items():
                wu[tok] = wu.get(tok, 0.0) + r * c
        if include_bias:
            w0[BIAS_TOKEN] = w0.get(BIAS_TOKEN, 0.0) + r
        self.examples_seen = t


def oracle_train(
    examples: Sequence[Example],
    *,
    vocab_size: int,
    personalized: bool,
    lr0: float = DEFAULT_LR0,
    epochs: int = 1,
    include_bias: bool = True,
) -> OracleModel:
    """Reference twin of ``train_model``: same order, schedule, and epochs."""
    if epochs < 1:
        raise InputError(f"epochs must be >= 1, got {epochs!r}")
    ordered = sorted(examples, key=lambda e: e.timestamp)
    n_tasks = len({e.user for e in ordered}) if personalized else 0
    model = OracleModel(vocab_size, n_tasks, lr0=lr0)
    for _ in range(epochs):
        for e in ordered:
            model.train_example(e, personalized=personalized, include_bias=include_bias)
    return model


def oracle_scores(
    model: OracleModel,
    examples: Sequence[Example],
    *,
    personalized: bool,
    include_bias: bool = True,
) -> np.ndarray:
    return np.array(
        [model.score(e, personalized=personalized, include_bias=include_bias) for e in examples]
    )


# ---------------------------------------------------------------------------
# decomposition


@dataclass(frozen=True)
class ErrorDecomposition:
    """Hashing error split: self-collision distortion plus cross interference."""

    eps_d: float
    eps_i: float


def _tf_vector(ex: Example, *, include_bias: bool) -> SparseVector:
    counts = Counter(ex.tokens)
    entries = {t: float(c) for t, c in counts.items()}
    if include_bias:
        entries[BIAS_TOKEN] = entries.get(BIAS_TOKEN, 0.0) + 1.0
    return SparseVector(entries)


def _scoped(vec: SparseVector, user: bytes) -> SparseVector:
    return SparseVector({personalized_token(t, user): v for t, v in vec.entries.items()})


def hybrid_image(oracle: OracleModel, cfg: HashConfig) -> HashedModel:
    """Hash the reference weights into one bucket array.

    Result: the image of the global weights plus the image of every task's
    weights under its user scoping, which is exactly the weight vector whose
    score decomposes into the exact score plus eps_d plus eps_i.
    """
    combined: dict[bytes, float] = dict(oracle.w0)
    for user, wu in oracle.wu.items():
        for t, v in wu.items():
            combined[personalized_token(t, user)] = v
    img = feature_map(SparseVector(combined), cfg).to_dense()
    return HashedModel(
        cfg=cfg, weights=img, examples_seen=oracle.examples_seen, lr0=oracle.lr0
    )


def decompose_errors(
    ex: Example,
    model: HashedModel,
    oracle: OracleModel,
    *,
    personalized: bool = True,
    include_bias: bool = True,
) -> ErrorDecomposition:
    """Split the hashed score's deviation from the exact reference score.

    eps_d compares each component's hashed self-product against its exact
    counterpart; eps_i is the remaining residual of the full hashed score.
    When ``model`` is ``hybrid_image(oracle, cfg)`` the residual consists
    precisely of the cross terms (other tasks, and global against personal),
    and ``interference_terms`` recomputes it from those sums directly.
    """
    cfg = model.cfg
    x = _tf_vector(ex, include_bias=include_bias)
    w0 = SparseVector(oracle.w0)
    phi_x = feature_map(x, cfg)
    exact = x.dot(w0)
    eps_d = hashed_inner(phi_x, feature_map(w0, cfg)) - exact
    if personalized:
        x_raw = _tf_vector(ex, include_bias=False)
        wu = SparseVector(oracle.wu.get(ex.user, {}))
        exact_u = x_raw.dot(wu)
        eps_d += hashed_inner(
            feature_map(_scoped(x_raw, ex.user), cfg),
            feature_map(_scoped(wu, ex.user), cfg),
        ) - exact_u
        exact += exact_u
    total = predict(
        model, featurize(ex, cfg, personalized, include_bias=include_bias)
    )
    return ErrorDecomposition(eps_d=eps_d, eps_i=total - exact - eps_d)


def interference_terms(
    ex: Example,
    oracle: OracleModel,
    cfg: HashConfig,
    *,
    include_bias: bool = True,
) -> float:
    """Direct sum of the cross terms hitting this example's hashed score.

    Independent route to eps_i for the hybrid-image model: other tasks'
    weight images against the example's full image, plus the two
    global/personal cross products.  Used to check the residual in
    ``decompose_errors`` term by term.
    """
    x = _tf_vector(ex, include_bias=include_bias)
    x_raw = _tf_vector(ex, include_bias=False)
    phi0_x = feature_map(x, cfg)
    phiu_x = feature_map(_scoped(x_raw, ex.user), cfg)
    phi0_w = feature_map(SparseVector(oracle.w0), cfg)
    phiu_w = feature_map(
        _scoped(SparseVector(oracle.wu.get(ex.user, {})), ex.user), cfg
    )

    others: dict[bytes, float] = {}
    for user, wu in oracle.wu.items():
        if user == ex.user:
            continue
        for t, v in wu.items():
            others[personalized_token(t, user)] = v
    phi_others = feature_map(SparseVector(others), cfg)

    full_x_dense = phi0_x.to_dense() + phiu_x.to_dense()
    full_x = _as_hashed(full_x_dense, cfg)
    return (
        hashed_inner(full_x, phi_others)
        + hashed_inner(phiu_x, phi0_w)
        + hashed_inner(phi0_x, phiu_w)
    )


def _as_hashed(dense: np.ndarray, cfg: HashConfig):
    from .hashcore import HashedVector

    return HashedVector(cfg.m, dense=dense)
