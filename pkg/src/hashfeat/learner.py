"""Online square-loss classifier trained directly in hashed bucket space.

Training is plain SGD: score with the current weights, step each occupied
bucket by ``lr0/sqrt(t) * (label - score)`` times its feature value.  One
global step counter, examples visited in timestamp order, so a run is
bit-reproducible.  Personalized mode duplicates every token into a raw copy
and a user-scoped copy before hashing, which trains an implicit per-user
weight vector inside the same bucket array.

Evaluation follows the fixed-false-positive protocol: calibrate a threshold
on ham scores, then report the fraction of spam scoring at or below it,
overall and per user-activity bucket ([0], [1], [2,3], [4,7], ...).
"""

from __future__ import annotations

import math
import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import CorpusLine
from .errors import (
    DimensionMismatch,
    InputError,
    ModelFormatError,
    TrainingDiverged,
)
from .hashcore import (
    HashConfig,
    HashedVector,
    hash_token,
    personalized_token,
)
from .murmur3 import murmur3_32_rows

BIAS_TOKEN = b"__BIAS__"
DEFAULT_LR0 = 0.5
DEFAULT_FP_RATE = 0.01

_SPARSE_FRACTION = 4


@dataclass
class Example:
    """One labeled mail ready for featurization (tokens keep multiplicity)."""

    label: int
    user: bytes
    timestamp: int
    tokens: list[bytes]

    def __post_init__(self):
        if self.label not in (-1, 1):
            raise InputError(f"label must be -1 or 1, got {self.label!r}")
        if not self.user:
            raise InputError("user must be non-empty")

    @classmethod
    def from_line(cls, line: CorpusLine) -> "Example":
        return cls(
            label=line.label,
            user=line.user.encode("utf-8"),
            timestamp=line.timestamp,
            tokens=[t.encode("utf-8") for t in line.tokens],
        )


class TokenHasher:
    """Memoized token -> (bucket, sign) lookup for one hash config.

    ``bulk_add`` hashes many tokens in one vectorized pass (grouped by byte
    length); lookups fall back to the scalar path, so results are identical
    with or without prefilling.
    """

    def __init__(self, cfg: HashConfig):
        self.cfg = cfg
        self._map: dict[bytes, tuple[int, int]] = {}

    def __getitem__(self, token: bytes) -> tuple[int, int]:
        hit = self._map.get(token)
        if hit is None:
            hit = self._map[token] = hash_token(token, self.cfg)
        return hit

    def bulk_add(self, tokens: Iterable[bytes]) -> None:
        by_len: dict[int, list[bytes]] = {}
        for t in tokens:
            if t not in self._map:
                by_len.setdefault(len(t), []).append(t)
        mask = self.cfg.m - 1
        for length, group in by_len.items():
            rows = np.frombuffer(b"".join(group), dtype=np.uint8)
            rows = rows.reshape(len(group), length)
            buckets = murmur3_32_rows(rows, self.cfg.bucket_seed) & mask
            signs = murmur3_32_rows(rows, self.cfg.sign_seed) & 1
            store = self._map
            for tok, b, s in zip(group, buckets.tolist(), signs.tolist()):
                store[tok] = (b, 1 if s else -1)


def featurize(
    ex: Example,
    cfg: HashConfig,
    personalized: bool,
    *,
    include_bias: bool = False,
    hasher: TokenHasher | None = None,
) -> HashedVector:
    """Hash one example into bucket space with term-frequency values.

    Personalized mode folds each token twice: raw, and scoped to the user via
    the 0x1F pair encoding.  The bias token, when requested, is global only
    (a per-user bias would burn a bucket per user for no signal).  All values
    are integer counts, so the float accumulation is exact in any fold order.
    """
    if hasher is None:
        hasher = TokenHasher(cfg)
    elif hasher.cfg != cfg:
        raise InputError("hasher was built for a different hash config")
    counts = Counter(ex.tokens)
    acc: dict[int, float] = {}

    def fold(token: bytes, value: float) -> None:
        b, s = hasher[token]
        acc[b] = acc.get(b, 0.0) + s * value

    for tok, c in counts.items():
        fold(tok, float(c))
        if personalized:
            fold(personalized_token(tok, ex.user), float(c))
    if include_bias:
        fold(BIAS_TOKEN, 1.0)
    acc = {b: v for b, v in acc.items() if v != 0.0}
    m = cfg.m
    if len(acc) < m / _SPARSE_FRACTION:
        return HashedVector(m, sparse=acc)
    dense = np.zeros(m)
    for b, v in acc.items():
        dense[b] = v
    return HashedVector(m, dense=dense)


def _phi_arrays(phi: HashedVector) -> tuple[np.ndarray, np.ndarray]:
    """Canonical (bucket index, value) arrays, sorted by bucket."""
    if phi.sparse is not None:
        if not phi.sparse:
            return np.empty(0, dtype=np.int64), np.empty(0)
        idx = np.fromiter(sorted(phi.sparse), dtype=np.int64, count=len(phi.sparse))
        vals = np.array([phi.sparse[int(b)] for b in idx])
        return idx, vals
    idx = np.flatnonzero(phi.dense)
    return idx, phi.dense[idx]


@dataclass
class HashedModel:
    """Weight array over buckets plus the training state that produced it."""

    cfg: HashConfig
    weights: np.ndarray
    examples_seen: int = 0
    lr0: float = DEFAULT_LR0

    def __post_init__(self):
        if not (math.isfinite(self.lr0) and self.lr0 > 0):
            raise InputError(f"lr0 must be finite and > 0, got {self.lr0!r}")
        if self.weights.shape != (self.cfg.m,):
            raise InputError(
                f"weights must have shape ({self.cfg.m},), got {self.weights.shape}"
            )

    @classmethod
    def new(cls, cfg: HashConfig, lr0: float = DEFAULT_LR0) -> "HashedModel":
        return cls(cfg=cfg, weights=np.zeros(cfg.m), lr0=lr0)

    @property
    def nonzero_buckets(self) -> int:
        return int(np.count_nonzero(self.weights))


def predict(model: HashedModel, phi: HashedVector) -> float:
    """Raw score; thresholding is the caller's business."""
    if phi.m != model.cfg.m:
        raise DimensionMismatch(f"bucket counts differ: {phi.m} vs {model.cfg.m}")
    idx, vals = _phi_arrays(phi)
    return float(np.dot(model.weights[idx], vals))


def sgd_update(model: HashedModel, phi: HashedVector, label: int) -> HashedModel:
    """One in-place gradient step; touches only the occupied buckets."""
    if label not in (-1, 1):
        raise InputError(f"label must be -1 or 1, got {label!r}")
    if phi.m != model.cfg.m:
        raise DimensionMismatch(f"bucket counts differ: {phi.m} vs {model.cfg.m}")
    idx, vals = _phi_arrays(phi)
    t = model.examples_seen + 1
    current = model.weights[idx]
    score = float(np.dot(current, vals))
    if not math.isfinite(score):
        worst = int(np.abs(current * vals).argmax()) if len(idx) else None
        raise TrainingDiverged(t, int(idx[worst]) if worst is not None else None, score)
    stepped = current + (model.lr0 / math.sqrt(t) * (label - score)) * vals
    bad = ~np.isfinite(stepped)
    if bad.any():
        j = int(bad.argmax())
        raise TrainingDiverged(t, int(idx[j]), float(stepped[j]))
    model.weights[idx] = stepped
    model.examples_seen = t
    return model


def train_model(
    examples: Sequence[Example],
    cfg: HashConfig,
    *,
    personalized: bool,
    lr0: float = DEFAULT_LR0,
    epochs: int = 1,
    include_bias: bool = True,
    hasher: TokenHasher | None = None,
) -> HashedModel:
    """Train from zero weights, visiting examples in timestamp order."""
    if epochs < 1:
        raise InputError(f"epochs must be >= 1, got {epochs!r}")
    ordered = sorted(examples, key=lambda e: e.timestamp)
    for e in ordered:
        if not e.tokens:
            raise InputError(f"training example for user {e.user!r} has no tokens")
    if hasher is None:
        hasher = TokenHasher(cfg)
    prefill_hasher(hasher, ordered, personalized, include_bias=include_bias)
    model = HashedModel.new(cfg, lr0=lr0)
    for _ in range(epochs):
        for e in ordered:
            phi = featurize(e, cfg, personalized, include_bias=include_bias, hasher=hasher)
            sgd_update(model, phi, e.label)
    return model


def prefill_hasher(
    hasher: TokenHasher,
    examples: Iterable[Example],
    personalized: bool,
    *,
    include_bias: bool = True,
) -> None:
    """Vectorized warm-up of every token the examples will need."""
    needed: set[bytes] = {BIAS_TOKEN} if include_bias else set()
    for e in examples:
        for t in e.tokens:
            needed.add(t)
            if personalized:
                needed.add(personalized_token(t, e.user))
    hasher.bulk_add(needed)


def score_examples(
    model: HashedModel,
    examples: Sequence[Example],
    *,
    personalized: bool,
    include_bias: bool = True,
    hasher: TokenHasher | None = None,
) -> np.ndarray:
    if hasher is None:
        hasher = TokenHasher(model.cfg)
        prefill_hasher(hasher, examples, personalized, include_bias=include_bias)
    out = np.empty(len(examples))
    for i, e in enumerate(examples):
        phi = featurize(e, model.cfg, personalized, include_bias=include_bias, hasher=hasher)
        out[i] = predict(model, phi)
    return out


# ---------------------------------------------------------------------------
# threshold calibration and bucketed evaluation


def calibrate_threshold(scores_on_ham: Sequence[float], fp_rate: float) -> float:
    """Smallest threshold whose strictly-greater false-positive rate fits.

    With scores sorted descending, at most ``floor(N * fp_rate)`` of them may
    exceed the threshold, so the answer is exactly the score at that index.
    """
    n = len(scores_on_ham)
    if n == 0:
        raise InputError("cannot calibrate a threshold on zero ham scores")
    if not 0.0 < fp_rate < 1.0:
        raise InputError(f"fp_rate must lie in (0, 1), got {fp_rate!r}")
    allowed = int(n * fp_rate)
    ordered = np.sort(np.asarray(scores_on_ham, dtype=float))[::-1]
    return float(ordered[allowed])


def bucket_index(n_train: int) -> int:
    """Exponential activity bucket: 0 -> [0], 1 -> [1], 2..3 -> [2,3], ..."""
    if n_train < 0:
        raise InputError(f"training count must be >= 0, got {n_train!r}")
    return 0 if n_train == 0 else n_train.bit_length()


def bucket_label(index: int) -> str:
    if index == 0:
        return "[0]"
    lo, hi = 1 << (index - 1), (1 << index) - 1
    return f"[{lo}]" if lo == hi else f"[{lo},{hi}]"


@dataclass
class BucketStat:
    """Spam-catch numbers for one user-activity bucket."""

    index: int
    label: str
    n_users: int
    n_spam: int
    n_uncaught: int

    @property
    def rate(self) -> float:
        return self.n_uncaught / self.n_spam if self.n_spam else 0.0

    def to_dict(self) -> dict:
        return {
            "bucket": self.label,
            "n_users": self.n_users,
            "n_spam": self.n_spam,
            "n_uncaught": self.n_uncaught,
            "uncaught_rate": self.rate,
        }


@dataclass
class EvalReport:
    """Overall and per-bucket uncaught-spam at a calibrated threshold."""

    threshold: float
    fp_rate_target: float
    fp_rate_realized: float
    n_ham: int
    n_spam: int
    n_uncaught: int
    buckets: list[BucketStat] = field(default_factory=list)

    @property
    def uncaught_rate(self) -> float:
        return self.n_uncaught / self.n_spam if self.n_spam else 0.0

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "fp_rate_target": self.fp_rate_target,
            "fp_rate_realized": self.fp_rate_realized,
            "n_ham": self.n_ham,
            "n_spam": self.n_spam,
            "n_uncaught": self.n_uncaught,
            "uncaught_rate": self.uncaught_rate,
            "buckets": [b.to_dict() for b in self.buckets],
        }


def evaluate_scores(
    labels: Sequence[int],
    users: Sequence[bytes],
    scores: Sequence[float],
    threshold: float,
    train_counts: Mapping[bytes, int],
    *,
    fp_rate_target: float = DEFAULT_FP_RATE,
) -> EvalReport:
    """Bucketed uncaught-spam report from precomputed scores.

    Works for any scorer (hashed model, exact reference model) so the two can
    be compared on identical footing.  A user absent from ``train_counts``
    contributed nothing to training and lands in bucket [0].
    """
    if not (len(labels) == len(users) == len(scores)):
        raise InputError("labels, users, scores must have equal length")
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=float)
    spam = labels == 1
    uncaught = spam & (scores <= threshold)
    n_ham = int((~spam).sum())
    fp = int((scores[~spam] > threshold).sum())

    by_bucket_spam: Counter = Counter()
    by_bucket_uncaught: Counter = Counter()
    bucket_users: dict[int, set] = {}
    for i, u in enumerate(users):
        b = bucket_index(train_counts.get(u, 0))
        bucket_users.setdefault(b, set()).add(u)
        if spam[i]:
            by_bucket_spam[b] += 1
            if uncaught[i]:
                by_bucket_uncaught[b] += 1
    stats = [
        BucketStat(
            index=b,
            label=bucket_label(b),
            n_users=len(bucket_users[b]),
            n_spam=by_bucket_spam[b],
            n_uncaught=by_bucket_uncaught[b],
        )
        for b in sorted(bucket_users)
    ]
    return EvalReport(
        threshold=float(threshold),
        fp_rate_target=fp_rate_target,
        fp_rate_realized=fp / n_ham if n_ham else 0.0,
        n_ham=n_ham,
        n_spam=int(spam.sum()),
        n_uncaught=int(uncaught.sum()),
        buckets=stats,
    )


def evaluate(
    model: HashedModel,
    test: Sequence[Example],
    threshold: float,
    train_counts: Mapping[bytes, int],
    *,
    personalized: bool,
    include_bias: bool = True,
    fp_rate_target: float = DEFAULT_FP_RATE,
    hasher: TokenHasher | None = None,
) -> EvalReport:
    scores = score_examples(
        model, test, personalized=personalized, include_bias=include_bias, hasher=hasher
    )
    return evaluate_scores(
        [e.label for e in test],
        [e.user for e in test],
        scores,
        threshold,
        train_counts,
        fp_rate_target=fp_rate_target,
    )


def ratio_report(ours: EvalReport, baseline: EvalReport) -> dict:
    """Per-bucket uncaught-spam ratios against a baseline run.

    A 0/0 bucket is reported as 1.0 (both models perfect there); a nonzero
    rate against a zero baseline is infinity, which json serializes as
    Infinity.  Buckets are matched by index; unmatched ones are skipped.
    """

    def ratio(a: float, b: float) -> float:
        if b == 0.0:
            return 1.0 if a == 0.0 else math.inf
        return a / b

    base = {b.index: b for b in baseline.buckets}
    out = {
        "overall_ratio": ratio(ours.uncaught_rate, baseline.uncaught_rate),
        "buckets": [
            {"bucket": b.label, "ratio": ratio(b.rate, base[b.index].rate)}
            for b in ours.buckets
            if b.index in base
        ],
    }
    return out


def train_counts_of(train: Sequence[Example]) -> dict[bytes, int]:
    counts: Counter = Counter(e.user for e in train)
    return dict(counts)


# ---------------------------------------------------------------------------
# model files

_MAGIC = b"FHMT"
_VERSION = 1
_HEADER = struct.Struct("<4sIIIIQf")


def save_model(model: HashedModel, path: str) -> None:
    header = _HEADER.pack(
        _MAGIC,
        _VERSION,
        model.cfg.bits,
        model.cfg.bucket_seed,
        model.cfg.sign_seed,
        model.examples_seen,
        model.lr0,
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(model.weights.astype("<f4").tobytes())


def load_model(path: str) -> HashedModel:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _HEADER.size:
        raise ModelFormatError(f"model file truncated: {len(blob)} bytes")
    magic, version, bits, bucket_seed, sign_seed, seen, lr0 = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}")
    if version != _VERSION:
        raise ModelFormatError(f"unsupported model version {version}")
    try:
        cfg = HashConfig(bits=bits, bucket_seed=bucket_seed, sign_seed=sign_seed)
    except InputError as e:
        raise ModelFormatError(f"bad hash config in header: {e}") from None
    body = blob[_HEADER.size :]
    if len(body) != cfg.m * 4:
        raise ModelFormatError(
            f"weight block is {len(body)} bytes, expected {cfg.m * 4}"
        )
    weights = np.frombuffer(body, dtype="<f4").astype(np.float64)
    return HashedModel(cfg=cfg, weights=weights, examples_seen=seen, lr0=lr0)
