"""Signed feature hashing over byte-string token spaces.

A configured hash pair ``(h, xi)`` maps a sparse vector ``x`` indexed by byte
strings to ``m = 2**bits`` real buckets:

    phi(x)[b] = sum over tokens t with h(t) == b of xi(t) * x[t]

``h`` and ``xi`` are two independently seeded MurmurHash3 instances: ``h`` is
the hash reduced to the low ``bits`` bits, ``xi`` is +1 where the low bit of
the second hash is 1, else -1.  Two seeded instances, not two bit ranges of
one hash: the low bit of ``h``'s output is correlated with its residue.

The map is linear, and the induced inner product is an unbiased estimator of
the raw inner product; :func:`variance_closed_form` gives its exact variance
under a uniform random hash pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InputError
from .murmur3 import murmur3_32

# Default relationship between the two seeds when only one is given.
SIGN_SEED_XOR = 0x5F375A86

# feature_map keeps a dict representation while the image stays this sparse.
_SPARSE_FRACTION = 4


@dataclass(frozen=True)
class HashConfig:
    """Bucket count and seeds for one (h, xi) hash pair.

    ``bits`` is capped at 30 so a dense image is always addressable with
    signed 32-bit offsets and fits comfortably in memory.
    """

    bits: int
    bucket_seed: int = 0x9E3779B9
    sign_seed: int | None = None

    def __post_init__(self):
        if not isinstance(self.bits, int) or not 1 <= self.bits <= 30:
            raise InputError(f"bits must be an integer in [1, 30], got {self.bits!r}")
        for name in ("bucket_seed", "sign_seed"):
            v = getattr(self, name)
            if v is None:
                continue
            if not isinstance(v, int) or not 0 <= v < 2**32:
                raise InputError(f"{name} must be a 32-bit unsigned integer, got {v!r}")
        if self.sign_seed is None:
            object.__setattr__(self, "sign_seed", self.bucket_seed ^ SIGN_SEED_XOR)
        if self.sign_seed == self.bucket_seed:
            raise InputError("sign_seed must differ from bucket_seed")

    @property
    def m(self) -> int:
        return 1 << self.bits


def hash_token(token: bytes, cfg: HashConfig) -> tuple[int, int]:
    """Bucket index and sign (+1 or -1) of one token under ``cfg``."""
    if not isinstance(token, bytes):
        raise InputError(f"token must be bytes, got {type(token).__name__}")
    if not token:
        raise InputError("token must be non-empty")
    bucket = murmur3_32(token, cfg.bucket_seed) & (cfg.m - 1)
    sign = 1 if murmur3_32(token, cfg.sign_seed) & 1 else -1
    return bucket, sign


def personalized_token(token: bytes, task: bytes) -> bytes:
    """Canonical task-scoped token: ``task 0x1F token``.

    The separator cannot appear in ``task``, which keeps the mapping
    injective; the token side is unrestricted because it ends the string.
    """
    if not token or not task:
        raise InputError("token and task must be non-empty")
    if b"\x1f" in task:
        raise InputError("task id must not contain the 0x1F separator")
    return task + b"\x1f" + token


def pair_hash(token: bytes, task: bytes, cfg: HashConfig) -> tuple[int, int]:
    """Bucket and sign of ``token`` scoped to ``task``."""
    return hash_token(personalized_token(token, task), cfg)


def _as_token(key) -> bytes:
    if isinstance(key, bytes):
        return key
    if isinstance(key, str):
        return key.encode("utf-8")
    raise InputError(f"token keys must be bytes or str, got {type(key).__name__}")


class SparseVector:
    """Immutable-by-convention sparse vector over byte-string tokens.

    Exact zeros are dropped at construction; ``l2`` and ``l1``/``linf`` are
    cached once.  Values must be finite.
    """

    __slots__ = ("entries", "l2", "l1", "linf")

    def __init__(self, entries, *, _norms: tuple[float, float, float] | None = None):
        clean: dict[bytes, float] = {}
        for k, v in dict(entries).items():
            t = _as_token(k)
            if not t:
                raise InputError("token must be non-empty")
            fv = float(v)
            if not math.isfinite(fv):
                raise InputError(f"non-finite value {v!r} for token {t!r}")
            if fv != 0.0:
                clean[t] = fv
        self.entries = clean
        if _norms is not None:
            self.l2, self.l1, self.linf = _norms
        else:
            self.l2 = math.sqrt(math.fsum(v * v for v in clean.values()))
            self.l1 = math.fsum(abs(v) for v in clean.values())
            self.linf = max((abs(v) for v in clean.values()), default=0.0)

    @property
    def nnz(self) -> int:
        return len(self.entries)

    def dot(self, other: "SparseVector") -> float:
        a, b = self.entries, other.entries
        if len(b) < len(a):
            a, b = b, a
        return math.fsum(v * b[t] for t, v in a.items() if t in b)

    def scaled(self, alpha: float) -> "SparseVector":
        return SparseVector({t: alpha * v for t, v in self.entries.items()})

    def minus(self, other: "SparseVector") -> "SparseVector":
        out = dict(self.entries)
        for t, v in other.entries.items():
            out[t] = out.get(t, 0.0) - v
        return SparseVector(out)

    def __eq__(self, other):
        return isinstance(other, SparseVector) and self.entries == other.entries

    def __repr__(self):
        return f"SparseVector(nnz={self.nnz}, l2={self.l2:.6g})"


@dataclass(frozen=True)
class ReplicationParams:
    """Replication count for spreading one token across derived tokens."""

    c: int

    def __post_init__(self):
        if not isinstance(self.c, int) or self.c < 1:
            raise InputError(f"replication count must be an integer >= 1, got {self.c!r}")

    @property
    def scale(self) -> float:
        return self.c ** -0.5


def replicate(x: SparseVector, params: ReplicationParams | int) -> SparseVector:
    """Spread each token over ``c`` derived tokens, each carrying ``x[t]/sqrt(c)``.

    Derived names are ``escaped(t) + b"#" + index``; a literal ``#`` in the
    raw token is doubled, which keeps distinct inputs distinct.  The cached
    l2 norm is carried over unchanged (the construction preserves it) and the
    cached linf is ``x.linf * c**-0.5``.
    """
    params = params if isinstance(params, ReplicationParams) else ReplicationParams(params)
    c, scale = params.c, params.scale
    out: dict[bytes, float] = {}
    for t, v in x.entries.items():
        base = t.replace(b"#", b"##") + b"#"
        sv = v * scale
        for i in range(c):
            out[base + str(i).encode()] = sv
    return SparseVector(out, _norms=(x.l2, x.l1 * scale * c, x.linf * scale))


class HashedVector:
    """Image of a sparse vector in bucket space.

    Stores either a dense float array of length ``m`` or a bucket->value dict;
    the two representations compare equal entrywise.  ``feature_map`` picks
    the dict while fewer than ``m/4`` buckets are occupied.
    """

    __slots__ = ("m", "dense", "sparse")

    def __init__(self, m: int, *, dense: np.ndarray | None = None,
                 sparse: dict[int, float] | None = None):
        if (dense is None) == (sparse is None):
            raise InputError("exactly one of dense/sparse must be given")
        self.m = m
        self.dense = dense
        self.sparse = sparse

    @property
    def nnz(self) -> int:
        if self.sparse is not None:
            return len(self.sparse)
        return int(np.count_nonzero(self.dense))

    def to_dense(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense
        out = np.zeros(self.m)
        for b, v in self.sparse.items():
            out[b] = v
        return out

    def __getitem__(self, bucket: int) -> float:
        if self.sparse is not None:
            return self.sparse.get(bucket, 0.0)
        return float(self.dense[bucket])

    def l1(self) -> float:
        if self.sparse is not None:
            return math.fsum(abs(v) for v in self.sparse.values())
        return float(np.abs(self.dense).sum())

    def norm_sq(self) -> float:
        return hashed_inner(self, self)

    def __eq__(self, other):
        if not isinstance(other, HashedVector) or self.m != other.m:
            return False
        return bool(np.array_equal(self.to_dense(), other.to_dense()))


def feature_map(x: SparseVector, cfg: HashConfig) -> HashedVector:
    """Hash ``x`` into bucket space.

    Tokens are folded in ascending byte order so the float accumulation order
    is reproducible across runs and platforms.
    """
    acc: dict[int, float] = {}
    for t in sorted(x.entries):
        b, s = hash_token(t, cfg)
        acc[b] = acc.get(b, 0.0) + s * x.entries[t]
    acc = {b: v for b, v in acc.items() if v != 0.0}
    m = cfg.m
    if len(acc) < m / _SPARSE_FRACTION:
        return HashedVector(m, sparse=acc)
    dense = np.zeros(m)
    for b, v in acc.items():
        dense[b] = v
    return HashedVector(m, dense=dense)


def hashed_inner(a: HashedVector, b: HashedVector) -> float:
    """Inner product of two images; both must share the same bucket count."""
    if a.m != b.m:
        raise DimensionMismatch(f"bucket counts differ: {a.m} vs {b.m}")
    if a.sparse is not None and b.sparse is not None:
        small, big = (a.sparse, b.sparse) if len(a.sparse) <= len(b.sparse) else (b.sparse, a.sparse)
        return math.fsum(v * big[k] for k, v in small.items() if k in big)
    if a.sparse is not None or b.sparse is not None:
        sp, dn = (a.sparse, b.dense) if a.sparse is not None else (b.sparse, a.dense)
        return math.fsum(v * float(dn[k]) for k, v in sp.items())
    return float(np.dot(a.dense, b.dense))


def variance_closed_form(x: SparseVector, x2: SparseVector, m: int) -> float:
    """Exact variance of the hashed inner product of ``x`` and ``x2``.

    Over a uniform random hash pair into ``m`` buckets,

        Var = (1/m) * sum over token pairs i != j of
              (x_i^2 * x2_j^2  +  x_i * x2_i * x_j * x2_j)

    evaluated here in its reduced form
    ``(|x|^2 |x2|^2 + <x, x2>^2 - 2 * sum_i x_i^2 x2_i^2) / m``.
    """
    if not isinstance(m, int) or m < 1:
        raise InputError(f"bucket count must be an integer >= 1, got {m!r}")
    cross = x.dot(x2)
    sq_overlap = math.fsum(
        (v * x2.entries[t]) ** 2 for t, v in x.entries.items() if t in x2.entries
    )
    return (x.l2**2 * x2.l2**2 + cross * cross - 2.0 * sq_overlap) / m


def replicated_self_variance(x: SparseVector, c: int, m: int) -> float:
    """Predicted self-inner-product variance after ``c``-fold replication.

    Equals ``(1/c) * Var(x, x) + ((c - 1) / c) * 2 * |x|_2^4 / m``: replication
    trades per-token mass for the unavoidable cross-replica collision term.
    """
    base = variance_closed_form(x, x, m)
    return base / c + (c - 1) / c * 2.0 * x.l2**4 / m


def bernstein_interference_bound(
    w_l2: float, w_linf: float, x_l2: float, x_linf: float, m: int, eps: float,
    *, clamp: bool = True,
) -> float:
    """Tail bound on ``|<w, phi_task(x)>|`` exceeding ``eps``.

        2 * exp( -(eps^2 / 2) / (|w|_2^2 |x|_2^2 / m + eps |w|_inf |x|_inf / 3) )

    for a fixed bucket-space ``w`` built independently of the task's hash
    draw.  With ``clamp`` the value is capped at 1 so it reads as a
    probability; pass ``clamp=False`` for the raw right-hand side.
    """
    for name, v in (("w_l2", w_l2), ("w_linf", w_linf), ("x_l2", x_l2), ("x_linf", x_linf)):
        if not math.isfinite(v) or v < 0:
            raise InputError(f"{name} must be finite and >= 0, got {v!r}")
    if not isinstance(m, int) or m < 1:
        raise InputError(f"bucket count must be an integer >= 1, got {m!r}")
    if not (math.isfinite(eps) and eps > 0):
        raise InputError(f"eps must be finite and > 0, got {eps!r}")
    denom = (w_l2 * x_l2) ** 2 / m + eps * w_linf * x_linf / 3.0
    if denom == 0.0:
        return 0.0  # w or x is identically zero; the inner product is too
    raw = 2.0 * math.exp(-(eps * eps / 2.0) / denom)
    return min(raw, 1.0) if clamp else raw
