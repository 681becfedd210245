"""Hashed compression of factor matrices with an unbiased entry estimator.

A rating matrix factored as M = U^T W (U is n x d_u, W is n x d_w) can be
stored as two length-m bucket vectors: every entry U[j, k] is hashed by its
index pair into u, every W entry likewise into w, under two independently
seeded hash pairs.  The estimator

    est(i, j) = sum over k of xi(k,i) xi'(k,j) u[h(k,i)] w[h'(k,j)]

recovers M[i, j] in expectation, exactly so when both hashes are injective on
their index pairs.  Index pairs are encoded as decimal "row:col" tokens, row
being the shared inner dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, InputError
from .hashcore import HashConfig, hash_token


@dataclass
class FactorMatrix:
    """Dense factor with rows as the shared inner dimension."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=float)
        if arr.ndim != 2:
            raise InputError(f"factor matrix must be 2-d, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise InputError("factor matrix entries must be finite")
        self.data = arr

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


def pair_token(row: int, col: int) -> bytes:
    return b"%d:%d" % (row, col)


@dataclass
class CfSketch:
    """Two bucket vectors holding compressed factors, plus their hash configs."""

    m: int
    u_vec: np.ndarray
    w_vec: np.ndarray
    cfg_u: HashConfig
    cfg_w: HashConfig
    n: int
    d_u: int
    d_w: int

    def __post_init__(self):
        if (
            self.cfg_u.bucket_seed == self.cfg_w.bucket_seed
            and self.cfg_u.sign_seed == self.cfg_w.sign_seed
        ):
            raise InputError("cfg_u and cfg_w must differ in at least one seed")


def _fold_matrix(mat: np.ndarray, cfg: HashConfig) -> np.ndarray:
    out = np.zeros(cfg.m)
    for row in range(mat.shape[0]):
        for col in range(mat.shape[1]):
            v = mat[row, col]
            if v == 0.0:
                continue
            b, s = hash_token(pair_token(row, col), cfg)
            out[b] += s * v
    return out


def sketch_factors(
    u: FactorMatrix,
    w: FactorMatrix,
    bits: int,
    seeds: tuple[int, int],
) -> CfSketch:
    """Compress both factors into bucket vectors under independent hashes."""
    if u.n != w.n:
        raise DimensionMismatch(
            f"factors must share the inner dimension, got {u.n} vs {w.n}"
        )
    seed_u, seed_w = seeds
    if seed_u == seed_w:
        raise InputError("the two sketches need independently seeded hashes")
    cfg_u = HashConfig(bits, bucket_seed=seed_u)
    cfg_w = HashConfig(bits, bucket_seed=seed_w)
    return CfSketch(
        m=cfg_u.m,
        u_vec=_fold_matrix(u.data, cfg_u),
        w_vec=_fold_matrix(w.data, cfg_w),
        cfg_u=cfg_u,
        cfg_w=cfg_w,
        n=u.n,
        d_u=u.d,
        d_w=w.d,
    )


def _check_entry(s: CfSketch, i: int, j: int, inner_dim: int) -> None:
    if inner_dim != s.n:
        raise InputError(f"inner_dim {inner_dim} does not match the sketch's {s.n}")
    if not 0 <= i < s.d_u:
        raise InputError(f"column index i={i} out of range [0, {s.d_u})")
    if not 0 <= j < s.d_w:
        raise InputError(f"column index j={j} out of range [0, {s.d_w})")


def estimate_entry(s: CfSketch, i: int, j: int, inner_dim: int) -> float:
    """Unbiased estimate of (U^T W)[i, j] from the two sketches."""
    _check_entry(s, i, j, inner_dim)
    total = 0.0
    for k in range(inner_dim):
        bu, su = hash_token(pair_token(k, i), s.cfg_u)
        bw, sw = hash_token(pair_token(k, j), s.cfg_w)
        total += su * sw * s.u_vec[bu] * s.w_vec[bw]
    return total


def estimate_matrix(s: CfSketch, inner_dim: int) -> np.ndarray:
    """All entries at once: gather signed bucket values, then one matmul."""
    if inner_dim != s.n:
        raise InputError(f"inner_dim {inner_dim} does not match the sketch's {s.n}")
    a = np.empty((inner_dim, s.d_u))
    b = np.empty((inner_dim, s.d_w))
    for k in range(inner_dim):
        for i in range(s.d_u):
            bu, su = hash_token(pair_token(k, i), s.cfg_u)
            a[k, i] = su * s.u_vec[bu]
        for j in range(s.d_w):
            bw, sw = hash_token(pair_token(k, j), s.cfg_w)
            b[k, j] = sw * s.w_vec[bw]
    return a.T @ b


def injective_bits(n: int, d_max: int) -> int:
    """Bucket width at which exact recovery is certified by a seed search:
    the next power of two holding at least 4 * n * d_max buckets."""
    need = 4 * n * d_max
    bits = max(1, (need - 1).bit_length())
    return bits


def tokens_injective(tokens: Iterable[bytes], cfg: HashConfig) -> bool:
    seen = set()
    for t in tokens:
        b, _ = hash_token(t, cfg)
        if b in seen:
            return False
        seen.add(b)
    return True


def find_injective_seeds(
    n: int, d_u: int, d_w: int, bits: int, *, start_seed: int = 1, attempts: int = 20_000
) -> tuple[HashConfig, HashConfig]:
    """Scan bucket seeds until each factor's index pairs land collision-free.

    The two configs get distinct seeds by construction.  Per-seed success is
    roughly exp(-(n*d)^2 / (2m)), so the ``injective_bits`` floor is only
    comfortable for small factors; pass more bits when the scan budget runs
    out and this raises.
    """

    def scan(d: int, seed0: int, skip: int | None) -> HashConfig:
        toks = [pair_token(k, c) for k in range(n) for c in range(d)]
        for s in range(seed0, seed0 + attempts):
            if s == skip:
                continue
            cfg = HashConfig(bits, bucket_seed=s)
            if tokens_injective(toks, cfg):
                return cfg
        raise InputError(
            f"no injective seed for {n}x{d} pairs at bits={bits} "
            f"after {attempts} attempts"
        )

    cfg_u = scan(d_u, start_seed, None)
    cfg_w = scan(d_w, cfg_u.bucket_seed + 1, cfg_u.bucket_seed)
    return cfg_u, cfg_w


# ---------------------------------------------------------------------------
# error sweep


@dataclass(frozen=True)
class SweepRow:
    bits: int
    mean_rel_err: float
    stddev: float


def frobenius_error_sweep(
    u: FactorMatrix,
    w: FactorMatrix,
    bits_list: Sequence[int],
    trials: int,
    *,
    base_seed: int = 1_000,
) -> list[SweepRow]:
    """Relative Frobenius error of the estimate, averaged over hash draws.

    Trial t uses bucket seeds (base + 2t, base + 2t + 1).  A zero target
    matrix would make the relative error 0/0, so that degenerate case
    reports absolute error instead.
    """
    if trials < 1:
        raise InputError(f"trials must be >= 1, got {trials!r}")
    if u.n != w.n:
        raise DimensionMismatch(
            f"factors must share the inner dimension, got {u.n} vs {w.n}"
        )
    target = u.data.T @ w.data
    denom = float(np.linalg.norm(target))
    rows = []
    for bits in bits_list:
        errs = np.empty(trials)
        for t in range(trials):
            seeds = (base_seed + 2 * t, base_seed + 2 * t + 1)
            s = sketch_factors(u, w, bits, seeds)
            est = estimate_matrix(s, u.n)
            err = float(np.linalg.norm(est - target))
            errs[t] = err / denom if denom > 0.0 else err
        rows.append(SweepRow(bits=bits, mean_rel_err=float(errs.mean()),
                             stddev=float(errs.std())))
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    lines = ["bits,mean_rel_err,stddev"]
    lines += [f"{r.bits},{r.mean_rel_err:.10g},{r.stddev:.10g}" for r in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# triple files (row <TAB> col <TAB> value)


def read_triples(path: str) -> FactorMatrix:
    """Load a dense factor from TSV triples; absent cells default to zero."""
    entries: dict[tuple[int, int], float] = {}
    max_r = max_c = -1
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            raw = raw.strip()
            if not raw:
                continue
            parts = raw.split("\t")
            if len(parts) != 3:
                raise InputError(f"line {lineno}: expected 3 tab-separated fields")
            try:
                r, c, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise InputError(f"line {lineno}: bad triple {raw!r}") from None
            if r < 0 or c < 0 or not math.isfinite(v):
                raise InputError(f"line {lineno}: bad triple {raw!r}")
            entries[(r, c)] = v
            max_r, max_c = max(max_r, r), max(max_c, c)
    if not entries:
        raise InputError("triple file holds no entries")
    out = np.zeros((max_r + 1, max_c + 1))
    for (r, c), v in entries.items():
        out[r, c] = v
    return FactorMatrix(out)


def write_triples(mat: FactorMatrix, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in range(mat.n):
            for c in range(mat.d):
                v = float(mat.data[r, c])
                if v != 0.0:
                    f.write(f"{r}\t{c}\t{v!r}\n")
