"""Monte Carlo verification of the hashing layer's probabilistic guarantees.

Every check here has the same shape: draw many independent hash pairs, count
how often a deviation event fires, and compare a 99% upper confidence limit
on that frequency against the closed-form bound the guarantee promises.
Trials are indexed by seed: trial ``k`` uses ``base_seed + k`` as the bucket
seed (mod 2**32) with the sign seed derived exactly as
:class:`~hashfeat.hashcore.HashConfig` derives it, so any single trial can be
replayed through the scalar path.

Checks raise :class:`~hashfeat.errors.HypothesisError` when a guarantee's
stated hypotheses do not hold for the supplied vectors; the suite runner
records those as precondition failures instead of crashing.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import HypothesisError, InputError
from .hashcore import (
    SIGN_SEED_XOR,
    HashConfig,
    SparseVector,
    hash_token,
    personalized_token,
    replicate,
    variance_closed_form,
)
from .murmur3 import murmur3_32_seeds

# One-sided 99% normal quantile, used by the Wilson upper confidence limit.
Z99 = 2.3263478740408408

# An experiment whose bound admits fewer than this many expected events
# cannot distinguish pass from fail; it is flagged instead of judged.
LOW_POWER_EVENTS = 10

DEFAULT_TRIALS = 100_000


def wilson_upper(failures: int, trials: int, z: float = Z99) -> float:
    """Wilson score upper confidence limit for a binomial proportion."""
    if trials <= 0:
        raise InputError("trials must be positive")
    if not 0 <= failures <= trials:
        raise InputError("failures must lie in [0, trials]")
    p = failures / trials
    z2 = z * z
    center = p + z2 / (2 * trials)
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials))
    return min(1.0, (center + half) / (1 + z2 / trials))


@dataclass(frozen=True)
class TailExperiment:
    """Shared knobs for one tail-probability experiment."""

    m: int
    eps: float
    delta: float
    trials: int = DEFAULT_TRIALS
    base_seed: int = 0x5EED

    def __post_init__(self):
        if not isinstance(self.m, int) or self.m < 2 or self.m & (self.m - 1):
            raise InputError(f"m must be a power of two >= 2, got {self.m!r}")
        if self.m > 2**30:
            raise InputError("m must not exceed 2**30")
        if not 0.0 < self.eps < 1.0:
            raise InputError(f"eps must lie in (0, 1), got {self.eps!r}")
        if not 0.0 < self.delta < 1.0:
            raise InputError(f"delta must lie in (0, 1), got {self.delta!r}")
        need = math.ceil(100.0 / self.delta)
        if not isinstance(self.trials, int) or self.trials < need:
            raise InputError(
                f"trials must be >= ceil(100/delta) = {need}, got {self.trials!r}"
            )
        if not isinstance(self.base_seed, int) or self.base_seed < 0:
            raise InputError("base_seed must be a non-negative integer")

    @property
    def bits(self) -> int:
        return self.m.bit_length() - 1


@dataclass
class DistortionParams:
    """Realized hypothesis quantities echoed into inner-product reports.

    ``sigma_max`` is recorded for reference only; the pass gate uses the
    failure probability cap, not the variance.
    """

    eta: float
    sigma_max: float
    delta_cap: float

    def to_dict(self) -> dict:
        return {"eta": self.eta, "sigma_max": self.sigma_max, "delta_cap": self.delta_cap}


@dataclass
class TailReport:
    """Outcome of one experiment.

    ``empirical_tail`` is the Wilson 99% upper limit on the event frequency;
    ``passed`` is None when the experiment is low-power or vacuous.
    """

    name: str
    kind: str
    trials_used: int
    failures: int
    raw_frequency: float
    empirical_tail: float
    bound: float
    passed: bool | None
    low_power: bool = False
    vacuous: bool = False
    config: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "status": "ok",
            "trials_used": self.trials_used,
            "failures": self.failures,
            "raw_frequency": self.raw_frequency,
            "empirical_tail": self.empirical_tail,
            "bound": self.bound,
            "passed": self.passed,
            "low_power": self.low_power,
            "vacuous": self.vacuous,
            "config": self.config,
            "notes": self.notes,
        }


def _finish(name, kind, exp, failures, bound, config, notes=None) -> TailReport:
    notes = list(notes or [])
    upper = wilson_upper(failures, exp.trials)
    low_power = bound * exp.trials < LOW_POWER_EVENTS
    vacuous = bound >= 1.0
    if bound <= 0.0:
        # A zero bound claims the deviation event is impossible (e.g. an
        # identically-zero statistic). The Wilson upper limit is strictly
        # positive at any confidence, so the generic comparison could never
        # pass; judge directly on the failure count instead.
        passed = failures == 0
        low_power = False
        notes.append(
            "degenerate: bound is 0 and no failures observed"
            if passed
            else "bound is 0 yet deviation events were observed"
        )
    elif low_power:
        notes.append(
            f"expected event count under the bound is {bound * exp.trials:.2f} < "
            f"{LOW_POWER_EVENTS}; not judged"
        )
        passed = None
    else:
        passed = None if vacuous else bool(upper <= bound)
    return TailReport(
        name=name,
        kind=kind,
        trials_used=exp.trials,
        failures=failures,
        raw_frequency=failures / exp.trials,
        empirical_tail=upper,
        bound=bound,
        passed=passed,
        low_power=low_power,
        vacuous=vacuous,
        config=config,
        notes=notes,
    )


# ---------------------------------------------------------------------------
# seed-batched hashing primitives


def seeds_for(exp: TailExperiment) -> np.ndarray:
    """uint32 bucket seeds for trials 0..trials-1: ``base_seed + k``."""
    return ((exp.base_seed + np.arange(exp.trials, dtype=np.uint64)) & 0xFFFFFFFF).astype(
        np.uint32
    )


def bucket_sign_over_seeds(
    tokens: Sequence[bytes], bits: int, seeds: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Buckets (uint32) and signs (int8) for each (seed, token) pair.

    Row ``k`` reproduces ``hash_token(token, HashConfig(bits, bucket_seed=seeds[k]))``.
    """
    mask = np.uint32((1 << bits) - 1)
    sign_seeds = seeds ^ np.uint32(SIGN_SEED_XOR)
    H = np.empty((len(seeds), len(tokens)), dtype=np.uint32)
    S = np.empty((len(seeds), len(tokens)), dtype=np.int8)
    for j, tok in enumerate(tokens):
        H[:, j] = murmur3_32_seeds(tok, seeds) & mask
        S[:, j] = (
            ((murmur3_32_seeds(tok, sign_seeds) & np.uint32(1)) << np.uint32(1)).astype(np.int8)
            - np.int8(1)
        )
    return H, S


def _chunk_size(m: int, n_vectors: int) -> int:
    # keep each chunk's dense images around 64 MB; deterministic in (m, n).
    return max(128, 8_388_608 // (m * max(1, n_vectors)))


def _hash_blocks(
    tokens: Sequence[bytes], bits: int, seeds: np.ndarray, chunk: int
) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """Hash (token x seed) in blocks sized by memory, not by image chunk.

    Image chunks can be small when ``m`` is large; hashing per image chunk
    would then pay the numpy call overhead thousands of times.  Block size
    only groups work, it never changes a hash value, so downstream results
    are independent of it.
    """
    per_block = max(chunk, 64_000_000 // max(1, len(tokens)))
    per_block = (per_block // chunk) * chunk
    for start in range(0, len(seeds), per_block):
        sl = seeds[start : start + per_block]
        H, S = bucket_sign_over_seeds(tokens, bits, sl)
        yield start, H, S


def images_over_seeds(
    vectors: Sequence[SparseVector], bits: int, seeds: np.ndarray
) -> Iterator[np.ndarray]:
    """Yield dense images of ``vectors`` for consecutive chunks of seeds.

    Each yielded array has shape (chunk, len(vectors), m).  Accumulation is
    bucket-ordered within a chunk and chunk boundaries depend only on the
    experiment geometry, so downstream float reductions are reproducible.
    """
    m = 1 << bits
    tokens = sorted(set().union(*(v.entries.keys() for v in vectors)))
    col = {t: j for j, t in enumerate(tokens)}
    per_vec = []
    for v in vectors:
        ts = sorted(v.entries)
        per_vec.append(
            (
                np.array([col[t] for t in ts], dtype=np.int64),
                np.array([v.entries[t] for t in ts]),
            )
        )
    chunk = _chunk_size(m, len(vectors))
    for block_start, H, S in _hash_blocks(tokens, bits, seeds, chunk):
        for off in range(0, H.shape[0], chunk):
            Hc, Sc = H[off : off + chunk], S[off : off + chunk]
            c = Hc.shape[0]
            out = np.empty((c, len(vectors), m))
            rows = np.arange(c, dtype=np.int64)[:, None] * m
            for vi, (cols, vals) in enumerate(per_vec):
                flat = (Hc[:, cols].astype(np.int64) + rows).ravel()
                w = (Sc[:, cols] * vals).ravel()
                out[:, vi, :] = np.bincount(flat, weights=w, minlength=c * m).reshape(c, m)
            yield out


def inner_products_over_seeds(
    x: SparseVector, x2: SparseVector, bits: int, seeds: np.ndarray
) -> np.ndarray:
    """Hashed inner product of (x, x2) for every seed; the workhorse oracle."""
    out = np.empty(len(seeds))
    pos = 0
    for imgs in images_over_seeds([x, x2], bits, seeds):
        c = imgs.shape[0]
        out[pos : pos + c] = np.einsum("cm,cm->c", imgs[:, 0, :], imgs[:, 1, :])
        pos += c
    return out


def squared_norms_over_seeds(x: SparseVector, bits: int, seeds: np.ndarray) -> np.ndarray:
    """Hashed squared norm of ``x`` for every seed."""
    out = np.empty(len(seeds))
    pos = 0
    for imgs in images_over_seeds([x], bits, seeds):
        c = imgs.shape[0]
        out[pos : pos + c] = np.einsum("cm,cm->c", imgs[:, 0, :], imgs[:, 0, :])
        pos += c
    return out


# ---------------------------------------------------------------------------
# hypothesis gates


def _require_unit_norm(x: SparseVector, what: str = "x"):
    if abs(x.l2 - 1.0) > 1e-9:
        raise HypothesisError(f"| |{what}|_2 - 1 | <= 1e-9", f"got |{what}|_2 = {x.l2!r}")


def _require_m(exp: TailExperiment, factor: float, of: float, label: str):
    need = factor * math.log(1.0 / of) / (exp.eps * exp.eps)
    if exp.m < need:
        raise HypothesisError(label, f"m = {exp.m} < {need:.1f}")


# ---------------------------------------------------------------------------
# checks


def check_norm_concentration(
    exp: TailExperiment, x: SparseVector, name: str = "norm_concentration"
) -> TailReport:
    """Tail of ``| |phi(x)|^2 - 1 | >= eps`` against its cap of ``2*delta``.

    Hypotheses: unit norm, ``m >= 72*log(1/delta)/eps^2``, and
    ``|x|_inf <= eps / sqrt(log(1/delta) * log(m/delta))``.  The last gate
    drops the proof-side constant from the coordinate-bound; with the
    constant kept no vector at these bucket counts is admissible, while the
    functional form still rejects concentrated vectors (a one-hot never
    qualifies for small eps).
    """
    _require_unit_norm(x)
    _require_m(exp, 72.0, exp.delta, "m >= 72*log(1/delta)/eps^2")
    cap = exp.eps / math.sqrt(math.log(1 / exp.delta) * math.log(exp.m / exp.delta))
    if x.linf > cap:
        raise HypothesisError(
            "|x|_inf <= eps/sqrt(log(1/delta)*log(m/delta))",
            f"|x|_inf = {x.linf:.6g} > {cap:.6g}",
        )
    norms = squared_norms_over_seeds(x, exp.bits, seeds_for(exp))
    failures = int(np.count_nonzero(np.abs(norms - 1.0) >= exp.eps))
    config = {
        "m": exp.m, "eps": exp.eps, "delta": exp.delta, "trials": exp.trials,
        "base_seed": exp.base_seed, "x_nnz": x.nnz, "x_linf": x.linf,
    }
    return _finish(name, "norm_concentration", exp, failures, 2.0 * exp.delta, config)


def check_inner_concentration(
    exp: TailExperiment, x: SparseVector, x2: SparseVector, name: str = "inner_concentration"
) -> TailReport:
    """Tail of ``|<phi(x), phi(x2)> - <x, x2>| > eps * Delta / 2`` against ``delta``.

    ``Delta`` is ``|x|^2 + |x2|^2 + |x - x2|^2``; the coordinate hypothesis
    bounds ``eta``, the worst linf/l2 ratio among ``x``, ``x2``, ``x - x2``.
    """
    d = x.minus(x2)
    members = [("x", x), ("x2", x2)]
    if d.l2 > 0:
        members.append(("x-x2", d))
    eta = max(v.linf / v.l2 for _, v in members if v.l2 > 0)
    eta_cap = exp.eps / math.log(exp.m / exp.delta)
    if eta > eta_cap:
        raise HypothesisError(
            "eta <= eps/log(m/delta)", f"eta = {eta:.6g} > {eta_cap:.6g}"
        )
    _require_m(exp, 72.0, exp.delta, "m >= 72*log(1/delta)/eps^2")
    delta_sq = x.l2**2 + x2.l2**2 + d.l2**2
    sigma_max = math.sqrt(
        max(variance_closed_form(v, v, exp.m) for _, v in members if v.l2 > 0)
    )
    params = DistortionParams(eta=eta, sigma_max=sigma_max, delta_cap=exp.delta)
    truth = x.dot(x2)
    tol = exp.eps * delta_sq / 2.0
    inner = inner_products_over_seeds(x, x2, exp.bits, seeds_for(exp))
    failures = int(np.count_nonzero(np.abs(inner - truth) > tol))
    config = {
        "m": exp.m, "eps": exp.eps, "delta": exp.delta, "trials": exp.trials,
        "base_seed": exp.base_seed, "delta_sq_total": delta_sq,
        "distortion": params.to_dict(),
    }
    return _finish(name, "inner_concentration", exp, failures, exp.delta, config)


def check_union_bound(
    exp: TailExperiment, xs: Sequence[SparseVector], name: str = "union_bound"
) -> TailReport:
    """All pairwise squared distances within relative ``eps``, w.p. ``1 - delta``.

    Hypotheses: every difference vector satisfies the eta condition and
    ``m >= (72/eps^2) * log(n/delta)``.  A single vector has no pairs: the
    report is a vacuous pass.
    """
    n = len(xs)
    if n == 0:
        raise InputError("union check needs at least one vector")
    config = {
        "m": exp.m, "eps": exp.eps, "delta": exp.delta, "trials": exp.trials,
        "base_seed": exp.base_seed, "n_vectors": n,
    }
    if n == 1:
        rep = _finish(name, "union_bound", exp, 0, exp.delta, config,
                      notes=["single vector: no pairs, vacuously true"])
        rep.passed = True
        return rep
    eta_cap = exp.eps / math.log(exp.m / exp.delta)
    true_d2 = {}
    for i in range(n):
        for j in range(i + 1, n):
            d = xs[i].minus(xs[j])
            if d.l2 == 0:
                raise InputError(f"vectors {i} and {j} coincide; relative distortion undefined")
            if d.linf / d.l2 > eta_cap:
                raise HypothesisError(
                    "eta <= eps/log(m/delta)",
                    f"pair ({i}, {j}): eta = {d.linf / d.l2:.6g} > {eta_cap:.6g}",
                )
            true_d2[(i, j)] = d.l2**2
    need = 72.0 * math.log(n / exp.delta) / (exp.eps * exp.eps)
    if exp.m < need:
        raise HypothesisError("m >= (72/eps^2)*log(n/delta)", f"m = {exp.m} < {need:.1f}")
    failures = 0
    seeds = seeds_for(exp)
    for imgs in images_over_seeds(list(xs), exp.bits, seeds):
        bad = np.zeros(imgs.shape[0], dtype=bool)
        for (i, j), d2 in true_d2.items():
            diff = imgs[:, i, :] - imgs[:, j, :]
            emp = np.einsum("cm,cm->c", diff, diff)
            bad |= np.abs(emp - d2) > exp.eps * d2
        failures += int(np.count_nonzero(bad))
    return _finish(name, "union_bound", exp, failures, exp.delta, config)


def check_interference(
    exp: TailExperiment,
    others: Mapping[bytes, SparseVector],
    x: SparseVector,
    task: bytes,
    name: str = "interference",
) -> TailReport:
    """Cross-task interference tail against the realized closed-form bound.

    Per trial, the bucket-space ``w`` is the hashed sum of every other task's
    weight vector under that trial's hash pair, and the event is
    ``|<w, phi_task(x)>| > eps``.  The closed-form bound is evaluated at each
    trial's realized ``|w|`` norms (the raw ``x`` norms are fixed) and the
    gate compares the empirical tail against the mean of those per-trial
    bounds.
    """
    if task in others:
        raise InputError(f"task {task!r} appears in its own interference set")
    if not others:
        raise InputError("interference check needs at least one other task")
    combined: dict[bytes, float] = {}
    for other_task, wv in others.items():
        for t, v in wv.entries.items():
            combined[personalized_token(t, other_task)] = v
    w_all = SparseVector(combined)
    x_pref = SparseVector({personalized_token(t, task): v for t, v in x.entries.items()})

    # One shared token list: w's image is materialized densely (its norms are
    # needed anyway); x's contribution is gathered from it, never scattered.
    tokens = sorted(set(w_all.entries) | set(x_pref.entries))
    col = {t: j for j, t in enumerate(tokens)}
    w_ts = sorted(w_all.entries)
    w_cols = np.array([col[t] for t in w_ts], dtype=np.int64)
    w_vals = np.array([w_all.entries[t] for t in w_ts])
    x_ts = sorted(x_pref.entries)
    x_cols = np.array([col[t] for t in x_ts], dtype=np.int64)
    x_vals = np.array([x_pref.entries[t] for t in x_ts])

    failures = 0
    bound_sum = 0.0
    seeds = seeds_for(exp)
    m = exp.m
    x_l2sq = x.l2**2
    chunk = _chunk_size(m, 1)
    for block_start, H, S in _hash_blocks(tokens, exp.bits, seeds, chunk):
        for off in range(0, H.shape[0], chunk):
            Hc, Sc = H[off : off + chunk], S[off : off + chunk]
            c = Hc.shape[0]
            rows = np.arange(c, dtype=np.int64)[:, None] * m
            flat = (Hc[:, w_cols].astype(np.int64) + rows).ravel()
            wts = (Sc[:, w_cols] * w_vals).ravel()
            w_img = np.bincount(flat, weights=wts, minlength=c * m).reshape(c, m)
            rows_c = np.arange(c)[:, None]
            gathered = w_img[rows_c, Hc[:, x_cols]]
            inner = np.einsum("ck,ck->c", gathered, Sc[:, x_cols] * x_vals)
            failures += int(np.count_nonzero(np.abs(inner) > exp.eps))
            w_l2sq = np.einsum("cm,cm->c", w_img, w_img)
            w_linf = np.abs(w_img).max(axis=1)
            denom = w_l2sq * x_l2sq / m + exp.eps * w_linf * x.linf / 3.0
            # denom == 0 means w or x vanished: the inner product is exactly 0
            # and the deviation event is impossible, so that trial's bound is 0.
            safe = np.where(denom > 0.0, denom, 1.0)
            b = np.where(denom > 0.0, 2.0 * np.exp(-(exp.eps * exp.eps / 2.0) / safe), 0.0)
            bound_sum += float(np.minimum(b, 1.0).sum())
    bound = bound_sum / exp.trials
    config = {
        "m": exp.m, "eps": exp.eps, "delta": exp.delta, "trials": exp.trials,
        "base_seed": exp.base_seed, "n_other_tasks": len(others),
        "x_nnz": x.nnz, "x_l2": x.l2, "x_linf": x.linf,
    }
    return _finish(name, "interference", exp, failures, bound, config,
                   notes=["bound is the mean of per-trial closed-form bounds at realized norms"])


def max_bucket_mass(x: SparseVector, cfg: HashConfig) -> float:
    """Largest per-bucket sum of squared values under ``cfg``'s bucket hash."""
    masses: dict[int, float] = {}
    for t in sorted(x.entries):
        b, _ = hash_token(t, cfg)
        masses[b] = masses.get(b, 0.0) + x.entries[t] ** 2
    return max(masses.values(), default=0.0)


def check_bucket_mass(
    exp: TailExperiment, x: SparseVector, name: str = "bucket_mass"
) -> TailReport:
    """Tail of ``max bucket mass > 2/m`` against ``delta``.

    Hypotheses: unit norm and ``|x|_inf <= 1 / (2*sqrt(m*log(m/delta)))``.
    ``eps`` plays no role here; the event threshold is fixed at ``2/m``.
    """
    _require_unit_norm(x)
    cap = 1.0 / (2.0 * math.sqrt(exp.m * math.log(exp.m / exp.delta)))
    if x.linf > cap:
        raise HypothesisError(
            "|x|_inf <= 1/(2*sqrt(m*log(m/delta)))",
            f"|x|_inf = {x.linf:.6g} > {cap:.6g}",
        )
    tokens = sorted(x.entries)
    vals_sq = np.array([x.entries[t] for t in tokens]) ** 2
    threshold = 2.0 / exp.m
    failures = 0
    seeds = seeds_for(exp)
    chunk = _chunk_size(exp.m, 1)
    for start in range(0, len(seeds), chunk):
        sl = seeds[start : start + chunk]
        c = len(sl)
        H, _ = bucket_sign_over_seeds(tokens, exp.bits, sl)
        rows = np.arange(c, dtype=np.int64)[:, None] * exp.m
        flat = (H.astype(np.int64) + rows).ravel()
        w = np.broadcast_to(vals_sq, (c, len(tokens))).ravel()
        masses = np.bincount(flat, weights=w, minlength=c * exp.m).reshape(c, exp.m)
        failures += int(np.count_nonzero(masses.max(axis=1) > threshold))
    config = {
        "m": exp.m, "delta": exp.delta, "trials": exp.trials,
        "base_seed": exp.base_seed, "x_nnz": x.nnz, "x_linf": x.linf,
        "threshold": threshold,
    }
    return _finish(name, "bucket_mass", exp, failures, exp.delta, config)


# ---------------------------------------------------------------------------
# suite runner


def vector_from_spec(spec: dict) -> SparseVector:
    """Build a test vector from its JSON description."""
    kind = spec.get("type")
    if kind == "uniform":
        n = int(spec["count"])
        prefix = spec.get("prefix", "t")
        v = n ** -0.5
        return SparseVector({f"{prefix}{i:07d}".encode(): v for i in range(n)})
    if kind == "replicated_onehot":
        return replicate(SparseVector({spec["token"].encode(): 1.0}), int(spec["c"]))
    if kind == "entries":
        return SparseVector({k.encode(): float(v) for k, v in spec["values"].items()})
    raise InputError(f"unknown vector spec type {kind!r}")


def _run_experiment(exp_cfg: dict) -> dict:
    name = exp_cfg.get("name", exp_cfg["kind"])
    kind = exp_cfg["kind"]
    try:
        exp = TailExperiment(
            m=int(exp_cfg["m"]),
            eps=float(exp_cfg.get("eps", 0.5)),
            delta=float(exp_cfg["delta"]),
            trials=int(exp_cfg.get("trials", DEFAULT_TRIALS)),
            base_seed=int(exp_cfg["base_seed"]),
        )
        if kind == "norm_concentration":
            rep = check_norm_concentration(exp, vector_from_spec(exp_cfg["x"]), name)
        elif kind == "inner_concentration":
            rep = check_inner_concentration(
                exp, vector_from_spec(exp_cfg["x"]), vector_from_spec(exp_cfg["x2"]), name
            )
        elif kind == "union_bound":
            xs = [vector_from_spec(s) for s in exp_cfg["xs"]]
            rep = check_union_bound(exp, xs, name)
        elif kind == "interference":
            o = exp_cfg["others"]
            k = int(o["tokens_per_task"])
            wv = SparseVector({f"w{i:05d}".encode(): k**-0.5 for i in range(k)})
            others = {f"{o.get('prefix', 'task')}{i:04d}".encode(): wv
                      for i in range(int(o["n_tasks"]))}
            rep = check_interference(
                exp, others, vector_from_spec(exp_cfg["x"]), exp_cfg["task"].encode(), name
            )
        elif kind == "bucket_mass":
            rep = check_bucket_mass(exp, vector_from_spec(exp_cfg["x"]), name)
        else:
            raise InputError(f"unknown experiment kind {kind!r}")
    except (HypothesisError, InputError) as e:
        return {"name": name, "kind": kind, "status": "precondition_error", "error": str(e)}
    return rep.to_dict()


DEFAULT_SUITE: dict = {
    "schema": "hashfeat-verify-suite/1",
    "experiments": [
        {
            "name": "norm-uniform4096", "kind": "norm_concentration",
            "m": 1024, "eps": 0.5, "delta": 0.05, "trials": 100_000,
            "base_seed": 1_000_000,
            "x": {"type": "uniform", "count": 4096, "prefix": "n"},
        },
        {
            "name": "inner-disjoint4096", "kind": "inner_concentration",
            "m": 1024, "eps": 0.5, "delta": 0.05, "trials": 50_000,
            "base_seed": 2_000_000,
            "x": {"type": "uniform", "count": 4096, "prefix": "a"},
            "x2": {"type": "uniform", "count": 4096, "prefix": "b"},
        },
        {
            "name": "union-8x4096", "kind": "union_bound",
            "m": 2048, "eps": 0.5, "delta": 0.1, "trials": 10_000,
            "base_seed": 3_000_000,
            "xs": [{"type": "replicated_onehot", "token": f"base{i}", "c": 4096}
                   for i in range(8)],
        },
        {
            "name": "interference-50tasks", "kind": "interference",
            "m": 65_536, "eps": 0.08, "delta": 0.1, "trials": 20_000,
            "base_seed": 4_000_000,
            "task": "target",
            "others": {"n_tasks": 50, "tokens_per_task": 32, "prefix": "task"},
            "x": {"type": "uniform", "count": 1024, "prefix": "x"},
        },
        {
            "name": "bucketmass-uniform2048", "kind": "bucket_mass",
            "m": 64, "eps": 0.5, "delta": 0.05, "trials": 10_000,
            "base_seed": 5_000_000,
            "x": {"type": "uniform", "count": 2048, "prefix": "m"},
        },
    ],
}


def run_suite(suite: dict, jobs: int = 1) -> dict:
    """Run every experiment in ``suite`` and assemble the report.

    ``jobs`` parallelizes across experiments; each experiment is internally
    deterministic, so the report content is identical for any job count.
    """
    exps = suite.get("experiments", [])
    if jobs > 1 and len(exps) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_experiment, exps))
    else:
        results = [_run_experiment(e) for e in exps]
    n_pass = sum(1 for r in results if r.get("passed") is True)
    n_fail = sum(1 for r in results if r.get("passed") is False)
    n_prec = sum(1 for r in results if r.get("status") == "precondition_error")
    n_flag = sum(1 for r in results if r.get("status") == "ok" and r.get("passed") is None)
    return {
        "schema": "hashfeat-verify-report/1",
        "experiments": results,
        "counts": {"pass": n_pass, "fail": n_fail, "precondition_error": n_prec,
                   "not_judged": n_flag},
        "all_pass": n_fail == 0 and n_prec == 0,
    }


def report_exit_code(report: dict) -> int:
    """0 if everything passed, 2 on any failure, 3 on any precondition error."""
    c = report["counts"]
    if c["precondition_error"]:
        return 3
    if c["fail"]:
        return 2
    return 0


def dump_report(report: dict) -> str:
    """Canonical JSON: replaying a suite yields a byte-identical file."""
    return json.dumps(report, sort_keys=True, indent=2) + "\n"
