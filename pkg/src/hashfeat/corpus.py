"""Labeled mail corpus: line format, time-based split, synthetic generator.

One mail per line, tab-separated::

    label <TAB> user <TAB> timestamp <TAB> token token token ...

``label`` is ``1`` (spam) or ``-1``, ``timestamp`` is integer seconds, tokens
are whitespace-separated and free of control characters.  Files ending in
``.gz`` are gzip-compressed.  An empty token field is legal (a mail whose
body produced nothing) but such lines are only usable for scoring, not
training.

The generator produces a population of users with Zipf-distributed activity
writing mails from two topic families (spam-like and ham-like), each split
into subtopics with Zipf word distributions plus a shared background slice.
Labels start from the topic consensus; every (user, subtopic) pair may carry
a persistent flip, so users genuinely disagree about borderline subtopics.
Flips apply at ``disagreement_rate`` on ham subtopics (mail the consensus
calls legitimate but this user reports) and at a reduced rate on spam
subtopics (mail the consensus calls spam but this user wants).  Labels are
each user's own ground truth, which is exactly what a personalized filter is
graded against.
"""

from __future__ import annotations

import gzip
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import CorpusFormatError, InputError

TRAIN_FRACTION = 10.0 / 14.0


def _has_control(s: str) -> bool:
    return any(ord(ch) < 0x20 or ord(ch) == 0x7F for ch in s)


@dataclass
class CorpusLine:
    """One mail: label, user id, integer timestamp, token list."""

    label: int
    user: str
    timestamp: int
    tokens: list[str]

    def __post_init__(self):
        if self.label not in (-1, 1):
            raise InputError(f"label must be -1 or 1, got {self.label!r}")
        if not self.user or _has_control(self.user) or any(ch.isspace() for ch in self.user):
            raise InputError(f"bad user id {self.user!r}")
        if not isinstance(self.timestamp, int):
            raise InputError(f"timestamp must be an integer, got {self.timestamp!r}")
        for t in self.tokens:
            if not t or _has_control(t):
                raise InputError(f"bad token {t!r}")


def serialize_line(line: CorpusLine) -> str:
    """Canonical text form; parsing it back reproduces the line exactly."""
    return f"{line.label}\t{line.user}\t{line.timestamp}\t{' '.join(line.tokens)}"


def parse_line(text: str, lineno: int = 1) -> CorpusLine:
    parts = text.rstrip("\n").split("\t")
    if len(parts) != 4:
        raise CorpusFormatError(lineno, f"expected 4 tab-separated fields, found {len(parts)}")
    raw_label, user, raw_ts, token_field = parts
    if raw_label not in ("1", "+1", "-1"):
        raise CorpusFormatError(lineno, f"label must be 1 or -1, got {raw_label!r}")
    try:
        ts = int(raw_ts)
    except ValueError:
        raise CorpusFormatError(lineno, f"timestamp must be an integer, got {raw_ts!r}") from None
    try:
        return CorpusLine(int(raw_label), user, ts, token_field.split())
    except InputError as e:
        raise CorpusFormatError(lineno, str(e)) from None


def parse_corpus(lines: Iterable[str]) -> list[CorpusLine]:
    return [parse_line(text, i) for i, text in enumerate(lines, start=1)]


def _open(path: str, mode: str):
    if str(path).endswith(".gz"):
        return gzip.open(path, mode + "t", encoding="utf-8")
    return open(path, mode, encoding="utf-8")


def read_corpus(path: str) -> list[CorpusLine]:
    with _open(path, "r") as f:
        return parse_corpus(f)


def write_corpus(lines: Iterable[CorpusLine], path: str) -> None:
    with _open(path, "w") as f:
        for line in lines:
            f.write(serialize_line(line) + "\n")


def time_split(
    lines: Sequence[CorpusLine], train_fraction: float = TRAIN_FRACTION
) -> tuple[list[CorpusLine], list[CorpusLine]]:
    """Chronological split at ``train_fraction`` of the observed time range.

    Training keeps everything strictly earlier than the cut.  If all
    timestamps coincide there is no usable range: everything lands in the
    training half and a warning is issued.
    """
    if not lines:
        return [], []
    if not 0.0 < train_fraction < 1.0:
        raise InputError(f"train_fraction must lie in (0, 1), got {train_fraction!r}")
    t_min = min(l.timestamp for l in lines)
    t_max = max(l.timestamp for l in lines)
    if t_min == t_max:
        warnings.warn("all timestamps equal; cannot split, keeping everything as training data")
        return list(lines), []
    cut = t_min + (t_max - t_min) * train_fraction
    train = [l for l in lines if l.timestamp < cut]
    test = [l for l in lines if l.timestamp >= cut]
    return train, test


# ---------------------------------------------------------------------------
# synthetic generator


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs for the synthetic mail generator.

    The first seven fields define the experiment; the rest shape the topic
    model and rarely need changing.  ``disagreement_rate`` is the per-user
    probability that a given ham subtopic is flipped for that user;
    spam subtopics flip at ``disagreement_rate * spam_flip_factor``.
    """

    n_users: int = 10_000
    n_emails: int = 50_000
    vocab_size: int = 50_000
    spam_prior: float = 0.4
    zipf_exponent: float = 1.1
    disagreement_rate: float = 0.0
    seed: int = 0
    n_subtopics: int = 24
    spam_flip_factor: float = 0.1
    common_fraction: float = 0.2
    topic_mix: float = 0.7
    word_zipf: float = 1.25
    tokens_mean: int = 12
    days: int = 14

    def __post_init__(self):
        if self.n_users < 1 or self.n_emails < 0:
            raise InputError("n_users must be >= 1 and n_emails >= 0")
        if self.vocab_size < 2 * self.n_subtopics + 1:
            raise InputError(
                f"vocab_size must cover {2 * self.n_subtopics} subtopics plus a "
                f"common slice, got {self.vocab_size}"
            )
        if not 0.0 < self.spam_prior < 1.0:
            raise InputError(f"spam_prior must lie in (0, 1), got {self.spam_prior!r}")
        if self.zipf_exponent <= 0:
            raise InputError("zipf_exponent must be positive")
        if not 0.0 <= self.disagreement_rate < 1.0:
            raise InputError(
                f"disagreement_rate must lie in [0, 1), got {self.disagreement_rate!r}"
            )


def _zipf_probs(n: int, exponent: float) -> np.ndarray:
    p = np.arange(1, n + 1, dtype=float) ** -exponent
    return p / p.sum()


def _slices(cfg: GeneratorConfig) -> tuple[np.ndarray, list[np.ndarray]]:
    """Partition the vocabulary: common word ids, then one slice per subtopic."""
    k2 = 2 * cfg.n_subtopics
    n_common = max(1, int(cfg.vocab_size * cfg.common_fraction))
    per = (cfg.vocab_size - n_common) // k2
    if per < 1:
        n_common = cfg.vocab_size - k2
        per = 1
    ids = np.arange(cfg.vocab_size)
    common = ids[:n_common]
    slices = [ids[n_common + i * per : n_common + (i + 1) * per] for i in range(k2)]
    return common, slices


def generate(cfg: GeneratorConfig) -> list[CorpusLine]:
    """Materialize the corpus, sorted by timestamp, deterministic in ``seed``."""
    rng = np.random.default_rng(cfg.seed)
    k = cfg.n_subtopics
    common, slices = _slices(cfg)
    common_p = _zipf_probs(len(common), cfg.word_zipf)
    slice_p = [_zipf_probs(len(s), cfg.word_zipf) for s in slices]

    user_p = _zipf_probs(cfg.n_users, cfg.zipf_exponent)
    users = rng.choice(cfg.n_users, size=cfg.n_emails, p=user_p)
    timestamps = rng.integers(0, cfg.days * 86_400, size=cfg.n_emails)
    is_spam = rng.random(cfg.n_emails) < cfg.spam_prior
    subtopic = np.where(
        is_spam,
        rng.integers(0, k, size=cfg.n_emails),
        k + rng.integers(0, k, size=cfg.n_emails),
    )

    # persistent per-(user, subtopic) disagreement with the consensus label
    flip_rate = np.full(2 * k, cfg.disagreement_rate)
    flip_rate[:k] *= cfg.spam_flip_factor
    flips = rng.random((cfg.n_users, 2 * k)) < flip_rate
    consensus = np.where(is_spam, 1, -1)
    labels = np.where(flips[users, subtopic], -consensus, consensus)

    lengths = rng.poisson(max(1, cfg.tokens_mean - 5), size=cfg.n_emails) + 5
    n_topic = rng.binomial(lengths, cfg.topic_mix)
    n_common_tok = lengths - n_topic

    # one draw per subtopic slice covering all its emails, then one for the
    # common slice; per-email spans are carved out by cumulative offsets
    topic_words = np.empty(int(n_topic.sum()), dtype=np.int64)
    topic_off = np.zeros(cfg.n_emails + 1, dtype=np.int64)
    np.cumsum(n_topic, out=topic_off[1:])
    for s in range(2 * k):
        sel = np.flatnonzero(subtopic == s)
        total = int(n_topic[sel].sum())
        if total == 0:
            continue
        draws = rng.choice(slices[s], size=total, p=slice_p[s])
        pos = 0
        for e in sel:
            c = int(n_topic[e])
            topic_words[topic_off[e] : topic_off[e] + c] = draws[pos : pos + c]
            pos += c
    common_words = rng.choice(common, size=int(n_common_tok.sum()), p=common_p)
    common_off = np.zeros(cfg.n_emails + 1, dtype=np.int64)
    np.cumsum(n_common_tok, out=common_off[1:])

    width = len(str(cfg.n_users - 1))
    vocab = [f"w{i:06d}" for i in range(cfg.vocab_size)]
    user_names = {}
    order = np.argsort(timestamps, kind="stable")
    out = []
    for e in order:
        u = int(users[e])
        name = user_names.get(u)
        if name is None:
            name = user_names[u] = f"u{u:0{width}d}"
        toks = [vocab[w] for w in topic_words[topic_off[e] : topic_off[e + 1]]]
        toks += [vocab[w] for w in common_words[common_off[e] : common_off[e + 1]]]
        out.append(CorpusLine(int(labels[e]), name, int(timestamps[e]), toks))
    return out
