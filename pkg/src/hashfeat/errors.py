"""Exception types shared across the package.

Everything user-input-shaped derives from ValueError so callers that do not
care about the fine distinctions can catch one thing.
"""


class InputError(ValueError):
    """Malformed argument: empty token, bad seed, negative norm, bad rate."""


class DimensionMismatch(ValueError):
    """Two hashed vectors (or a model and a vector) disagree on bucket count."""


class HypothesisError(ValueError):
    """A concentration experiment's stated hypotheses do not hold.

    ``inequality`` carries the failed condition verbatim so reports and error
    messages can name it.
    """

    def __init__(self, inequality: str, detail: str = ""):
        self.inequality = inequality
        msg = f"hypothesis violated: {inequality}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class CorpusFormatError(ValueError):
    """A corpus line does not parse; message includes the 1-based line number."""

    def __init__(self, lineno: int, reason: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {reason}")


class TrainingDiverged(RuntimeError):
    """A weight or prediction went non-finite during SGD."""

    def __init__(self, step: int, bucket: int | None, value: float):
        self.step = step
        self.bucket = bucket
        where = f"bucket {bucket}" if bucket is not None else "prediction"
        super().__init__(
            f"non-finite value {value!r} at training step {step} ({where}); "
            f"lower lr0 or inspect the input stream"
        )


class ModelFormatError(ValueError):
    """Model file is truncated, has a bad magic, or an unknown version."""


class OracleModeError(RuntimeError):
    """Exact (un-hashed) reference mode refused: problem too large."""
