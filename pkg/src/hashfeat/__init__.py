"""hashfeat: signed feature hashing, its verification harness, and a hashed learner."""

from .cfsketch import (
    CfSketch,
    FactorMatrix,
    estimate_entry,
    estimate_matrix,
    frobenius_error_sweep,
    sketch_factors,
)
from .corpus import (
    CorpusLine,
    GeneratorConfig,
    generate,
    parse_corpus,
    parse_line,
    read_corpus,
    serialize_line,
    time_split,
    write_corpus,
)
from .errors import (
    CorpusFormatError,
    DimensionMismatch,
    HypothesisError,
    InputError,
    ModelFormatError,
    OracleModeError,
    TrainingDiverged,
)
from .hashcore import (
    HashConfig,
    HashedVector,
    ReplicationParams,
    SparseVector,
    bernstein_interference_bound,
    feature_map,
    hash_token,
    hashed_inner,
    pair_hash,
    personalized_token,
    replicate,
    replicated_self_variance,
    variance_closed_form,
)
from .learner import (
    Example,
    HashedModel,
    bucket_index,
    bucket_label,
    calibrate_threshold,
    evaluate,
    evaluate_scores,
    featurize,
    load_model,
    predict,
    ratio_report,
    save_model,
    sgd_update,
    train_model,
)
from .oracle import (
    ErrorDecomposition,
    OracleModel,
    decompose_errors,
    hybrid_image,
    interference_terms,
    oracle_train,
)

__version__ = "1.0.0"

__all__ = [
    "CfSketch",
    "CorpusFormatError",
    "CorpusLine",
    "DimensionMismatch",
    "ErrorDecomposition",
    "Example",
    "FactorMatrix",
    "GeneratorConfig",
    "HashConfig",
    "HashedModel",
    "HashedVector",
    "HypothesisError",
    "InputError",
    "ModelFormatError",
    "OracleModeError",
    "OracleModel",
    "ReplicationParams",
    "SparseVector",
    "TrainingDiverged",
    "bernstein_interference_bound",
    "bucket_index",
    "bucket_label",
    "calibrate_threshold",
    "decompose_errors",
    "estimate_entry",
    "estimate_matrix",
    "evaluate",
    "evaluate_scores",
    "feature_map",
    "featurize",
    "frobenius_error_sweep",
    "generate",
    "hash_token",
    "hashed_inner",
    "hybrid_image",
    "interference_terms",
    "load_model",
    "oracle_train",
    "pair_hash",
    "parse_corpus",
    "parse_line",
    "personalized_token",
    "predict",
    "ratio_report",
    "read_corpus",
    "replicate",
    "replicated_self_variance",
    "save_model",
    "serialize_line",
    "sgd_update",
    "sketch_factors",
    "time_split",
    "train_model",
    "variance_closed_form",
    "write_corpus",
    "__version__",
]
