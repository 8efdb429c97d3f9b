"""mwpcl: hard-triplet contrastive learning toolkit for math word problems.

Pipeline pieces: corpus ingestion with number-slot normalization,
equation ASTs, self-supervised augmentation (question reordering and
reversed-operation inversion), equation/text similarity kernels,
two-stage hard-triplet retrieval, and a small deterministic contrastive
trainer.
"""

__version__ = "0.1.0"

from .equation import EquationTree, evaluate, parse_equation, parse_prefix, template_key, to_prefix
from .similarity import (
    TED_BACKEND,
    SimilarityMatrix,
    bi_bleu,
    bleu,
    build_similarity_matrix,
    cosine_similarity,
    equation_similarity,
    tree_edit_distance,
)

__all__ = [
    "EquationTree",
    "SimilarityMatrix",
    "TED_BACKEND",
    "__version__",
    "bi_bleu",
    "bleu",
    "build_similarity_matrix",
    "cosine_similarity",
    "equation_similarity",
    "evaluate",
    "parse_equation",
    "parse_prefix",
    "template_key",
    "to_prefix",
    "tree_edit_distance",
]
