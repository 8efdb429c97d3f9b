"""Similarity kernels: tree edit distance over equations, BLEU and
embedding-cosine over texts, and batch similarity-matrix construction.

Equation similarity is the length-normalized score

    sim(t1, t2) = 1 - TED(t1, t2) / (|t1| + |t2|)

with unit edit costs and |t| the AST node count, so scores live in [0, 1]
with 1.0 exactly on identical trees.

The TED kernel has two interchangeable backends: a compiled extension
(``mwpcl._ted_core``, built from Cython) and a pure-Python fallback
(``mwpcl._ted_py``). The compiled one is picked at import time when
available; set ``MWPCL_PURE_TED=1`` to force the fallback.
"""

from __future__ import annotations

import math
import os
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .equation import EquationTree, node_count, parse_prefix, template_key
from .errors import DataError, DimMismatch, EmptyInput, ZeroVector

if os.environ.get("MWPCL_PURE_TED"):
    from . import _ted_py as _backend
else:
    try:
        from . import _ted_core as _backend  # type: ignore[attr-defined]
    except ImportError:
        from . import _ted_py as _backend

TED_BACKEND = _backend.BACKEND_NAME


# ---------------------------------------------------------------------------
# tree flattening
# ---------------------------------------------------------------------------

def _flatten(tree: EquationTree, intern: dict[str, int]):
    """Postorder label ids, leftmost-leaf-descendant indices and keyroots.

    Indices are local (0-based within the tree); keyroots ascend, which the
    kernels rely on so subtree distances exist before they are referenced.
    """
    labels: list[int] = []
    lmld: list[int] = []

    def walk(node: EquationTree) -> int:
        if node.children:
            first = walk(node.children[0])
            for child in node.children[1:]:
                walk(child)
        index = len(labels)
        labels.append(intern.setdefault(node.label, len(intern)))
        lmld.append(first if node.children else index)
        return lmld[index]

    walk(tree)
    last_for_lmld: dict[int, int] = {}
    for index, lm in enumerate(lmld):
        last_for_lmld[lm] = index
    keyroots = sorted(last_for_lmld.values())
    return labels, lmld, keyroots


def tree_edit_distance(t1: EquationTree, t2: EquationTree) -> int:
    """Ordered tree edit distance with unit insert/delete/relabel costs."""
    intern: dict[str, int] = {}
    lab1, lml1, kr1 = _flatten(t1, intern)
    lab2, lml2, kr2 = _flatten(t2, intern)
    return int(_backend.ted_pair(lab1, lml1, kr1, lab2, lml2, kr2))


def equation_similarity(t1: EquationTree, t2: EquationTree) -> float:
    return 1.0 - tree_edit_distance(t1, t2) / (node_count(t1) + node_count(t2))


# ---------------------------------------------------------------------------
# similarity matrix
# ---------------------------------------------------------------------------

@dataclass
class SimilarityMatrix:
    """Dense symmetric matrix of equation similarities over template keys."""

    keys: list[str]
    values: np.ndarray

    def __post_init__(self):
        self._index = {key: i for i, key in enumerate(self.keys)}

    def index_of(self, key: str) -> int:
        try:
            return self._index[key]
        except KeyError:
            raise DataError(f"template not in matrix: {key!r}") from None

    def sim(self, key1: str, key2: str) -> float:
        return float(self.values[self.index_of(key1), self.index_of(key2)])

    def save(self, path, header_lines=()):
        with open(path, "w", encoding="utf-8") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write("\t".join(self.keys) + "\n")
            for row in self.values:
                fh.write(" ".join(format(v, ".9g") for v in row) + "\n")

    @classmethod
    def load(cls, path) -> "SimilarityMatrix":
        with open(path, encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
        if not lines:
            raise DataError(f"empty similarity matrix file: {path}")
        keys = lines[0].split("\t") if lines[0] else []
        rows = [[float(v) for v in ln.split()] for ln in lines[1:] if ln]
        values = np.array(rows, dtype=np.float64) if rows else np.zeros((0, 0))
        if values.shape != (len(keys), len(keys)):
            raise DataError(f"matrix shape {values.shape} does not match {len(keys)} keys")
        return cls(keys, values)


def build_similarity_matrix(templates) -> SimilarityMatrix:
    """All-pairs equation similarity over deduplicated template keys.

    ``templates`` may hold prefix key strings or parsed trees; order is
    preserved. Duplicate keys are rejected since the matrix is meant to be
    built over unique templates.
    """
    keys: list[str] = []
    trees: list[EquationTree] = []
    for item in templates:
        tree = parse_prefix(item) if isinstance(item, str) else item
        keys.append(template_key(tree))
        trees.append(tree)
    if len(set(keys)) != len(keys):
        raise DataError("duplicate template keys passed to build_similarity_matrix")

    intern: dict[str, int] = {}
    labels: list[int] = []
    lmld: list[int] = []
    keyroots: list[int] = []
    offsets = [0]
    kr_offsets = [0]
    for tree in trees:
        lab, lml, kr = _flatten(tree, intern)
        labels.extend(lab)
        lmld.extend(lml)
        keyroots.extend(kr)
        offsets.append(len(labels))
        kr_offsets.append(len(keyroots))

    ted = np.asarray(_backend.ted_all_pairs(labels, lmld, offsets, keyroots, kr_offsets),
                     dtype=np.float64)
    sizes = np.array([node_count(t) for t in trees], dtype=np.float64)
    with np.errstate(invalid="ignore"):
        values = 1.0 - ted / (sizes[:, None] + sizes[None, :])
    np.fill_diagonal(values, 1.0)
    return SimilarityMatrix(keys, values)


# ---------------------------------------------------------------------------
# text similarity
# ---------------------------------------------------------------------------

def _ngram_counts(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate, reference) -> float:
    """Sentence-level BLEU-4 of ``candidate`` against a single reference.

    Geometric mean of modified n-gram precisions (n = 1..4) times the
    brevity penalty. No smoothing: any zero precision zeroes the score.
    When the candidate is shorter than 4 tokens the order range shrinks
    to the feasible n, keeping short sentences comparable.
    """
    candidate = list(candidate)
    reference = list(reference)
    if not candidate or not reference:
        raise EmptyInput("bleu needs non-empty token sequences")

    max_order = min(4, len(candidate))
    log_sum = 0.0
    for n in range(1, max_order + 1):
        cand_counts = _ngram_counts(candidate, n)
        ref_counts = _ngram_counts(reference, n)
        clipped = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
        total = len(candidate) - n + 1
        if clipped == 0:
            return 0.0
        log_sum += math.log(clipped / total)

    c, r = len(candidate), len(reference)
    brevity = 1.0 if c > r else math.exp(1.0 - r / c)
    return brevity * math.exp(log_sum / max_order)


def bi_bleu(tokens1, tokens2) -> float:
    """Symmetric text similarity: mean of BLEU in both directions."""
    return (bleu(tokens1, tokens2) + bleu(tokens2, tokens1)) / 2.0


def cosine_similarity(v1, v2) -> float:
    v1 = np.asarray(v1, dtype=np.float64)
    v2 = np.asarray(v2, dtype=np.float64)
    if v1.shape != v2.shape:
        raise DimMismatch(f"dims {v1.shape} vs {v2.shape}")
    n1 = np.linalg.norm(v1)
    n2 = np.linalg.norm(v2)
    if n1 == 0.0 or n2 == 0.0:
        raise ZeroVector("cosine of zero vector")
    return float(np.dot(v1, v2) / (n1 * n2))


# ---------------------------------------------------------------------------
# embedding tables
# ---------------------------------------------------------------------------

def save_embedding_table(table: dict[str, np.ndarray], path, header_lines=()):
    """One line per record: id then the vector entries, 9 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        for record_id, vector in table.items():
            text = " ".join(format(float(v), ".9g") for v in np.asarray(vector).ravel())
            fh.write(f"{record_id} {text}\n")


def load_embedding_table(path) -> dict[str, np.ndarray]:
    table: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if line.startswith("#") or not line.strip():
                continue
            parts = line.split()
            record_id, values = parts[0], parts[1:]
            if not values:
                raise DataError(f"embedding line {line_no} has no values")
            vector = np.array([float(v) for v in values], dtype=np.float64)
            if not np.all(np.isfinite(vector)):
                raise DataError(f"non-finite embedding for {record_id!r}")
            if dim is None:
                dim = vector.size
            elif vector.size != dim:
                raise DimMismatch(f"embedding for {record_id!r} has dim {vector.size}, expected {dim}")
            table[record_id] = vector
    return table
