"""Desk-scale contrastive trainer.

The encoder is deliberately tiny: a bag-of-tokens mean over an embedding
table, so every gradient is hand-derivable and the contrastive pull/push
is observable without a pretrained language model. The combined objective
is

    L = L_solver + alpha * L_cl

where L_solver is a template-classification cross-entropy standing in for
equation generation, and L_cl is the in-batch InfoNCE objective over
triplets (x, x+, x-):

    L_cl = -(1/N) sum_i log
        exp(cos(x_i, x_i+)/tau)
        / sum_j (exp(cos(x_i, x_j+)/tau) + exp(cos(x_i, x_j-)/tau))

Optimization is plain SGD with a fixed learning rate; together with the
seeded shuffle this keeps training runs byte-reproducible.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .corpus import ProblemRecord
from .errors import DataError, EmptyText, NonFiniteGradient, ZeroVector
from .similarity import save_embedding_table

UNK_TOKEN = "<unk>"
OTHER_CLASS = "<other>"


@dataclass
class EncoderParams:
    vocab: dict[str, int]
    embed: np.ndarray       # (V, d)
    classes: list[str]      # top-K template keys, then the catch-all class
    classifier: np.ndarray  # (d, len(classes))
    rng_seed: int

    @property
    def dim(self) -> int:
        return self.embed.shape[1]

    def label_of(self, record: ProblemRecord) -> int:
        key = record.template_key()
        try:
            return self.classes.index(key)
        except ValueError:
            return len(self.classes) - 1


@dataclass
class TrainConfig:
    tau: float = 0.1
    alpha: float = 0.5
    batch_size: int = 16
    learning_rate: float = 0.5
    steps: int = 500
    include_augments_as_anchors: bool = False

    def __post_init__(self):
        if self.tau <= 0:
            raise DataError("temperature must be positive")
        if not 0 <= self.alpha <= 1:
            raise DataError("alpha must lie in [0, 1]")
        if self.batch_size < 1:
            raise DataError("batch size must be >= 1")


@dataclass
class StepStats:
    loss: float
    solver_loss: float
    cl_loss: float
    gap: float


def init_params(records, dim: int = 64, template_classes: int = 5,
                seed: int = 0) -> EncoderParams:
    """Vocabulary over the pool's tokens, the K most frequent templates as
    classifier targets (plus a catch-all), gaussian init."""
    if dim < 2:
        raise DataError("embedding dim must be >= 2")
    records = list(records)
    tokens = sorted({tok for r in records for tok in r.tokens()})
    vocab = {UNK_TOKEN: 0}
    for token in tokens:
        vocab[token] = len(vocab)

    counts = Counter(r.template_key() for r in records)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    classes = [key for key, _ in ranked[:template_classes]]
    classes.append(OTHER_CLASS)

    rng = np.random.default_rng(seed)
    embed = rng.standard_normal((len(vocab), dim)) / np.sqrt(dim)
    classifier = rng.standard_normal((dim, len(classes))) / np.sqrt(dim)
    return EncoderParams(vocab, embed, classes, classifier, seed)


# ---------------------------------------------------------------------------
# encoding
# ---------------------------------------------------------------------------

def _token_indices(record: ProblemRecord, params: EncoderParams) -> np.ndarray:
    tokens = record.tokens()
    if not tokens:
        raise EmptyText(record.id)
    return np.array([params.vocab.get(t, 0) for t in tokens], dtype=np.intp)

def encode(record: ProblemRecord, params: EncoderParams) -> np.ndarray:
    """Mean of the token embeddings over all sentences (bag of tokens)."""
    idx = _token_indices(record, params)
    return params.embed[idx].mean(axis=0)


def encode_all(records, params: EncoderParams) -> np.ndarray:
    return np.stack([encode(r, params) for r in records])


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def _normalize_rows(M: np.ndarray):
    norms = np.linalg.norm(M, axis=1)
    if np.any(norms == 0.0):
        raise ZeroVector("zero encoder output in batch")
    return M / norms[:, None], norms


def info_nce_loss(anchors, positives, negatives, tau: float) -> float:
    """In-batch InfoNCE over cosine similarities; forward value only."""
    loss, _ = _cl_forward(np.asarray(anchors, dtype=np.float64),
                          np.asarray(positives, dtype=np.float64),
                          np.asarray(negatives, dtype=np.float64), tau)
    return loss


def _cl_forward(X, P, G, tau):
    """Returns the loss plus every intermediate the backward pass needs."""
    U, nx = _normalize_rows(X)
    V, np_ = _normalize_rows(P)
    W, ng = _normalize_rows(G)
    Cp = U @ V.T
    Cn = U @ W.T
    Sp = Cp / tau
    Sn = Cn / tau
    m = np.maximum(Sp.max(axis=1), Sn.max(axis=1))
    Ep = np.exp(Sp - m[:, None])
    En = np.exp(Sn - m[:, None])
    Z = Ep.sum(axis=1) + En.sum(axis=1)
    log_Z = m + np.log(Z)
    N = X.shape[0]
    loss = float(np.mean(log_Z - np.diag(Sp)))
    cache = (U, V, W, nx, np_, ng, Cp, Cn, Ep, En, Z, N)
    return loss, cache


def _cl_backward(cache, tau):
    U, V, W, nx, np_, ng, Cp, Cn, Ep, En, Z, N = cache
    Pp = Ep / Z[:, None]  # softmax over the 2N-way denominator
    Pn = En / Z[:, None]
    Gp = (Pp - np.eye(N)) / (N * tau)
    Gn = Pn / (N * tau)

    row_dot = (Gp * Cp).sum(axis=1) + (Gn * Cn).sum(axis=1)
    dX = (Gp @ V + Gn @ W - row_dot[:, None] * U) / nx[:, None]
    dP = (Gp.T @ U - (Gp * Cp).sum(axis=0)[:, None] * V) / np_[:, None]
    dG = (Gn.T @ U - (Gn * Cn).sum(axis=0)[:, None] * W) / ng[:, None]
    return dX, dP, dG


def _solver_forward(X, labels, classifier):
    logits = X @ classifier
    m = logits.max(axis=1, keepdims=True)
    exp = np.exp(logits - m)
    total = exp.sum(axis=1, keepdims=True)
    log_probs = logits - m - np.log(total)
    N = X.shape[0]
    loss = float(-log_probs[np.arange(N), labels].mean())
    softmax = exp / total
    return loss, softmax


def _solver_backward(X, labels, softmax, classifier):
    N = X.shape[0]
    dlogits = softmax.copy()
    dlogits[np.arange(N), labels] -= 1.0
    dlogits /= N
    dW = X.T @ dlogits
    dX = dlogits @ classifier.T
    return dX, dW


def solver_standin_loss(record: ProblemRecord, params: EncoderParams) -> float:
    """Template-classification cross-entropy for one record."""
    x = encode(record, params)[None, :]
    label = np.array([params.label_of(record)])
    loss, _ = _solver_forward(x, label, params.classifier)
    return loss


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def _batch_records(batch, by_id):
    anchors = [by_id[t.anchor_id] for t in batch]
    positives = [by_id[t.positive_id] for t in batch]
    negatives = [by_id[t.negative_id] for t in batch]
    return anchors, positives, negatives


def batch_loss(batch, by_id, params: EncoderParams, config: TrainConfig):
    """Forward pass only: (L, L_solver, L_cl, gap) for a triplet batch."""
    anchors, positives, negatives = _batch_records(batch, by_id)
    X = encode_all(anchors, params)
    P = encode_all(positives, params)
    G = encode_all(negatives, params)
    labels = np.array([params.label_of(r) for r in anchors])
    cl, cache = _cl_forward(X, P, G, config.tau)
    solver, _ = _solver_forward(X, labels, params.classifier)
    Cp, Cn = cache[6], cache[7]
    gap = float(np.diag(Cp).mean() - np.diag(Cn).mean())
    return solver + config.alpha * cl, solver, cl, gap


def batch_gradients(batch, by_id, params: EncoderParams, config: TrainConfig):
    """Loss and analytic gradients of the combined objective for one
    triplet batch: returns (stats, d_embed, d_classifier).

    Gradients flow through the cosine similarities, the classifier softmax
    and the mean pooling into the embedding table.
    """
    anchors, positives, negatives = _batch_records(batch, by_id)
    idx_lists = [_token_indices(r, params)
                 for r in (*anchors, *positives, *negatives)]
    vectors = np.stack([params.embed[idx].mean(axis=0) for idx in idx_lists])
    n = len(anchors)
    X, P, G = vectors[:n], vectors[n:2 * n], vectors[2 * n:]
    labels = np.array([params.label_of(r) for r in anchors])

    cl, cache = _cl_forward(X, P, G, config.tau)
    solver, softmax = _solver_forward(X, labels, params.classifier)
    total = solver + config.alpha * cl

    dX_cl, dP, dG = _cl_backward(cache, config.tau)
    dX_solver, dW = _solver_backward(X, labels, softmax, params.classifier)
    dX = dX_solver + config.alpha * dX_cl

    dE = np.zeros_like(params.embed)
    grads = np.concatenate([dX, config.alpha * dP, config.alpha * dG], axis=0)
    for idx, grad in zip(idx_lists, grads):
        np.add.at(dE, idx, grad / idx.size)

    if not (np.all(np.isfinite(dE)) and np.all(np.isfinite(dW))):
        raise NonFiniteGradient("non-finite gradient in train step")

    Cp, Cn = cache[6], cache[7]
    gap = float(np.diag(Cp).mean() - np.diag(Cn).mean())
    return StepStats(total, solver, cl, gap), dE, dW


def train_step(batch, by_id, params: EncoderParams, config: TrainConfig):
    """One plain-SGD step on a triplet batch; returns (params, stats)."""
    stats, dE, dW = batch_gradients(batch, by_id, params, config)
    params.embed -= config.learning_rate * dE
    params.classifier -= config.learning_rate * dW
    return params, stats


def train(triplets, by_id, params: EncoderParams, config: TrainConfig,
          metrics_sink=None):
    """Run ``config.steps`` SGD steps over the triplets, reshuffling once
    per epoch with the seeded RNG. ``metrics_sink`` receives one line per
    step: ``step L L_solver L_cl gap``."""
    if not triplets:
        raise DataError("no triplets to train on")
    rng = np.random.default_rng(params.rng_seed)
    order = np.arange(len(triplets))
    step = 0
    while step < config.steps:
        rng.shuffle(order)
        for start in range(0, len(order), config.batch_size):
            if step >= config.steps:
                break
            batch = [triplets[k] for k in order[start:start + config.batch_size]]
            params, stats = train_step(batch, by_id, params, config)
            step += 1
            if metrics_sink is not None:
                metrics_sink(f"{step} {stats.loss:.9g} {stats.solver_loss:.9g} "
                             f"{stats.cl_loss:.9g} {stats.gap:.9g}")
    return params


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def eval_representation(records, triplets, params: EncoderParams) -> dict:
    """Representation quality: mean positive/negative cosine over the
    triplets, their gap, and same-template nearest-neighbour precision
    over the whole pool (cosine, self excluded)."""
    records = list(records)
    by_id = {r.id: r for r in records}
    pos_cos = []
    neg_cos = []
    for t in triplets:
        x = encode(by_id[t.anchor_id], params)
        p = encode(by_id[t.positive_id], params)
        g = encode(by_id[t.negative_id], params)
        nx, npos, ng = (np.linalg.norm(v) for v in (x, p, g))
        if nx == 0 or npos == 0 or ng == 0:
            raise ZeroVector("zero encoding in eval")
        pos_cos.append(float(x @ p / (nx * npos)))
        neg_cos.append(float(x @ g / (nx * ng)))

    X = encode_all(records, params)
    U, _ = _normalize_rows(X)
    sims = U @ U.T
    np.fill_diagonal(sims, -np.inf)
    nearest = sims.argmax(axis=1)
    keys = [r.template_key() for r in records]
    hits = sum(keys[i] == keys[j] for i, j in enumerate(nearest))

    mean_pos = float(np.mean(pos_cos)) if pos_cos else 0.0
    mean_neg = float(np.mean(neg_cos)) if neg_cos else 0.0
    return {
        "mean_pos_cos": mean_pos,
        "mean_neg_cos": mean_neg,
        "gap": mean_pos - mean_neg,
        "same_template_retrieval_at_1": hits / len(records) if records else 0.0,
    }


def dump_embeddings(records, params: EncoderParams, path, header_lines=()):
    table = {r.id: encode(r, params) for r in records}
    save_embedding_table(table, path, header_lines)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

CHECKPOINT_MAGIC = "mwpcl-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(params: EncoderParams, path, header_lines=()):
    """Versioned plain-text checkpoint: vocab listing then row-major
    weights with shortest round-trip decimal formatting."""
    tokens = sorted(params.vocab, key=params.vocab.get)
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n")
        fh.write(f"seed {params.rng_seed}\n")
        fh.write(f"dim {params.dim}\n")
        fh.write(f"vocab {len(tokens)}\n")
        for token in tokens:
            fh.write(token + "\n")
        fh.write(f"classes {len(params.classes)}\n")
        for cls in params.classes:
            fh.write(cls + "\n")
        for name, matrix in (("embed", params.embed), ("classifier", params.classifier)):
            fh.write(f"{name} {matrix.shape[0]} {matrix.shape[1]}\n")
            for row in matrix:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_checkpoint(path) -> EncoderParams:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    pos = 0
    while pos < len(lines) and lines[pos].startswith("#"):
        pos += 1
    if pos >= len(lines) or not lines[pos].startswith(CHECKPOINT_MAGIC):
        raise DataError(f"not a checkpoint file: {path}")
    version = int(lines[pos].split()[1])
    if version != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint version {version}")
    pos += 1

    def header(name):
        nonlocal pos
        parts = lines[pos].split()
        if parts[0] != name:
            raise DataError(f"expected {name!r} section, got {lines[pos]!r}")
        pos += 1
        return [int(v) for v in parts[1:]]

    (seed,) = header("seed")
    (dim,) = header("dim")
    (vocab_size,) = header("vocab")
    vocab = {lines[pos + i]: i for i in range(vocab_size)}
    pos += vocab_size
    (class_count,) = header("classes")
    classes = [lines[pos + i] for i in range(class_count)]
    pos += class_count

    def matrix(name):
        nonlocal pos
        rows, cols = header(name)
        data = np.array([[float(v) for v in lines[pos + i].split()] for i in range(rows)])
        pos += rows
        if data.shape != (rows, cols):
            raise DataError(f"{name} block has shape {data.shape}, expected {(rows, cols)}")
        return data

    embed = matrix("embed")
    classifier = matrix("classifier")
    if embed.shape != (vocab_size, dim):
        raise DataError("embed shape does not match vocab/dim header")
    return EncoderParams(vocab, embed, classes, classifier, seed)
