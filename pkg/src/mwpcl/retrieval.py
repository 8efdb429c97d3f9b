"""Two-step hard-triplet retrieval over a candidate pool.

Step one works at equation-template granularity: an exact-match or
nearest-neighbour strategy turns the precomputed similarity matrix into
positive and negative candidate sets. Step two picks the hard example by
text similarity: the *least* similar positive (same logic, different
words) and the *most* similar negative (same words, different logic).

Everything is deterministic: candidate sets follow pool order and ties
break on lexicographically smallest record id.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass

import numpy as np

from .corpus import ProblemRecord
from .errors import DataError, InvariantViolation, MissingEmbedding, NoNegative
from .similarity import SimilarityMatrix, bi_bleu, build_similarity_matrix, cosine_similarity

log = logging.getLogger(__name__)

EQ_STRATEGIES = ("em", "nn")
TEXT_METRICS = ("bibleu", "embedcos", "random")


@dataclass
class CandidatePool:
    """Read-only retrieval state: records, template membership and the
    similarity matrix over every template present in the pool."""

    records: list[ProblemRecord]
    by_id: dict[str, ProblemRecord]
    template_of: dict[str, str]
    templates: list[str]
    members: dict[str, list[str]]
    matrix: SimilarityMatrix
    embeddings: dict[str, np.ndarray] | None = None

    @classmethod
    def build(cls, records, embeddings=None) -> "CandidatePool":
        records = list(records)
        by_id: dict[str, ProblemRecord] = {}
        template_of: dict[str, str] = {}
        templates: list[str] = []
        members: dict[str, list[str]] = {}
        for record in records:
            if record.id in by_id:
                raise InvariantViolation(record.id, "duplicate id in candidate pool")
            by_id[record.id] = record
            key = record.template_key()
            template_of[record.id] = key
            if key not in members:
                members[key] = []
                templates.append(key)
            members[key].append(record.id)
        matrix = build_similarity_matrix(templates)
        return cls(records, by_id, template_of, templates, members, matrix, embeddings)

    def text_of(self, record: ProblemRecord) -> tuple[str, ...]:
        return record.tokens()


@dataclass(frozen=True)
class TripletPair:
    anchor_id: str
    positive_id: str
    negative_id: str
    eq_sim_pos: float
    eq_sim_neg: float
    text_sim_pos: float | None
    text_sim_neg: float | None
    strategy: tuple[str, str]

    def to_json(self) -> str:
        return json.dumps({
            "anchor_id": self.anchor_id,
            "positive_id": self.positive_id,
            "negative_id": self.negative_id,
            "eq_sim_pos": self.eq_sim_pos,
            "eq_sim_neg": self.eq_sim_neg,
            "text_sim_pos": self.text_sim_pos,
            "text_sim_neg": self.text_sim_neg,
            "strategy": list(self.strategy),
        }, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "TripletPair":
        payload = json.loads(line)
        return cls(
            payload["anchor_id"], payload["positive_id"], payload["negative_id"],
            payload["eq_sim_pos"], payload["eq_sim_neg"],
            payload["text_sim_pos"], payload["text_sim_neg"],
            tuple(payload["strategy"]),
        )


def save_triplets(triplets, path, header_lines=()):
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        for triplet in triplets:
            fh.write(triplet.to_json() + "\n")


def load_triplets(path) -> list[TripletPair]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                out.append(TripletPair.from_json(line))
    return out


# ---------------------------------------------------------------------------
# step one: equation-based candidate sets
# ---------------------------------------------------------------------------

def _records_of_templates(pool: CandidatePool, keys) -> list[ProblemRecord]:
    return [pool.by_id[rid] for key in keys for rid in pool.members[key]]


def positive_candidates(pool: CandidatePool, anchor: ProblemRecord,
                        strategy: str) -> list[ProblemRecord]:
    """Equation-side positive candidates.

    ``em``: every record sharing the anchor's template (the anchor alone
    when its template is unique). ``nn``: among records whose text differs
    from the anchor's, all records of maximal equation similarity; this
    walks past the exact matches only when no differently-worded record
    shares the template.
    """
    anchor_key = pool.template_of[anchor.id]
    if strategy == "em":
        return _records_of_templates(pool, [anchor_key])
    if strategy != "nn":
        raise DataError(f"unknown equation strategy {strategy!r}")

    anchor_text = pool.text_of(anchor)
    row = pool.matrix.values[pool.matrix.index_of(anchor_key)]
    best_sim = None
    chosen: list[ProblemRecord] = []
    for sim, key in sorted(zip(row, pool.templates), key=lambda x: -x[0]):
        if best_sim is not None and sim < best_sim:
            break
        candidates = [pool.by_id[rid] for rid in pool.members[key]
                      if pool.text_of(pool.by_id[rid]) != anchor_text]
        if candidates:
            best_sim = sim
            chosen.extend(candidates)
    if not chosen:
        return [anchor]  # degenerate pool: nothing differently worded
    return chosen


def negative_candidates(pool: CandidatePool, anchor: ProblemRecord, strategy: str,
                        positive_set) -> list[ProblemRecord]:
    """Equation-side negative candidates: records of the template closest
    to the anchor among templates excluded from the positive side (the
    anchor's own template under ``em``, every positive template under
    ``nn``)."""
    anchor_key = pool.template_of[anchor.id]
    if strategy == "em":
        excluded = {anchor_key}
    elif strategy == "nn":
        excluded = {pool.template_of[r.id] for r in positive_set}
        excluded.add(anchor_key)
    else:
        raise DataError(f"unknown equation strategy {strategy!r}")

    row = pool.matrix.values[pool.matrix.index_of(anchor_key)]
    candidates = [(sim, key) for sim, key in zip(row, pool.templates) if key not in excluded]
    if not candidates:
        raise NoNegative(f"no template outside {sorted(excluded)}")
    best = max(sim for sim, _ in candidates)
    keys = [key for sim, key in candidates if sim == best]
    out = [r for r in _records_of_templates(pool, keys) if r.id != anchor.id]
    if not out:
        raise NoNegative("negative templates contain only the anchor")
    return out


# ---------------------------------------------------------------------------
# step two: text-based hard-example selection
# ---------------------------------------------------------------------------

def _text_metric(pool: CandidatePool, metric: str):
    if metric == "bibleu":
        def score(a: ProblemRecord, b: ProblemRecord) -> float:
            return bi_bleu(pool.text_of(a), pool.text_of(b))
        return score
    if metric == "embedcos":
        table = pool.embeddings
        if table is None:
            raise MissingEmbedding("<no table attached>")

        def score(a: ProblemRecord, b: ProblemRecord) -> float:
            for rec in (a, b):
                if rec.id not in table:
                    raise MissingEmbedding(rec.id)
            return cosine_similarity(table[a.id], table[b.id])
        return score
    raise DataError(f"unknown text metric {metric!r}")


def select_triplet(pool: CandidatePool, anchor: ProblemRecord, positive_set,
                   negative_set, text_metric: str, eq_strategy: str,
                   rng: random.Random | None = None) -> TripletPair:
    """Pick the hard pair: least text-similar positive (anchor itself only
    when it is the whole set), most text-similar negative. ``random``
    draws uniformly instead, mirroring the ablation baseline."""
    if not positive_set or not negative_set:
        raise DataError("empty candidate set")
    positives = [r for r in positive_set if r.id != anchor.id] or [anchor]
    negatives = list(negative_set)

    if text_metric == "random":
        if rng is None:
            raise DataError("random text metric needs a seeded rng")
        positive = rng.choice(sorted(positives, key=lambda r: r.id))
        negative = rng.choice(sorted(negatives, key=lambda r: r.id))
        sim_pos = sim_neg = None
    else:
        score = _text_metric(pool, text_metric)
        scored_pos = [(score(anchor, r), r) for r in positives]
        scored_neg = [(score(anchor, r), r) for r in negatives]
        sim_pos = min(s for s, _ in scored_pos)
        sim_neg = max(s for s, _ in scored_neg)
        positive = min((r for s, r in scored_pos if s == sim_pos), key=lambda r: r.id)
        negative = min((r for s, r in scored_neg if s == sim_neg), key=lambda r: r.id)

    anchor_key = pool.template_of[anchor.id]
    return TripletPair(
        anchor_id=anchor.id,
        positive_id=positive.id,
        negative_id=negative.id,
        eq_sim_pos=pool.matrix.sim(anchor_key, pool.template_of[positive.id]),
        eq_sim_neg=pool.matrix.sim(anchor_key, pool.template_of[negative.id]),
        text_sim_pos=sim_pos,
        text_sim_neg=sim_neg,
        strategy=(eq_strategy, text_metric),
    )


def retrieve_all(pool: CandidatePool, eq_strategy: str, text_metric: str,
                 seed: int | None = None, anchors=None):
    """One triplet per anchor; per-anchor failures are collected, not fatal.

    Anchors default to the pool's ``train`` records. When the embedding
    metric lacks a vector for some record the anchor falls back to
    ``bibleu`` (augments have no precomputed embeddings) and the triplet's
    strategy field says so.
    """
    if eq_strategy not in EQ_STRATEGIES:
        raise DataError(f"unknown equation strategy {eq_strategy!r}")
    if text_metric not in TEXT_METRICS:
        raise DataError(f"unknown text metric {text_metric!r}")
    if anchors is None:
        anchors = [r for r in pool.records if r.origin == "train"]

    triplets: list[TripletPair] = []
    failures: list[tuple[str, str]] = []
    for anchor in anchors:
        # per-anchor stream keeps random picks invariant to pool order
        rng = random.Random(f"{seed}:{anchor.id}")
        try:
            positives = positive_candidates(pool, anchor, eq_strategy)
            negatives = negative_candidates(pool, anchor, eq_strategy, positives)
            try:
                triplet = select_triplet(pool, anchor, positives, negatives,
                                         text_metric, eq_strategy, rng)
            except MissingEmbedding as exc:
                log.warning("anchor %s: %s; falling back to bibleu", anchor.id, exc)
                triplet = select_triplet(pool, anchor, positives, negatives,
                                         "bibleu", eq_strategy, rng)
            triplets.append(triplet)
        except DataError as exc:
            failures.append((anchor.id, f"{type(exc).__name__}: {exc}"))
    return triplets, failures
