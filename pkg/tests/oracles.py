"""Independent oracles used by the test suite.

Nothing here shares code or algorithmic structure with the library paths
it checks: tree edit distance is recomputed by exhaustive mapping
enumeration and by a memoized rightmost-root forest recursion (no
keyroots, no postorder DP), and BLEU is recomputed with exact rational
arithmetic.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

from mwpcl.equation import EquationTree


# ---------------------------------------------------------------------------
# tree enumeration
# ---------------------------------------------------------------------------

def enumerate_trees(max_nodes, ops=("+", "-", "*", "/"), leaves=("n1", "n2", "n3")):
    """All equation trees with at most ``max_nodes`` nodes over the given
    operator and leaf alphabets (binary operators, so sizes are odd)."""
    by_size: dict[int, list[EquationTree]] = {1: [EquationTree(label) for label in leaves]}
    for size in range(3, max_nodes + 1, 2):
        found: list[EquationTree] = []
        for left_size in range(1, size - 1, 2):
            right_size = size - 1 - left_size
            for left in by_size[left_size]:
                for right in by_size.get(right_size, []):
                    for op in ops:
                        found.append(EquationTree(op, (left, right)))
        by_size[size] = found
    out: list[EquationTree] = []
    for size in sorted(by_size):
        if size <= max_nodes:
            out.extend(by_size[size])
    return out


def tree_size(tree: EquationTree) -> int:
    return 1 + sum(tree_size(c) for c in tree.children)


# ---------------------------------------------------------------------------
# oracle 1: exhaustive Tai-mapping enumeration
# ---------------------------------------------------------------------------

def _postorder(tree: EquationTree):
    """Postorder labels plus an ancestor matrix (anc[i][j]: i is a proper
    ancestor of j)."""
    labels: list[str] = []
    descendants: list[set[int]] = []

    def walk(node):
        child_desc: set[int] = set()
        for child in node.children:
            child_index = walk(child)
            child_desc |= descendants[child_index] | {child_index}
        index = len(labels)
        labels.append(node.label)
        descendants.append(child_desc)
        return index

    walk(tree)
    n = len(labels)
    anc = [[j in descendants[i] for j in range(n)] for i in range(n)]
    return labels, anc


def ted_mappings(t1: EquationTree, t2: EquationTree) -> int:
    """Minimum edit cost by enumerating every valid tree mapping.

    A mapping is a set of node pairs, one-to-one on both sides, that
    preserves postorder and the ancestor relation; its cost is one per
    unmapped node plus one per mapped pair with differing labels.
    """
    labels1, anc1 = _postorder(t1)
    labels2, anc2 = _postorder(t2)
    n1, n2 = len(labels1), len(labels2)

    best = n1 + n2  # empty mapping

    def extend(i, j_floor, pairs):
        nonlocal best
        cost = (n1 - len(pairs)) + (n2 - len(pairs)) + sum(
            labels1[a] != labels2[b] for a, b in pairs)
        if cost < best:
            best = cost
        for a in range(i, n1):
            for b in range(j_floor, n2):
                ok = all((anc1[a][x] == anc2[b][y]) and (anc1[x][a] == anc2[y][b])
                         for x, y in pairs)
                if ok:
                    pairs.append((a, b))
                    extend(a + 1, b + 1, pairs)
                    pairs.pop()

    extend(0, 0, [])
    return best


# ---------------------------------------------------------------------------
# oracle 2: memoized rightmost-root forest recursion
# ---------------------------------------------------------------------------

class ForestDistance:
    """Edit distance by direct recursion on forests: delete the rightmost
    root (splicing its children), insert, or match roots and recurse into
    the child forests. Trees and forests are interned to small integers so
    the memo table is shared across every pair in a sweep."""

    def __init__(self):
        self.tree_table: list[tuple[str, tuple[int, ...]]] = []
        self.tree_ids: dict[tuple[str, tuple[int, ...]], int] = {}
        self.forest_table: list[tuple[int, ...]] = []
        self.forest_ids: dict[tuple[int, ...], int] = {}
        self.forest_sizes: list[int] = []
        self.memo: dict[tuple[int, int], int] = {}

    def tree_id(self, tree: EquationTree) -> int:
        children = tuple(self.tree_id(c) for c in tree.children)
        key = (tree.label, children)
        tid = self.tree_ids.get(key)
        if tid is None:
            tid = len(self.tree_table)
            self.tree_table.append(key)
            self.tree_ids[key] = tid
        return tid

    def _tree_size(self, tid: int) -> int:
        label, children = self.tree_table[tid]
        return 1 + sum(self._tree_size(c) for c in children)

    def forest_id(self, trees: tuple[int, ...]) -> int:
        fid = self.forest_ids.get(trees)
        if fid is None:
            fid = len(self.forest_table)
            self.forest_table.append(trees)
            self.forest_ids[trees] = fid
            self.forest_sizes.append(sum(self._tree_size(t) for t in trees))
        return fid

    def distance(self, t1: EquationTree, t2: EquationTree) -> int:
        f1 = self.forest_id((self.tree_id(t1),))
        f2 = self.forest_id((self.tree_id(t2),))
        return self._dist(f1, f2)

    def _dist(self, f1: int, f2: int) -> int:
        if f1 == f2:
            return 0
        key = (f1, f2)
        cached = self.memo.get(key)
        if cached is not None:
            return cached
        trees1 = self.forest_table[f1]
        trees2 = self.forest_table[f2]
        if not trees1:
            result = self.forest_sizes[f2]
        elif not trees2:
            result = self.forest_sizes[f1]
        else:
            v = trees1[-1]
            w = trees2[-1]
            label_v, children_v = self.tree_table[v]
            label_w, children_w = self.tree_table[w]
            rest1 = trees1[:-1]
            rest2 = trees2[:-1]
            delete = self._dist(self.forest_id(rest1 + children_v), f2) + 1
            insert = self._dist(f1, self.forest_id(rest2 + children_w)) + 1
            match = (self._dist(self.forest_id(rest1), self.forest_id(rest2))
                     + self._dist(self.forest_id(children_v), self.forest_id(children_w))
                     + (label_v != label_w))
            result = min(delete, insert, match)
        self.memo[key] = result
        return result


# ---------------------------------------------------------------------------
# BLEU reference (exact rational arithmetic)
# ---------------------------------------------------------------------------

def bleu_reference(candidate, reference) -> float:
    """Sentence BLEU with modified n-gram precision, brevity penalty and
    feasible-order truncation, computed over Fractions and converted to
    float only at the end."""
    candidate = list(candidate)
    reference = list(reference)
    assert candidate and reference
    orders = min(4, len(candidate))

    precisions: list[Fraction] = []
    for n in range(1, orders + 1):
        cand_grams: dict[tuple, int] = {}
        for i in range(len(candidate) - n + 1):
            gram = tuple(candidate[i:i + n])
            cand_grams[gram] = cand_grams.get(gram, 0) + 1
        ref_grams: dict[tuple, int] = {}
        for i in range(len(reference) - n + 1):
            gram = tuple(reference[i:i + n])
            ref_grams[gram] = ref_grams.get(gram, 0) + 1
        hits = 0
        for gram, count in cand_grams.items():
            hits += min(count, ref_grams.get(gram, 0))
        precisions.append(Fraction(hits, len(candidate) - n + 1))

    if any(p == 0 for p in precisions):
        return 0.0
    geo = math.exp(sum(math.log(float(p)) for p in precisions) / orders)
    c, r = len(candidate), len(reference)
    penalty = 1.0 if c > r else math.exp(1.0 - Fraction(r, c))
    return penalty * geo


# ---------------------------------------------------------------------------
# retrieval selection oracle (record-by-record, no template shortcuts)
# ---------------------------------------------------------------------------

def oracle_triplet(records, anchor, eq_strategy, text_score, pair_sim):
    """Apply the two-stage selection rules by exhaustive scan.

    ``text_score(a, b)`` is the text metric, ``pair_sim(a, b)`` the
    equation similarity between two records. Returns (positive_id,
    negative_id) or None when no negative template exists.
    """
    key = {r.id: " ".join(map(str, _prefix(r))) for r in records}
    anchor_key = key[anchor.id]

    if eq_strategy == "em":
        positives = [r for r in records if key[r.id] == anchor_key]
        excluded = {anchor_key}
    else:
        different_text = [r for r in records if r.tokens() != anchor.tokens()]
        if different_text:
            best = max(pair_sim(anchor, r) for r in different_text)
            positives = [r for r in different_text if pair_sim(anchor, r) == best]
        else:
            positives = [anchor]
        excluded = {key[r.id] for r in positives}
        excluded.add(anchor_key)

    negative_pool = [r for r in records if key[r.id] not in excluded and r.id != anchor.id]
    if not negative_pool:
        return None
    best_neg = max(pair_sim(anchor, r) for r in negative_pool)
    negatives = [r for r in negative_pool if pair_sim(anchor, r) == best_neg]

    pos_pool = [r for r in positives if r.id != anchor.id] or [anchor]
    low = min(text_score(anchor, r) for r in pos_pool)
    positive = min((r for r in pos_pool if text_score(anchor, r) == low), key=lambda r: r.id)
    high = max(text_score(anchor, r) for r in negatives)
    negative = min((r for r in negatives if text_score(anchor, r) == high), key=lambda r: r.id)
    return positive.id, negative.id


def _prefix(record):
    from mwpcl.equation import to_prefix

    return to_prefix(record.equation)
