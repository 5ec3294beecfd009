"""Same-different word discrimination over an embedding set.

Every unordered pair of items is scored by cosine similarity and labeled
positive when the two items share a word-type label. The ranked pair list
yields average precision (area under the precision-recall curve, with a
pessimistic tie policy) and AUC-ROC (Mann-Whitney statistic, ties 0.5).

Scoring normalizes all vectors once and then computes, for each item i, the
inner products against items j > i with a single matrix-vector product. That
call is identical for a given i no matter how rows are batched into blocks
or spread over workers, so scores are bitwise-reproducible across block
sizes and worker counts (plain blocked GEMM is not: BLAS kernels pick
different accumulation orders for different operand shapes).

For very large sets the pair list is not materialized: scores are quantized
into 2^16 buckets over [-1, 1] (quantization error <= 2^-15 per score) and
both metrics are computed from the per-bucket positive/negative counts.
"""

from __future__ import annotations

import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.special
import scipy.stats

from .embed import EmbeddingSet
from .errors import ShapeMismatchError, UndefinedMetricError

# Below this norm an embedding is treated as zero and scores 0 against
# everything instead of propagating NaNs.
ZERO_NORM_THRESHOLD = 1e-12

HISTOGRAM_BINS = 1 << 16

# evaluate(mode="auto") switches to the histogram path above this item count
# (~5e7 pairs, the point where the pair list stops fitting comfortably).
HISTOGRAM_AUTO_ITEMS = 12_000

DEFAULT_BLOCK_SIZE = 256


@dataclass
class ScoredPairs:
    """All n*(n-1)/2 unordered pair scores with same-type labels."""

    scores: np.ndarray
    positives: np.ndarray
    n_items: int
    n_zero_norm: int = 0

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.positives = np.asarray(self.positives, dtype=bool)
        expected = self.n_items * (self.n_items - 1) // 2
        if self.scores.shape != (expected,) or self.positives.shape != (expected,):
            raise ShapeMismatchError(
                f"expected {expected} pairs for {self.n_items} items, got "
                f"{self.scores.shape[0]} scores and {self.positives.shape[0]} labels"
            )

    def __len__(self):
        return self.scores.shape[0]

    @property
    def n_positive(self) -> int:
        return int(self.positives.sum())

    @property
    def n_negative(self) -> int:
        return len(self) - self.n_positive


@dataclass
class SameDiffResult:
    """Metrics and counts for one same-different evaluation."""

    average_precision: float
    auc_roc: float
    n_items: int
    n_positive: int
    n_negative: int
    n_zero_norm: int = 0
    wall_time_s: float = 0.0

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {
            "average_precision": self.average_precision,
            "auc_roc": self.auc_roc,
            "n_items": self.n_items,
            "n_positive": self.n_positive,
            "n_negative": self.n_negative,
            "n_zero_norm": self.n_zero_norm,
        }
        if include_timing:
            d["wall_time_s"] = self.wall_time_s
        return d


def cosine_similarity(u, v) -> float:
    """Cosine of the angle between two vectors; 0.0 if either norm is ~zero."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape or u.size < 1:
        raise ShapeMismatchError(f"vector lengths differ: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu < ZERO_NORM_THRESHOLD or nv < ZERO_NORM_THRESHOLD:
        return 0.0
    return float(u @ v / (nu * nv))


def _normalized_vectors(embeddings: EmbeddingSet):
    """Unit-normalize in float64; near-zero rows become exact zero vectors."""
    x = np.ascontiguousarray(embeddings.vectors, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    zero = norms < ZERO_NORM_THRESHOLD
    safe = np.where(zero, 1.0, norms)
    xn = x / safe[:, None]
    xn[zero] = 0.0
    return xn, int(zero.sum())


def _label_codes(labels) -> np.ndarray:
    _, codes = np.unique(np.asarray(labels), return_inverse=True)
    return codes


def _row_blocks(n: int, block_size: int):
    block_size = max(1, int(block_size))
    return [(r0, min(r0 + block_size, n)) for r0 in range(0, n, block_size)]


def _run_blocks(work, blocks, workers: int):
    if workers <= 1:
        for b in blocks:
            work(b)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, blocks))


def pairwise_scores(
    embeddings: EmbeddingSet,
    block_size: int = DEFAULT_BLOCK_SIZE,
    workers: int = 1,
) -> ScoredPairs:
    """Score all unordered pairs by cosine similarity.

    Pairs are ordered (i, j) with i < j, row-major. ``block_size`` batches
    rows per task and ``workers`` runs tasks on a thread pool; neither
    affects the scores bitwise.
    """
    n = len(embeddings)
    if n < 2:
        raise ValueError(f"need at least 2 items to form pairs, got {n}")
    xn, n_zero = _normalized_vectors(embeddings)
    codes = _label_codes(embeddings.labels)
    offsets = _pair_offsets(n)
    scores = np.empty(offsets[-1], dtype=np.float64)
    positives = np.empty(offsets[-1], dtype=bool)

    def work(block):
        r0, r1 = block
        for i in range(r0, min(r1, n - 1)):
            scores[offsets[i] : offsets[i + 1]] = xn[i + 1 :] @ xn[i]
            positives[offsets[i] : offsets[i + 1]] = codes[i + 1 :] == codes[i]

    _run_blocks(work, _row_blocks(n, block_size), workers)
    return ScoredPairs(scores=scores, positives=positives, n_items=n, n_zero_norm=n_zero)


def _pair_offsets(n: int) -> np.ndarray:
    counts = np.arange(n - 1, -1, -1, dtype=np.int64)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return offsets


def average_precision(pairs: ScoredPairs) -> float:
    """AP over the similarity-ranked pair list.

    Pairs are ranked by score descending; within equal scores negatives
    precede positives (pessimistic policy), so the value is deterministic
    and independent of input order. AP is the mean of precision at the rank
    of each positive.
    """
    n_pos = pairs.n_positive
    if n_pos < 1:
        raise UndefinedMetricError("average precision is undefined without positive pairs")
    order = np.lexsort((pairs.positives, -pairs.scores))
    ranked_pos = pairs.positives[order]
    cum_pos = np.cumsum(ranked_pos)
    ranks = np.arange(1, len(ranked_pos) + 1)
    return float((cum_pos[ranked_pos] / ranks[ranked_pos]).sum() / n_pos)


def auc_roc(pairs: ScoredPairs) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) with ties counted 0.5."""
    n_pos = pairs.n_positive
    n_neg = pairs.n_negative
    if n_pos < 1 or n_neg < 1:
        raise UndefinedMetricError(
            f"AUC-ROC needs both classes, got {n_pos} positive / {n_neg} negative pairs"
        )
    ranks = scipy.stats.rankdata(pairs.scores)
    rank_sum = float(ranks[pairs.positives].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _check_has_positives(n_positive: int, labels) -> None:
    if n_positive >= 1:
        return
    common = Counter(labels).most_common(5)
    summary = ", ".join(f"'{w}' x{c}" for w, c in common)
    raise UndefinedMetricError(
        f"no positive pairs: all {len(labels)} labels are distinct "
        f"(most common: {summary})"
    )


def evaluate(
    embeddings: EmbeddingSet,
    block_size: int = DEFAULT_BLOCK_SIZE,
    workers: int = 1,
    mode: str = "auto",
) -> SameDiffResult:
    """Full same-different evaluation of an embedding set.

    mode "exact" materializes the pair list; "histogram" streams pair scores
    into 2^16 buckets (documented quantization error <= 2^-15 per score);
    "auto" picks histogram above HISTOGRAM_AUTO_ITEMS items.
    """
    if mode not in ("auto", "exact", "histogram"):
        raise ValueError(f"unknown mode '{mode}'")
    n = len(embeddings)
    if n < 2:
        raise ValueError(f"need at least 2 items to evaluate, got {n}")
    if mode == "auto":
        mode = "histogram" if n > HISTOGRAM_AUTO_ITEMS else "exact"
    t0 = time.perf_counter()
    if mode == "exact":
        pairs = pairwise_scores(embeddings, block_size=block_size, workers=workers)
        _check_has_positives(pairs.n_positive, embeddings.labels)
        ap = average_precision(pairs)
        auc = auc_roc(pairs)
        n_pos, n_neg, n_zero = pairs.n_positive, pairs.n_negative, pairs.n_zero_norm
    else:
        pos_hist, neg_hist, n_zero = histogram_scores(
            embeddings, block_size=block_size, workers=workers
        )
        n_pos = int(pos_hist.sum())
        n_neg = int(neg_hist.sum())
        _check_has_positives(n_pos, embeddings.labels)
        if n_neg < 1:
            raise UndefinedMetricError(
                f"AUC-ROC needs both classes, got {n_pos} positive / 0 negative pairs"
            )
        ap = _average_precision_from_histogram(pos_hist, neg_hist)
        auc = _auc_from_histogram(pos_hist, neg_hist)
    return SameDiffResult(
        average_precision=ap,
        auc_roc=auc,
        n_items=n,
        n_positive=n_pos,
        n_negative=n_neg,
        n_zero_norm=n_zero,
        wall_time_s=time.perf_counter() - t0,
    )


def histogram_scores(
    embeddings: EmbeddingSet,
    bins: int = HISTOGRAM_BINS,
    block_size: int = DEFAULT_BLOCK_SIZE,
    workers: int = 1,
):
    """Bucketed pair counts without materializing the pair list.

    Returns (positive histogram, negative histogram, zero-norm count); bucket
    b covers scores in [-1 + 2b/bins, -1 + 2(b+1)/bins). Integer counts merge
    exactly, so the result is independent of block size and worker count.
    """
    n = len(embeddings)
    if n < 2:
        raise ValueError(f"need at least 2 items to form pairs, got {n}")
    xn, n_zero = _normalized_vectors(embeddings)
    codes = _label_codes(embeddings.labels)
    blocks = _row_blocks(n, block_size)
    partial = [None] * len(blocks)

    def work(item):
        b, (r0, r1) = item
        pos_h = np.zeros(bins, dtype=np.int64)
        neg_h = np.zeros(bins, dtype=np.int64)
        for i in range(r0, min(r1, n - 1)):
            s = xn[i + 1 :] @ xn[i]
            idx = _bucketize(s, bins)
            pos = codes[i + 1 :] == codes[i]
            pos_h += np.bincount(idx[pos], minlength=bins)
            neg_h += np.bincount(idx[~pos], minlength=bins)
        partial[b] = (pos_h, neg_h)

    _run_blocks(work, list(enumerate(blocks)), workers)
    pos_hist = np.zeros(bins, dtype=np.int64)
    neg_hist = np.zeros(bins, dtype=np.int64)
    for pos_h, neg_h in partial:
        pos_hist += pos_h
        neg_hist += neg_h
    return pos_hist, neg_hist, n_zero


def _bucketize(scores: np.ndarray, bins: int) -> np.ndarray:
    idx = np.floor((np.clip(scores, -1.0, 1.0) + 1.0) * (bins / 2.0)).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def _average_precision_from_histogram(pos_hist, neg_hist) -> float:
    # Iterate buckets from high score to low; within a bucket negatives come
    # first (pessimistic). The precision sum over the P positives of a bucket
    # is P + (a - b) * (H_{b+P} - H_b) with a = positives above, b = pairs
    # above plus this bucket's negatives; harmonic numbers via digamma.
    pos = pos_hist[::-1].astype(np.float64)
    neg = neg_hist[::-1].astype(np.float64)
    n_pos = pos.sum()
    pos_above = np.cumsum(pos) - pos
    rank_above = np.cumsum(pos + neg) - (pos + neg)
    has = pos > 0
    a = pos_above[has]
    b = rank_above[has] + neg[has]
    p = pos[has]
    contrib = p + (a - b) * (scipy.special.digamma(b + p + 1.0) - scipy.special.digamma(b + 1.0))
    return float(contrib.sum() / n_pos)


def _auc_from_histogram(pos_hist, neg_hist) -> float:
    pos = pos_hist.astype(np.float64)
    neg = neg_hist.astype(np.float64)
    neg_below = np.cumsum(neg) - neg
    wins = (pos * (neg_below + 0.5 * neg)).sum()
    return float(wins / (pos.sum() * neg.sum()))


def roc_points(pairs: ScoredPairs):
    """ROC sweep: one row per distinct threshold, descending.

    Returns (thresholds, fpr, tpr) where row k counts pairs with
    score >= thresholds[k] as predicted-same.
    """
    n_pos = pairs.n_positive
    n_neg = pairs.n_negative
    if n_pos < 1 or n_neg < 1:
        raise UndefinedMetricError("ROC curve needs both classes")
    order = np.argsort(-pairs.scores, kind="stable")
    scores = pairs.scores[order]
    pos = pairs.positives[order].astype(np.int64)
    cum_pos = np.cumsum(pos)
    cum_neg = np.cumsum(1 - pos)
    last = np.nonzero(np.diff(scores, append=np.nan))[0]  # last index of each tie group
    return scores[last], cum_neg[last] / n_neg, cum_pos[last] / n_pos


def pr_points(pairs: ScoredPairs):
    """Precision-recall sweep: one row per distinct threshold, descending."""
    n_pos = pairs.n_positive
    if n_pos < 1:
        raise UndefinedMetricError("PR curve needs positive pairs")
    order = np.argsort(-pairs.scores, kind="stable")
    scores = pairs.scores[order]
    pos = pairs.positives[order].astype(np.int64)
    cum_pos = np.cumsum(pos)
    ranks = np.arange(1, len(scores) + 1)
    last = np.nonzero(np.diff(scores, append=np.nan))[0]
    return scores[last], cum_pos[last] / ranks[last], cum_pos[last] / n_pos
