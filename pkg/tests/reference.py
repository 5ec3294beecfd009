"""Independent reference implementations used as test oracles.

Everything here deliberately avoids the code paths in awepool: metrics are
computed by explicit threshold sweeps over grouped scores, statistics by
math.fsum, PCA subspaces by SVD. Slow and simple on purpose.
"""

import math

import numpy as np


def _group_by_score(scores, positives):
    """distinct score -> [n_negative, n_positive], plus class totals."""
    groups = {}
    for s, p in zip(scores, positives):
        g = groups.setdefault(float(s), [0, 0])
        g[1 if p else 0] += 1
    n_pos = sum(g[1] for g in groups.values())
    n_neg = sum(g[0] for g in groups.values())
    return groups, n_pos, n_neg


def ap_threshold_sweep(scores, positives):
    """Average precision by sweeping distinct thresholds in descending order.

    Within one threshold group all negatives are ranked ahead of the
    positives (pessimistic ordering); precision is accumulated at the rank
    of each positive.
    """
    groups, n_pos, _ = _group_by_score(scores, positives)
    assert n_pos >= 1
    rank = 0
    cum_pos = 0
    total = 0.0
    for s in sorted(groups, reverse=True):
        negs, poss = groups[s]
        rank += negs
        for _ in range(poss):
            rank += 1
            cum_pos += 1
            total += cum_pos / rank
    return total / n_pos


def auc_threshold_trapezoid(scores, positives):
    """AUC-ROC from an explicit threshold sweep plus trapezoidal integration."""
    groups, n_pos, n_neg = _group_by_score(scores, positives)
    assert n_pos >= 1 and n_neg >= 1
    fpr = [0.0]
    tpr = [0.0]
    cum_pos = 0
    cum_neg = 0
    for s in sorted(groups, reverse=True):
        negs, poss = groups[s]
        cum_pos += poss
        cum_neg += negs
        fpr.append(cum_neg / n_neg)
        tpr.append(cum_pos / n_pos)
    area = 0.0
    for k in range(1, len(fpr)):
        area += (fpr[k] - fpr[k - 1]) * (tpr[k] + tpr[k - 1]) / 2.0
    return area


def auc_pair_enumeration(scores, positives):
    """AUC-ROC by brute-force enumeration of (positive, negative) comparisons."""
    pos = [float(s) for s, p in zip(scores, positives) if p]
    neg = [float(s) for s, p in zip(scores, positives) if not p]
    assert pos and neg
    wins = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                wins += 1.0
            elif sp == sn:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def fsum_mean_std(frames):
    """Two-pass per-dimension mean and population std via math.fsum."""
    frames = [list(map(float, row)) for row in frames]
    n = len(frames)
    d = len(frames[0])
    mean = [math.fsum(row[j] for row in frames) / n for j in range(d)]
    var = [math.fsum((row[j] - mean[j]) ** 2 for row in frames) / n for j in range(d)]
    return np.array(mean), np.array([math.sqrt(v) for v in var])


def svd_topk_basis(x, k):
    """Top-k principal directions of centered data via SVD (rows of Vt)."""
    x = np.asarray(x, dtype=np.float64)
    centered = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    return vt[:k]


def subsample_indices_float(frames, n_samples):
    """Equally spaced frame indices via float round-half-away-from-zero."""
    if n_samples == 1:
        return [math.floor((frames - 1) / 2 + 0.5)]
    return [
        math.floor(i * (frames - 1) / (n_samples - 1) + 0.5) for i in range(n_samples)
    ]
