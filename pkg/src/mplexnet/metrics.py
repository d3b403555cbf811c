"""One-vs-rest AU-ROC, class-weighted averages, and the DeLong test.

AU-ROC is the exact Mann-Whitney statistic computed from midranks
(ties count one half). The DeLong test compares two correlated AUCs via
per-positive and per-negative placement values and a two-sided normal
p-value on the difference.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


class UndefinedAucError(ValueError):
    pass


class DegenerateVarianceError(ValueError):
    pass


def auroc(scores, labels):
    """P(score+ > score-) + 0.5 * P(tie), exact over all pos/neg pairs."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAucError(
            f"AUC undefined: {n_pos} positives and {n_neg} negatives"
        )
    ranks = rankdata(scores)
    return (ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _placements(scores, labels):
    """Per-positive and per-negative placement values (DeLong V10, V01)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    m, n = pos.size, neg.size
    v10 = np.empty(m)
    for r, s in enumerate(pos):
        v10[r] = (np.sum(s > neg) + 0.5 * np.sum(s == neg)) / n
    v01 = np.empty(n)
    for c, s in enumerate(neg):
        v01[c] = (np.sum(pos > s) + 0.5 * np.sum(pos == s)) / m
    return v10, v01


def delong_test(scores_a, scores_b, labels):
    """Compare two correlated AUCs; returns (auc_a, auc_b, p_value)."""
    scores_a = np.asarray(scores_a, dtype=np.float64)
    scores_b = np.asarray(scores_b, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    if scores_a.shape != scores_b.shape or scores_a.shape != labels.shape:
        raise ValueError("scores_a, scores_b, labels must have identical length")
    if labels.size < 4:
        raise ValueError(f"need at least 4 samples, got {labels.size}")
    auc_a = auroc(scores_a, labels)
    auc_b = auroc(scores_b, labels)
    v10a, v01a = _placements(scores_a, labels)
    v10b, v01b = _placements(scores_b, labels)
    m, n = v10a.size, v01a.size
    # covariance of (auc_a, auc_b) from placement-value sample covariances
    s10 = np.cov(np.vstack([v10a, v10b]), ddof=1) if m > 1 else np.zeros((2, 2))
    s01 = np.cov(np.vstack([v01a, v01b]), ddof=1) if n > 1 else np.zeros((2, 2))
    cov = s10 / m + s01 / n
    var_diff = cov[0, 0] + cov[1, 1] - 2.0 * cov[0, 1]
    if var_diff <= 0.0:
        if auc_a == auc_b:
            return auc_a, auc_b, 1.0
        raise DegenerateVarianceError(
            f"zero variance of the AUC difference with auc_a={auc_a} != auc_b={auc_b}"
        )
    z = (auc_a - auc_b) / math.sqrt(var_diff)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return auc_a, auc_b, max(p, np.finfo(float).tiny)


@dataclass
class EvalReport:
    per_class_auc: list  # NaN where a class is absent
    weighted_auc: float
    class_counts: list
    delong_pvalues: dict  # (baseline_name, class) -> p


def per_class_report(score_matrix, labels, baseline_scores=None):
    """One-vs-rest AUC per class and the class-support-weighted average.

    Absent classes get NaN AUC (with a warning) and are excluded from the
    weighted average. ``baseline_scores`` maps a name to another N x C
    score matrix; each present class then gets a DeLong p-value against it.
    """
    scores = np.asarray(score_matrix, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    n, c = scores.shape
    aucs = []
    counts = []
    for cls in range(c):
        binary = (labels == cls).astype(int)
        counts.append(int(binary.sum()))
        if binary.sum() == 0 or binary.sum() == n:
            warnings.warn(f"class {cls} absent or exhaustive; AUC undefined")
            aucs.append(float("nan"))
        else:
            aucs.append(auroc(scores[:, cls], binary))
    weighted = weighted_average(aucs, counts)
    pvalues = {}
    if baseline_scores:
        for name, other in baseline_scores.items():
            other = np.asarray(other, dtype=np.float64)
            for cls in range(c):
                if np.isnan(aucs[cls]):
                    continue
                binary = (labels == cls).astype(int)
                _, _, p = delong_test(scores[:, cls], other[:, cls], binary)
                pvalues[(name, cls)] = p
    return EvalReport(
        per_class_auc=aucs,
        weighted_auc=weighted,
        class_counts=counts,
        delong_pvalues=pvalues,
    )


def weighted_average(aucs, counts):
    num = 0.0
    den = 0
    for a, cnt in zip(aucs, counts):
        if not np.isnan(a):
            num += a * cnt
            den += cnt
    return num / den if den else float("nan")


def weighted_auc_or_nan(score_matrix, labels):
    """Weighted AUC that tolerates absent classes (returns NaN if all absent)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            return per_class_report(score_matrix, labels).weighted_auc
        except UndefinedAucError:
            return float("nan")
