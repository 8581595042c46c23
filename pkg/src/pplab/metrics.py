"""Classification metrics over raw scores: AUC, accuracy at equal error
rate, and repetition confidence intervals."""
from __future__ import annotations

import math

import numpy as np


class MetricsError(ValueError):
    pass


def _split(scores) -> tuple[np.ndarray, np.ndarray]:
    cases = np.asarray([s for s, c in scores if c], dtype=np.float64)
    controls = np.asarray([s for s, c in scores if not c], dtype=np.float64)
    if len(cases) == 0 or len(controls) == 0:
        raise MetricsError("both classes must be present")
    return cases, controls


def auc(scores) -> float:
    """P(random case score > random control score), ties 0.5
    (Mann-Whitney rank formulation). scores: iterable of (score, is_case)."""
    cases, controls = _split(scores)
    allv = np.concatenate([cases, controls])
    order = np.argsort(allv, kind="mergesort")
    ranks = np.empty(len(allv), dtype=np.float64)
    i = 0
    sorted_v = allv[order]
    while i < len(allv):
        j = i
        while j + 1 < len(allv) and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    n1, n0 = len(cases), len(controls)
    u = ranks[:n1].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def acc_eer(scores) -> tuple[float, float]:
    """Accuracy at the equal-error-rate threshold.

    Sweeps thresholds at midpoints between adjacent distinct scores (plus
    sentinels past both ends), predicting case when score > threshold;
    picks the threshold minimizing |FPR - FNR|, lower threshold on ties.
    Returns (accuracy, threshold).
    """
    cases, controls = _split(scores)
    distinct = np.unique(np.concatenate([cases, controls]))
    span = max(1.0, float(distinct[-1] - distinct[0]))
    thresholds = [float(distinct[0]) - span]
    thresholds += [float((a + b) / 2.0) for a, b in zip(distinct[:-1], distinct[1:])]
    thresholds += [float(distinct[-1]) + span]
    best = None
    n1, n0 = len(cases), len(controls)
    for th in thresholds:
        fn = int((cases <= th).sum())
        fp = int((controls > th).sum())
        gap = abs(fp / n0 - fn / n1)
        acc = (n1 - fn + n0 - fp) / (n1 + n0)
        if best is None or gap < best[0]:
            best = (gap, acc, th)
    return best[1], best[2]


def confidence_interval(values) -> tuple[float, float]:
    """Normal-approximation 95% CI over repetition means:
    mean +/- 1.96 * sd / sqrt(n)."""
    vals = np.asarray(list(values), dtype=np.float64)
    if len(vals) < 2:
        raise MetricsError("need at least 2 values for a confidence interval")
    mean = float(vals.mean())
    sd = float(vals.std(ddof=1))
    return mean, 1.96 * sd / math.sqrt(len(vals))
