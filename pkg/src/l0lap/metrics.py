"""Agreement between detected and true partitions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class UndefinedMetricError(ValueError):
    """Raised when no node carries a label in both partitions."""


def confusion_matrix(c, e, unlabeled=None) -> np.ndarray:
    """Contingency table over nodes labelled in both ``c`` and ``e``.

    Entries equal to ``unlabeled`` (e.g. 0 or None) in either vector are
    skipped.
    """
    c = np.asarray(c, dtype=object)
    e = np.asarray(e, dtype=object)
    if c.shape != e.shape:
        raise ValueError(f"label vectors differ in length: {c.shape} vs {e.shape}")
    mask = np.array([a is not None and b is not None and a != unlabeled and b != unlabeled
                     for a, b in zip(c, e)], dtype=bool) if c.size else np.zeros(0, bool)
    if not mask.any():
        raise UndefinedMetricError("no node is labelled in both partitions")
    _, ci = np.unique(c[mask].astype(str), return_inverse=True)
    _, ei = np.unique(e[mask].astype(str), return_inverse=True)
    M = np.zeros((ci.max() + 1, ei.max() + 1), dtype=np.int64)
    np.add.at(M, (ci, ei), 1)
    return M


def _xlogx(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log(x[pos])
    return out


def nmi(c, e, variant: str = "standard", unlabeled=None) -> float:
    """Normalized mutual information between two labelings.

    ``variant="standard"`` divides the mutual information by the geometric
    mean of the two entropies. ``variant="raw"`` evaluates
    ``-sum M log(M / (M_i+ M_+j)) / sum M log M`` on raw counts, which is not
    confined to ``[0, 1]``.
    """
    M = confusion_matrix(c, e, unlabeled)
    if variant == "raw":
        denom = _xlogx(M).sum()
        if denom == 0:
            raise UndefinedMetricError("raw-count NMI denominator is zero (all cells <= 1)")
        rs, cs = M.sum(1), M.sum(0)
        nz = M > 0
        num = (M[nz] * np.log(M[nz] / np.outer(rs, cs)[nz])).sum()
        return float(-num / denom)
    if variant != "standard":
        raise ValueError(f"unknown NMI variant {variant!r}")
    N = M.sum()
    rs, cs = M.sum(1), M.sum(0)
    # a single label on either side has zero entropy
    if rs.size == 1 or cs.size == 1:
        return 1.0 if rs.size == cs.size else 0.0
    # marginals from integer counts so they sum to exactly 1
    p = M / N
    pr, pc = rs / N, cs / N
    h_r = -_xlogx(pr).sum()
    h_c = -_xlogx(pc).sum()
    nz = p > 0
    mi = float((p[nz] * np.log(p[nz] / np.outer(pr, pc)[nz])).sum())
    return float(min(1.0, max(0.0, mi / math.sqrt(h_r * h_c))))


def overlap_matrix(detected, truth) -> np.ndarray:
    """Jaccard overlap ``|D_i & T_j| / |D_i | T_j|`` for every pair of sets."""
    D = [set(d) for d in detected]
    T = [set(t) for t in truth]
    out = np.zeros((len(D), len(T)))
    for i, d in enumerate(D):
        for j, t in enumerate(T):
            union = len(d | t)
            out[i, j] = len(d & t) / union if union else 0.0
    return out


def jaccard_error(s, g) -> float:
    """Symmetric-difference error ``|S ^ G| / |S | G|`` (0 for two empty sets)."""
    s, g = set(s), set(g)
    union = s | g
    return len(s ^ g) / len(union) if union else 0.0


@dataclass
class BenchmarkRow:
    mean_nmi: float
    sd_nmi: float
    mean_cn: float
    replicates: int


def detected_labels(result) -> np.ndarray:
    """Per-node labels of kept communities, 0 for unassigned nodes."""
    return result.labels()


def benchmark_summary(runs) -> BenchmarkRow:
    """Mean and sd of standard NMI and mean kept-community count over runs.

    Each run is ``(DetectionResult, truth_labels)``. Unassigned nodes are
    dropped from the NMI; every truth label, including an outlier block,
    counts as its own community.
    """
    runs = list(runs)
    if not runs:
        raise ValueError("benchmark_summary needs at least one run")
    vals, counts = [], []
    for result, truth in runs:
        truth = np.asarray(truth)
        det = detected_labels(result)
        keep = det != 0
        try:
            if not keep.any():
                raise UndefinedMetricError("every node is unassigned")
            vals.append(nmi(truth[keep], det[keep]))
        except UndefinedMetricError:
            vals.append(0.0)
        counts.append(len(result.kept))
    vals = np.asarray(vals)
    sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
    return BenchmarkRow(float(vals.mean()), sd, float(np.mean(counts)), len(runs))
