import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from l0lap.extractor import Community, DetectionResult
from l0lap.metrics import (
    UndefinedMetricError,
    benchmark_summary,
    confusion_matrix,
    jaccard_error,
    nmi,
    overlap_matrix,
)


def nmi_oracle(c, e):
    """Mutual information over the geometric-mean entropy, by direct counting."""
    n = len(c)
    pc, pe, pj = Counter(c), Counter(e), Counter(zip(c, e))
    mi = sum(v / n * math.log((v / n) / (pc[a] / n * pe[b] / n)) for (a, b), v in pj.items())
    hc = -sum(v / n * math.log(v / n) for v in pc.values())
    he = -sum(v / n * math.log(v / n) for v in pe.values())
    return mi, hc, he


def fake_result(n, groups):
    comms = [Community(members=np.asarray(g), eta=0.0, phi=1.0,
                       n_nodes=len(g), n_internal_edges=0)
             for g in groups]
    assigned = set().union(*map(set, groups)) if groups else set()
    return DetectionResult(n=n, communities=comms,
                           unassigned=np.array(sorted(set(range(n)) - assigned), dtype=np.int64))


# NMI


def test_nmi_identical_is_one():
    assert nmi([1, 1, 2, 2], [1, 1, 2, 2]) == 1.0


def test_nmi_constant_vs_nontrivial_is_zero():
    assert nmi([1, 1, 2, 2], [3, 3, 3, 3]) == 0.0
    assert nmi([3, 3, 3, 3], [1, 1, 2, 2]) == 0.0


def test_nmi_derived_value_matches_oracle():
    c, e = (1, 1, 2, 2), (1, 1, 1, 2)
    mi, hc, he = nmi_oracle(c, e)
    assert mi == pytest.approx(0.2158, abs=1e-4)
    assert hc == pytest.approx(0.6931, abs=1e-4) and he == pytest.approx(0.5623, abs=1e-4)
    assert nmi(c, e) == pytest.approx(mi / math.sqrt(hc * he), abs=1e-12)
    assert nmi(c, e) == pytest.approx(0.3456, abs=1e-3)


def test_nmi_skips_unlabelled():
    assert nmi([1, 1, 2, 2, 1], [1, 1, 2, 2, 0], unlabeled=0) == 1.0
    assert nmi([1, None, 2], [5, 6, 7]) == 1.0


def test_nmi_errors():
    with pytest.raises(UndefinedMetricError):
        nmi([1, 2], [0, 0], unlabeled=0)
    with pytest.raises(ValueError):
        nmi([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        nmi([1, 2], [1, 2], variant="x")


def test_nmi_raw_count_variant():
    assert nmi([1, 1, 2, 2], [1, 1, 2, 2], variant="raw") == pytest.approx(1.0)
    c, e = [1, 1, 2, 2, 2, 1], [1, 1, 1, 2, 2, 2]
    M = confusion_matrix(c, e).astype(float)
    rs, cs = M.sum(1), M.sum(0)
    num = sum(M[i, j] * math.log(M[i, j] / (rs[i] * cs[j]))
              for i in range(2) for j in range(2) if M[i, j])
    den = sum(M[i, j] * math.log(M[i, j]) for i in range(2) for j in range(2) if M[i, j])
    assert nmi(c, e, variant="raw") == pytest.approx(-num / den)
    with pytest.raises(UndefinedMetricError):
        nmi([1, 2, 3], [1, 2, 3], variant="raw")


labels = st.lists(st.integers(1, 4), min_size=2, max_size=40)


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_nmi_symmetric_relabel_invariant_bounded(data):
    c = data.draw(labels)
    e = data.draw(st.lists(st.integers(1, 4), min_size=len(c), max_size=len(c)))
    v = nmi(c, e)
    assert 0.0 <= v <= 1.0
    assert v == pytest.approx(nmi(e, c), abs=1e-12)
    perm = data.draw(st.permutations([1, 2, 3, 4]))
    assert v == pytest.approx(nmi([perm[x - 1] for x in c], e), abs=1e-12)
    mi, hc, he = nmi_oracle(c, e)
    if hc > 0 and he > 0:
        assert v == pytest.approx(mi / math.sqrt(hc * he), abs=1e-9)


def test_confusion_matrix_counts():
    M = confusion_matrix([1, 1, 2, 2], [1, 1, 1, 2])
    assert M.tolist() == [[2, 0], [1, 1]]


# overlap


def test_overlap_examples():
    assert overlap_matrix([{1, 2}], [{1, 2}]).tolist() == [[1.0]]
    assert overlap_matrix([{1, 2}], [{3}]).tolist() == [[0.0]]
    assert overlap_matrix([range(1, 11)], [range(6, 16)])[0, 0] == 1 / 3


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sets(st.integers(0, 20), min_size=1), min_size=1, max_size=4),
       st.lists(st.sets(st.integers(0, 20), min_size=1), min_size=1, max_size=4))
def test_overlap_bounds_and_swap_symmetry(D, T):
    O = overlap_matrix(D, T)
    assert O.shape == (len(D), len(T))
    assert np.all((O >= 0) & (O <= 1))
    assert np.array_equal(overlap_matrix(T, D), O.T)


def test_jaccard_error():
    assert jaccard_error({1, 2, 3}, {1, 2, 3}) == 0.0
    assert jaccard_error({1, 2}, {3}) == 1.0
    assert jaccard_error({1, 2, 3}, {2, 3, 4}) == 0.5


# benchmark summary


def test_summary_single_perfect_run():
    truth = np.array([1, 1, 1, 2, 2, 2])
    row = benchmark_summary([(fake_result(6, [[0, 1, 2], [3, 4, 5]]), truth)])
    assert row.mean_nmi == 1.0 and row.mean_cn == 2 and row.replicates == 1
    assert row.sd_nmi == 0.0


def test_summary_mean_of_one_and_zero():
    truth = np.array([1, 1, 2, 2])
    good = fake_result(4, [[0, 1], [2, 3]])
    flat = fake_result(4, [[0, 1, 2, 3]])
    row = benchmark_summary([(good, truth), (flat, truth)])
    assert row.mean_nmi == 0.5 and row.mean_cn == 1.5


def test_summary_ignores_unassigned_and_counts_outlier_block():
    truth = np.array([1, 1, 1, 2, 2, 2, 3, 3])
    res = fake_result(8, [[0, 1, 2], [3, 4, 5]])
    row = benchmark_summary([(res, truth)])
    assert row.mean_nmi == 1.0
    # all unassigned counts as zero agreement
    assert benchmark_summary([(fake_result(8, []), truth)]).mean_nmi == 0.0


def test_summary_requires_runs():
    with pytest.raises(ValueError):
        benchmark_summary([])


def test_nmi_constant_side_exact_for_many_sizes():
    # marginals must not pick up rounding that makes a single label look informative
    for n in range(2, 300):
        c = [i % 3 for i in range(n)]
        assert nmi(c, [1] * n) == (1.0 if n < 2 or len(set(c)) == 1 else 0.0)
