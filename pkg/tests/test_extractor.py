import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from l0lap.extractor import (
    DetectionConfig,
    DetectionResult,
    binom_log_upper,
    binom_tail,
    detect,
    eta_grid,
    extract_all,
    log_pvalue,
    permutation_filter,
    random_graph_fixed_edges,
    shrunk_phi,
    tune_eta,
)
from l0lap.graph import Graph, GraphError, phi
from l0lap.models import fixed_size_sample

mpmath.mp.dps = 50


def tail_oracle(m, E, p):
    T = m * (m - 1) // 2
    p = mpmath.mpf(p)
    return sum(mpmath.binomial(T, i) * p**i * (1 - p) ** (T - i) for i in range(E + 1))


def upper_oracle(m, E, p):
    T = m * (m - 1) // 2
    p = mpmath.mpf(p)
    return sum(mpmath.binomial(T, i) * p**i * (1 - p) ** (T - i) for i in range(E + 1, T + 1))


def cliques(*sizes, bridges=()):
    n = sum(sizes)
    A = np.zeros((n, n), dtype=bool)
    start = 0
    for s in sizes:
        A[start:start + s, start:start + s] = True
        start += s
    for i, j in bridges:
        A[i, j] = A[j, i] = True
    np.fill_diagonal(A, False)
    return Graph.from_adjacency(A)


# config and grid


def test_config_validation():
    for bad in (dict(c_grid=0), dict(n_perm=0), dict(alpha=0), dict(alpha=1),
                dict(m_small=1), dict(b_grid=0), dict(selection="x"),
                dict(null_statistic="x"), dict(prior_pairs=-1)):
        with pytest.raises(ValueError):
            DetectionConfig(**bad)


def test_eta_grid():
    grid = eta_grid(50, DetectionConfig())
    assert grid.size == 11 and grid[0] == 0
    assert np.allclose(np.diff(grid), 1 / 50)
    assert eta_grid(10, DetectionConfig(c_grid=3, b_grid=2.0)).tolist() == pytest.approx(
        [0, 0.2, 0.4, 0.6])


# binomial tail


def test_binom_tail_examples():
    assert binom_tail(2, 0, 0.5) == pytest.approx(0.5, abs=1e-15)
    assert binom_tail(3, 3, 0.37) == 1.0
    assert binom_tail(3, 1, 0.1) == pytest.approx(0.972, abs=1e-12)


def test_binom_tail_matches_high_precision_oracle():
    for m in range(2, 31):
        T = m * (m - 1) // 2
        for p in (0.01, 0.1, 0.5):
            for E in sorted({0, 1, T // 4, T // 2, T - 1}):
                ref = float(tail_oracle(m, E, p))
                assert abs(binom_tail(m, E, p) - ref) < 1e-12
            assert binom_tail(m, T, p) == 1.0


def test_log_upper_matches_oracle_in_far_tail():
    for m, E, p in [(10, 30, 0.05), (25, 200, 0.1), (30, 400, 0.01), (8, 27, 0.5)]:
        ref = upper_oracle(m, E, p)
        assert binom_log_upper(m, E, p) == pytest.approx(float(mpmath.log(ref)), rel=1e-10)
    assert binom_log_upper(5, 10, 0.3) == -math.inf
    assert log_pvalue(5, 0, 0.3) == 0.0


def test_binom_tail_degenerate_densities():
    assert binom_tail(4, 2, 0.0) == 1.0
    assert binom_tail(4, 2, 1.0) == 0.0


def test_binom_tail_domain_errors():
    for args in ((1, 0, 0.5), (3, -1, 0.5), (3, 1, 1.5), (3, 1, float("nan"))):
        with pytest.raises(ValueError):
            binom_tail(*args)


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 30), st.floats(0.001, 0.999), st.data())
def test_binom_tail_monotone(m, p, data):
    T = m * (m - 1) // 2
    E = data.draw(st.integers(0, T - 1))
    assert binom_tail(m, E, p) <= binom_tail(m, E + 1, p) + 1e-15
    q = min(0.999, p + data.draw(st.floats(0.0, 0.5)))
    assert binom_tail(m, E, q) <= binom_tail(m, E, p) + 1e-15


# null graphs


def test_random_graph_fixed_edges():
    rng = np.random.default_rng(0)
    g = random_graph_fixed_edges(30, 100, rng)
    assert g.n == 30 and g.n_edges == 100
    g = random_graph_fixed_edges(5, 10, rng)
    assert g.n_edges == 10


def test_random_graph_fixed_edges_uniform_pairs():
    # every pair is equally likely: compare pair counts to their mean
    rng = np.random.default_rng(1)
    counts = np.zeros((6, 6))
    for _ in range(3000):
        counts += random_graph_fixed_edges(6, 5, rng).to_dense()
    pair = counts[np.triu_indices(6, 1)]
    expect = 3000 * 5 / 15
    sd = math.sqrt(expect * (1 - 5 / 15))
    assert np.all(np.abs(pair - expect) < 5 * sd)


# tuning and peeling


def test_tune_eta_two_cliques_bridge():
    g = cliques(8, 8, bridges=[(7, 8)])
    eta, out, score = tune_eta(g)
    members = set(out.support.tolist())
    assert members in ({*range(8)}, {*range(8, 16)})
    assert score >= 0.9


def test_tune_eta_triangle_and_complete_graph():
    _, out, score = tune_eta(cliques(3))
    assert out.support.tolist() == [0, 1, 2] and score == 1.0
    _, out, score = tune_eta(cliques(20))
    assert out.support.size == 20 and score == 1.0


def test_tune_eta_requires_edges():
    with pytest.raises(GraphError):
        tune_eta(Graph.from_edges(3, []))


def test_tune_eta_selection_modes_run():
    # unequal sizes: a mirror-symmetric graph never leaves the uniform start's
    # symmetric subspace
    g = cliques(6, 7, bridges=[(0, 6)])
    for sel in ("shrunk", "phi", "tail"):
        _, out, _ = tune_eta(g, DetectionConfig(selection=sel))
        assert out.support.size in (6, 7)


def test_extract_two_disjoint_triangles():
    r = extract_all(cliques(3, 3))
    assert sorted(c.members.tolist() for c in r.communities) == [[0, 1, 2], [3, 4, 5]]
    assert r.unassigned.size == 0


def test_extract_star_hub_first():
    g = Graph.from_edges(6, [(0, i) for i in range(1, 6)])
    r = extract_all(g)
    assert 0 in r.communities[0].members
    covered = set().union(*(set(c.members.tolist()) for c in r.communities))
    assert covered | set(r.unassigned.tolist()) == set(range(6))


def test_extract_empty_graph():
    r = extract_all(Graph.from_edges(5, []))
    assert r.communities == [] and r.unassigned.tolist() == [0, 1, 2, 3, 4]


def test_isolated_nodes_unassigned():
    g = Graph.from_edges(7, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    r = detect(g)
    assert 6 in r.unassigned.tolist()
    assert r.status()[6] == "unassigned"


def test_peeling_disjoint_and_shrinking():
    net = fixed_size_sample([30, 30], np.array([[0.4, 0.05], [0.05, 0.4]]), seed=2)
    g = net.graph
    r = extract_all(g)
    seen = set()
    remaining = g.n_edges
    for c in r.communities:
        m = set(c.members.tolist())
        assert not (m & seen)
        seen |= m
        assert c.n_internal_edges <= c.n_nodes * (c.n_nodes - 1) // 2
        left = np.setdiff1d(np.arange(g.n), sorted(seen))
        now = g.subgraph(left).n_edges if left.size else 0
        assert now < remaining
        remaining = now


def test_result_partition_invariant():
    net = fixed_size_sample([15, 15, 15], np.array([[0.6, 0.05, 0.05], [0.05, 0.6, 0.05],
                                                    [0.05, 0.05, 0.6]]), seed=4)
    r = detect(net.graph, DetectionConfig(n_perm=20))
    kept = [set(c.members.tolist()) for c in r.kept]
    for i in range(len(kept)):
        for j in range(i + 1, len(kept)):
            assert not kept[i] & kept[j]
    status = r.status()
    for i in range(net.graph.n):
        assert (status[i] == "kept") != (i in set(r.unassigned.tolist()))


# permutation filter


def test_filter_exempts_large_communities():
    g = cliques(25, 30, bridges=[(0, 25)])
    base = extract_all(g)
    out = permutation_filter(g, base, DetectionConfig(n_perm=5))
    assert [c.kept for c in out.communities] == [True, True]
    assert all(c.perm_pvalue is None for c in out.communities)
    assert out.unassigned.tolist() == base.unassigned.tolist()


def test_filter_two_ten_cliques_kept():
    r = detect(cliques(10, 10))
    assert len(r.kept) == 2 and r.unassigned.size == 0


def test_filter_skips_when_null_graph_has_no_edges():
    g = cliques(3, 3)
    base = extract_all(g)
    # small communities with no edges between them: the union still has edges,
    # so fabricate a result whose small communities are single edges' endpoints
    res = DetectionResult(g.n, base.communities, base.unassigned)
    out = permutation_filter(g, res, DetectionConfig(n_perm=10))
    assert all(c.perm_pvalue is not None for c in out.communities)


def test_filter_sparse_small_communities_diagnostic(caplog):
    g = Graph.from_edges(4, [(0, 1), (2, 3)])
    base = extract_all(g)
    out = permutation_filter(g, base, DetectionConfig(n_perm=10))
    assert out.filtered


def test_filter_is_threshold_monotone():
    net = fixed_size_sample([12, 12, 12], np.array([[0.6, 0.05, 0.05], [0.05, 0.6, 0.05],
                                                    [0.05, 0.05, 0.6]]), seed=8)
    g = net.graph
    base = extract_all(g)
    hi = permutation_filter(g, base, DetectionConfig(n_perm=30, alpha=0.2))
    lo = permutation_filter(g, base, DetectionConfig(n_perm=30, alpha=0.05))
    for a, b in zip(hi.communities, lo.communities):
        assert a.perm_pvalue == b.perm_pvalue
        assert not (b.kept and not a.kept)


def test_filter_planted_small_communities():
    hits = 0
    P = np.full((3, 3), 0.02) + np.eye(3) * 0.68
    for seed in range(20):
        net = fixed_size_sample([15, 15, 15], P, seed=300 + seed)
        r = detect(net.graph, DetectionConfig(seed=seed, n_perm=50))
        truth = [set(range(15 * k, 15 * k + 15)) for k in range(3)]
        got = [set(c.members.tolist()) for c in r.kept]
        hits += all(any(len(t & s) >= 12 for s in got) for t in truth)
    assert hits >= 16


def test_detect_reproducible_and_thread_independent():
    net = fixed_size_sample([12, 12, 12], np.array([[0.5, 0.05, 0.05], [0.05, 0.5, 0.05],
                                                    [0.05, 0.05, 0.5]]), seed=5)
    a = detect(net.graph, DetectionConfig(seed=3, n_perm=20))
    b = detect(net.graph, DetectionConfig(seed=3, n_perm=20, n_jobs=4))
    assert [c.members.tolist() for c in a.communities] == [
        c.members.tolist() for c in b.communities]
    assert [c.perm_pvalue for c in a.communities] == [c.perm_pvalue for c in b.communities]
    assert a.diagnostics["null_log_upper"] == b.diagnostics["null_log_upper"]


def test_detect_without_filter_keeps_everything():
    rng = np.random.default_rng(9)
    g = Graph.from_adjacency(np.triu(rng.random((60, 60)) < 0.1, 1))
    raw = detect(g, filter=False)
    filt = detect(g, DetectionConfig(n_perm=20))
    assert all(c.kept for c in raw.communities)
    assert len(filt.kept) <= len(raw.kept)


def test_detect_planted_sbm_count():
    P = np.full((3, 3), 0.02) + np.eye(3) * 0.18
    good = 0
    for seed in range(20):
        net = fixed_size_sample([100, 100, 100], P, seed=900 + seed)
        good += len(detect(net.graph, DetectionConfig(seed=seed, n_perm=20)).kept) == 3
    assert good >= 16


def test_shrunk_phi_reduces_to_phi_without_prior():
    g = cliques(5, 5, bridges=[(0, 5)])
    assert shrunk_phi(g, range(5), 0.3, 0.0) == pytest.approx(phi(g, range(5)))
    assert shrunk_phi(g, range(5), 0.3, 10.0) < phi(g, range(5))
