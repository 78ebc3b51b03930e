"""Community peeling, eta tuning and the permutation filter."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed
from scipy.sparse.csgraph import connected_components
from scipy.special import gammaln, logsumexp

from .graph import Graph, GraphError, phi, set_stats
from .solver import SolverConfig, SolverOutcome, two_phase_solve

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DetectionConfig:
    """Settings for the full detection pipeline.

    Parameters
    ----------
    c_grid, b_grid : int, float
        The eta grid is ``0, b/n, 2b/n, ..., c*b/n``, with ``n`` the number
        of non-isolated nodes of the input network (kept fixed across
        peeling rounds).
    m_small : int
        Communities with fewer nodes than this go through the permutation
        test; larger ones are always kept.
    n_perm : int
        Number of random null graphs.
    alpha : float
        A small community is filtered when its permutation p-value is
        ``>= alpha``.
    seed : int
        Master seed; replicate ``j`` uses the ``j``-th spawned stream.
    n_jobs : int
        Worker count for grid and replicate evaluation. Results do not
        depend on it.
    selection : {"shrunk", "tail", "phi"}
        Rule for choosing among grid candidates. ``"phi"`` maximizes
        ``pW / (pW + pB)``; ``"shrunk"`` does the same after shrinking
        ``pW`` toward the background density with ``prior_pairs``
        pseudo pairs; ``"tail"`` maximizes the binomial surprise of the
        internal edge count.
    prior_pairs : float
        Prior strength for ``selection="shrunk"``.
    null_statistic : {"candidates", "first"}
        What each null graph contributes to the permutation test: the most
        extreme small first-round candidate, or the first extracted
        community only.
    warm_start : bool
        Also follow a continuation path down the eta grid, each solve
        starting from the previous solution.
    solver : SolverConfig
        Inner solver settings; ``eta`` and ``lam1`` are overridden.
    """

    c_grid: int = 10
    b_grid: float = 1.0
    m_small: int = 20
    n_perm: int = 100
    alpha: float = 0.05
    seed: int = 0
    n_jobs: int = 1
    selection: str = "shrunk"
    prior_pairs: float = 10.0
    null_statistic: str = "candidates"
    warm_start: bool = True
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.c_grid < 1:
            raise ValueError(f"c_grid must be >= 1, got {self.c_grid}")
        if not self.b_grid > 0:
            raise ValueError(f"b_grid must be > 0, got {self.b_grid}")
        if self.n_perm < 1:
            raise ValueError(f"n_perm must be >= 1, got {self.n_perm}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.m_small < 2:
            raise ValueError(f"m_small must be >= 2, got {self.m_small}")
        if self.selection not in ("shrunk", "tail", "phi"):
            raise ValueError(
                f"selection must be 'shrunk', 'tail' or 'phi', got {self.selection!r}")
        if self.null_statistic not in ("candidates", "first"):
            raise ValueError("null_statistic must be 'candidates' or 'first', "
                             f"got {self.null_statistic!r}")
        if self.prior_pairs < 0:
            raise ValueError(f"prior_pairs must be >= 0, got {self.prior_pairs}")


@dataclass
class Community:
    members: np.ndarray
    n_nodes: int
    n_internal_edges: int
    eta: float = 0.0
    phi: float = float("nan")
    converged: bool = True
    tail_prob: float = float("nan")
    perm_pvalue: float | None = None
    kept: bool = True

    @property
    def exempt(self) -> bool:
        return self.perm_pvalue is None


@dataclass
class DetectionResult:
    n: int
    communities: list
    unassigned: np.ndarray
    filtered: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def kept(self) -> list:
        return [c for c in self.communities if c.kept]

    @property
    def etas(self) -> list:
        return [c.eta for c in self.communities]

    def labels(self) -> np.ndarray:
        """Per-node label: 1-based extraction rank for kept communities, else 0."""
        out = np.zeros(self.n, dtype=np.int64)
        for rank, c in enumerate(self.communities, start=1):
            if c.kept:
                out[c.members] = rank
        return out

    def status(self) -> np.ndarray:
        out = np.full(self.n, "unassigned", dtype=object)
        for c in self.communities:
            out[c.members] = "kept" if c.kept else "filtered"
        return out


# eta tuning and peeling


def eta_grid(n: int, cfg: DetectionConfig) -> np.ndarray:
    return np.arange(cfg.c_grid + 1) * (cfg.b_grid / n)


def _density(g: Graph) -> float:
    n = int(np.count_nonzero(g.degrees))
    return 2.0 * g.n_edges / (n * (n - 1)) if n > 1 else 0.0


def shrunk_phi(g: Graph, s, p_bar: float, prior_pairs: float) -> float:
    """phi with the within density shrunk toward ``p_bar``.

    The within density becomes ``(W/2 + k*p_bar) / (|S|(|S|-1)/2 + k)`` with
    ``k = prior_pairs`` pseudo node pairs, which damps the noisy densities
    of very small sets.
    """
    st = set_stats(g, s)
    m = st.size
    if m <= 1:
        return -math.inf
    p_w = (st.w / 2 + prior_pairs * p_bar) / (m * (m - 1) / 2 + prior_pairs)
    rest = g.n - m
    p_b = st.b / (m * rest) if rest > 0 else 0.0
    if p_w + p_b == 0:
        return -math.inf
    return p_w / (p_w + p_b)


def candidate_score(g: Graph, support: np.ndarray, selection: str = "tail",
                    ref: Graph | None = None, ref_ids=None, p_ref: float | None = None,
                    prior_pairs: float = 10.0) -> tuple:
    """Rank key of a candidate support; larger is better.

    Returns ``(tier, value, phi)``. Degenerate candidates (fewer than two
    nodes) get tier -1, all others tier 1. With ``selection="phi"`` or
    ``"shrunk"`` the value is the (shrunk) phi, except that a candidate
    covering every non-isolated node of the reference graph is valued at
    the neutral 0.5: its between density does not exist, so it only wins
    when no proper subset is denser inside than across its boundary. With
    ``selection="tail"`` the value is ``-log P(X >= E)`` for the internal
    edge count ``E`` under the reference density ``p_ref``.
    """
    if support.size <= 1:
        return (-1, -math.inf, -math.inf)
    if ref is None:
        ref, nodes = g, support
    else:
        nodes = ref_ids[support]
    value = phi(ref, nodes)
    if selection in ("phi", "shrunk"):
        if support.size >= int(np.count_nonzero(ref.degrees)):
            return (1, 0.5, value)
        if selection == "phi":
            return (1, value, value)
        if p_ref is None:
            p_ref = _density(ref)
        return (1, shrunk_phi(ref, nodes, p_ref, prior_pairs), value)
    if selection != "tail":
        raise ValueError(f"unknown selection rule {selection!r}")
    if p_ref is None:
        p_ref = _density(ref)
    e = set_stats(g, support).w // 2
    if e == 0:
        return (0, 0.0, value)
    return (1, -log_pvalue(support.size, e, p_ref), value)


def _grid_candidates(g: Graph, cfg: DetectionConfig, n_scale: int | None = None) -> list:
    """(eta, outcome) pairs: cold starts on every grid eta, then, if enabled,
    a continuation path from the largest eta down, each solve warm-started
    from the previous solution."""
    n_scale = n_scale or g.n
    grid = [float(e) for e in eta_grid(n_scale, cfg)]
    solver = cfg.solver
    cold = _map(cfg.n_jobs, two_phase_solve, [(g, e, solver) for e in grid])
    cands = list(zip(grid, cold))
    if cfg.warm_start:
        prev = cold[-1]
        for e in reversed(grid[:-1]):
            v0 = prev.v if not prev.empty else None
            prev = two_phase_solve(g, e, solver, v0=v0)
            cands.append((e, prev))
    return [(e, part) for e, out in cands for part in _split_components(g, out)]


def _split_components(g: Graph, out: SolverOutcome) -> list:
    """Split a support into the connected components of its induced subgraph.

    A disconnected support is never better than its best component: its
    ``W/V`` is a weighted mean of the components' values while its size
    penalty is larger.
    """
    if out.support.size <= 2:
        return [out]
    sub = g.subgraph(out.support)
    k, lab = connected_components(sub.adjacency, directed=False)
    if k == 1:
        return [out]
    return [replace(out, support=out.support[lab == c]) for c in range(k)]


def tune_eta(g: Graph, cfg: DetectionConfig | None = None, ref: Graph | None = None,
             ref_ids=None, p_ref: float | None = None, n_scale: int | None = None) -> tuple:
    """Solve over the eta grid and keep the best-scoring candidate.

    Parameters
    ----------
    g : Graph
        Graph to solve on. Must have at least one edge.
    ref, ref_ids : Graph, ndarray, optional
        Enclosing network; node ``i`` of ``g`` is ``ref_ids[i]`` in ``ref``.
        Scores are computed against it so that a candidate's complement and
        the background density refer to the whole network.
    p_ref : float, optional
        Background density for the tail score (default: density of ``ref``).

    Returns
    -------
    eta : float
    outcome : SolverOutcome
        Empty when every candidate is degenerate.
    phi : float
        phi of the chosen candidate in the reference graph.
    """
    cfg = cfg or DetectionConfig()
    if g.n_edges == 0:
        raise GraphError("graph has no edges")
    if p_ref is None:
        p_ref = _density(ref if ref is not None else g)
    best, best_key = None, None
    for e, out in _grid_candidates(g, cfg, n_scale):
        key = candidate_score(g, out.support, cfg.selection, ref, ref_ids, p_ref,
                              cfg.prior_pairs)
        # strict comparison keeps the smallest eta on ties (cold grid comes first)
        if best_key is None or key[:2] > best_key[:2] or (
                key[:2] == best_key[:2] and e < best[0]):
            best, best_key = (e, out), key
    eta, out = best
    if best_key[0] < 0:
        return eta, SolverOutcome.empty_outcome(g.n, eta=eta), -math.inf
    return eta, out, best_key[2]


def _map(n_jobs, fn, arglist):
    if n_jobs == 1 or len(arglist) <= 1:
        return [fn(*a) for a in arglist]
    return Parallel(n_jobs=n_jobs, prefer="threads")(delayed(fn)(*a) for a in arglist)


def extract_all(g: Graph, cfg: DetectionConfig | None = None) -> DetectionResult:
    """Peel communities one at a time until no edge is left.

    Each round solves on the subgraph induced by the remaining nodes that
    still have an edge. Peeling also stops early if the best candidate has
    fewer than two nodes.
    """
    cfg = cfg or DetectionConfig()
    remaining = np.ones(g.n, dtype=bool)
    communities = []
    rounds = []
    active_ref = np.flatnonzero(g.degrees > 0)
    ref = g.subgraph(active_ref) if active_ref.size < g.n else g
    to_ref = np.full(g.n, -1, dtype=np.int64)
    to_ref[active_ref] = np.arange(active_ref.size)
    while True:
        nodes = np.flatnonzero(remaining)
        sub = g.subgraph(nodes)
        active = np.flatnonzero(sub.degrees > 0)
        if active.size == 0:
            break
        if active.size < sub.n:
            nodes = nodes[active]
            sub = sub.subgraph(active)
        eta, out, score = tune_eta(sub, cfg, ref, to_ref[nodes],
                                   n_scale=ref.n)
        rounds.append({"eta": eta, "phi": score, "size": int(out.support.size),
                       "converged": out.converged})
        if out.support.size <= 1:
            logger.debug("peeling stopped on a degenerate candidate with %d edges left",
                         sub.n_edges)
            break
        members = nodes[out.support]
        st = set_stats(g, members)
        communities.append(Community(members, members.size, st.w // 2, eta, score,
                                     out.converged))
        remaining[members] = False
    assigned = np.zeros(g.n, dtype=bool)
    for c in communities:
        assigned[c.members] = True
    return DetectionResult(g.n, communities, np.flatnonzero(~assigned),
                           diagnostics={"rounds": rounds})


# permutation filter


def _check_tail_args(m, E, p_bar):
    if m < 2:
        raise ValueError(f"m must be >= 2, got {m}")
    if E < 0:
        raise ValueError(f"E must be >= 0, got {E}")
    if not 0.0 <= p_bar <= 1.0 or math.isnan(p_bar):
        raise ValueError(f"p_bar must lie in [0, 1], got {p_bar}")


def _log_pmf(T, ks, p):
    ks = np.asarray(ks, dtype=np.float64)
    logc = gammaln(T + 1) - gammaln(ks + 1) - gammaln(T - ks + 1)
    return logc + ks * math.log(p) + (T - ks) * math.log1p(-p)


def binom_tail(m: int, E: int, p_bar: float) -> float:
    """Probability of at most ``E`` edges among ``m`` nodes of a random graph
    with edge density ``p_bar``."""
    _check_tail_args(m, E, p_bar)
    T = m * (m - 1) // 2
    if E >= T or p_bar == 0.0:
        return 1.0
    if p_bar == 1.0:
        return 0.0
    if E >= T * p_bar:
        # upper side is the small one; 1 - P(X > E) keeps full precision near 1
        upper = logsumexp(_log_pmf(T, np.arange(E + 1, T + 1), p_bar))
        return float(min(1.0, max(0.0, -math.expm1(upper))))
    return float(min(1.0, math.exp(logsumexp(_log_pmf(T, np.arange(E + 1), p_bar)))))


def binom_log_upper(m: int, E: int, p_bar: float) -> float:
    """Log-probability of more than ``E`` edges; the complement of
    :func:`binom_tail`, kept in log space so that very dense sets still
    compare correctly."""
    _check_tail_args(m, E, p_bar)
    T = m * (m - 1) // 2
    if E >= T or p_bar == 0.0:
        return -math.inf
    if p_bar == 1.0:
        return 0.0
    return float(min(0.0, logsumexp(_log_pmf(T, np.arange(E + 1, T + 1), p_bar))))


def log_pvalue(m: int, E: int, p_bar: float) -> float:
    """``log P(X >= E)``: how unlikely at least ``E`` internal edges are."""
    if E <= 0:
        return 0.0
    return binom_log_upper(m, E - 1, p_bar)


def random_graph_fixed_edges(n: int, n_edges: int, rng: np.random.Generator) -> Graph:
    """Uniform simple graph on ``n`` nodes with exactly ``n_edges`` edges."""
    total = n * (n - 1) // 2
    if n_edges > total:
        raise GraphError(f"{n_edges} edges do not fit in a simple graph on {n} nodes")
    picks = np.sort(rng.choice(total, size=n_edges, replace=False))
    # decode linear index over the strict upper triangle, row by row
    row_start = np.arange(n) * (2 * n - np.arange(n) - 1) // 2
    i = np.searchsorted(row_start, picks, side="right") - 1
    j = picks - row_start[i] + i + 1
    return Graph.from_edges(n, np.column_stack([i, j]))


def _null_replicate(n0, e0, p_bar, seed_seq, cfg):
    """Null extremeness (log upper tail) from one random graph.

    With ``null_statistic="first"`` this is the first extracted community;
    with ``"candidates"`` it is the most extreme of all first-round grid
    candidates with fewer than ``m_small`` nodes. Returns
    ``(log_tail, n_nodes, n_edges)``; degenerate cases give 0.0, the least
    extreme value possible.
    """
    rng = np.random.default_rng(seed_seq)
    er = random_graph_fixed_edges(n0, e0, rng)
    active = np.flatnonzero(er.degrees > 0)
    sub = er.subgraph(active) if active.size < n0 else er
    if sub.n_edges == 0:
        return 0.0, 0, 0
    cfg = replace(cfg, n_jobs=1)
    if cfg.null_statistic == "first":
        _, out, _ = tune_eta(sub, cfg)
        supports = [out.support]
    else:
        supports = [o.support for _, o in _grid_candidates(sub, cfg)
                    if o.support.size < cfg.m_small]
    best = (0.0, 0, 0)
    for s in supports:
        if s.size <= 1:
            continue
        nj, ej = int(s.size), set_stats(sub, s).w // 2
        lp = log_pvalue(nj, ej, p_bar)
        if lp < best[0]:
            best = (lp, nj, ej)
    return best


def permutation_filter(g: Graph, result: DetectionResult,
                       cfg: DetectionConfig | None = None) -> DetectionResult:
    """Assign permutation p-values to small communities and filter them.

    The null graphs are uniform random graphs with the node and edge counts
    of the subgraph spanned by all small communities, and ``p_bar`` is that
    subgraph's density. A replicate counts against community ``i`` when its
    null statistic (see ``DetectionConfig.null_statistic``) is at least as
    unlikely under ``p_bar`` (at least as dense for its size) as community
    ``i``. Communities with ``m_small`` or more nodes are kept untested.
    """
    cfg = cfg or DetectionConfig()
    comms = [replace(c) for c in result.communities]
    diag = dict(result.diagnostics)
    small = [c for c in comms if c.n_nodes < cfg.m_small]
    for c in comms:
        c.perm_pvalue = None
        c.kept = True
    if small:
        g0_nodes = np.unique(np.concatenate([c.members for c in small]))
        g0 = g.subgraph(g0_nodes)
        n0, e0 = g0.n, g0.n_edges
        diag["g0_nodes"], diag["g0_edges"] = n0, e0
        if n0 < 2 or e0 == 0:
            logger.warning("null subgraph has %d nodes and %d edges; permutation test skipped",
                           n0, e0)
            diag["permutation"] = "skipped"
            for c in small:
                c.kept = c.n_nodes >= 2 and c.n_internal_edges >= 1
        else:
            p_bar = 2.0 * e0 / (n0 * n0 - n0)
            diag["p_bar"] = p_bar
            seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_perm)
            null = _map(cfg.n_jobs, _null_replicate,
                        [(n0, e0, p_bar, s, cfg) for s in seeds])
            null_ext = np.array([x[0] for x in null])
            diag["null_sizes"] = [x[1] for x in null]
            diag["null_log_upper"] = null_ext.tolist()
            for c in comms:
                if c.n_nodes >= 2:
                    c.tail_prob = binom_tail(c.n_nodes, c.n_internal_edges, p_bar)
            for c in small:
                ext = log_pvalue(c.n_nodes, c.n_internal_edges, p_bar)
                c.perm_pvalue = float(np.count_nonzero(null_ext <= ext)) / cfg.n_perm
                c.kept = c.perm_pvalue < cfg.alpha
    unassigned = set(result.unassigned.tolist())
    for c in comms:
        if not c.kept:
            unassigned.update(c.members.tolist())
    return DetectionResult(result.n, comms, np.array(sorted(unassigned), dtype=np.int64),
                           filtered=True, diagnostics=diag)


def detect(g: Graph, cfg: DetectionConfig | None = None, filter: bool = True) -> DetectionResult:
    """Run peeling and, unless ``filter`` is False, the permutation filter."""
    cfg = cfg or DetectionConfig()
    result = extract_all(g, cfg)
    if not filter:
        return result
    return permutation_filter(g, result, cfg)
