"""scikit-learn style wrapper around the detection pipeline."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .extractor import DetectionConfig, detect
from .graph import Graph
from .solver import SolverConfig


def _as_graph(X) -> Graph:
    if isinstance(X, Graph):
        return X
    A = check_array(X, accept_sparse=("csr", "csc", "coo"), ensure_min_samples=2,
                    ensure_min_features=2, dtype=None)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"adjacency matrix must be square, got shape {A.shape}")
    diff = (A != A.T)
    if (diff.nnz if sp.issparse(diff) else np.count_nonzero(diff)):
        raise ValueError("adjacency matrix must be symmetric")
    return Graph.from_adjacency(A)


class L0LapCommunityDetector(ClusterMixin, BaseEstimator):
    """Community detection by L0-penalized Laplacian peeling.

    Communities are extracted one at a time, so their number need not be
    known in advance. Small communities are optionally checked against
    random-graph nulls and dropped when they look like noise.

    Parameters
    ----------
    c_grid : int, default=10
        Number of nonzero penalty values tried per extraction.
    b_grid : float, default=1.0
        Penalty grid step, in units of ``1/n``.
    m_small : int, default=20
        Size below which an extracted community must pass the permutation
        test.
    n_perm : int, default=100
        Number of null graphs for the test.
    alpha : float, default=0.05
        Test level.
    filter : bool, default=True
        Run the permutation filter. ``False`` keeps every extraction.
    selection : {"shrunk", "tail", "phi"}, default="shrunk"
        Rule for choosing among the penalty grid candidates.
    prior_pairs : float, default=10.0
        Shrinkage strength for ``selection="shrunk"``.
    null_statistic : {"candidates", "first"}, default="candidates"
        Null statistic of the permutation test.
    lam : float or None, default=None
        Coupling weight of the solver; None means ``1/sqrt(n)``.
    eps : float, default=1e-4
        Solver stopping tolerance.
    max_iter : int, default=500
        Solver iteration cap.
    random_state : int, default=0
        Seed of the permutation test.
    n_jobs : int, default=1
        Threads for grid solves and null replicates; does not change
        results.

    Attributes
    ----------
    labels_ : ndarray of shape (n_nodes,)
        1-based extraction rank of each node's kept community, 0 for
        unassigned nodes.
    result_ : DetectionResult
        Full result, including filtered communities and diagnostics.
    n_communities_ : int
        Number of kept communities.
    n_features_in_ : int
        Number of nodes of the fitted graph.

    Examples
    --------
    >>> import numpy as np
    >>> A = np.kron(np.eye(2), np.ones((10, 10))) - np.eye(20)
    >>> L0LapCommunityDetector().fit(A).n_communities_
    2
    """

    def __init__(self, c_grid=10, b_grid=1.0, m_small=20, n_perm=100, alpha=0.05,
                 filter=True, selection="shrunk", prior_pairs=10.0,
                 null_statistic="candidates", lam=None, eps=1e-4, max_iter=500,
                 random_state=0, n_jobs=1):
        self.c_grid = c_grid
        self.b_grid = b_grid
        self.m_small = m_small
        self.n_perm = n_perm
        self.alpha = alpha
        self.filter = filter
        self.selection = selection
        self.prior_pairs = prior_pairs
        self.null_statistic = null_statistic
        self.lam = lam
        self.eps = eps
        self.max_iter = max_iter
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _config(self) -> DetectionConfig:
        seed = self.random_state
        if not isinstance(seed, (int, np.integer)):
            raise ValueError(f"random_state must be an int, got {seed!r}")
        return DetectionConfig(
            c_grid=self.c_grid, b_grid=self.b_grid, m_small=self.m_small,
            n_perm=self.n_perm, alpha=self.alpha, seed=int(seed), n_jobs=self.n_jobs,
            selection=self.selection, prior_pairs=self.prior_pairs,
            null_statistic=self.null_statistic,
            solver=SolverConfig(lam=self.lam, eps=self.eps, max_iter=self.max_iter),
        )

    def fit(self, X, y=None):
        """Detect communities.

        Parameters
        ----------
        X : Graph, array-like or sparse matrix of shape (n_nodes, n_nodes)
            Symmetric adjacency matrix; nonzero off-diagonal entries are
            edges.
        y : ignored
        """
        cfg = self._config()
        g = _as_graph(X)
        self.result_ = detect(g, cfg, filter=self.filter)
        self.labels_ = self.result_.labels()
        self.n_communities_ = len(self.result_.kept)
        self.n_features_in_ = g.n
        return self

    @property
    def communities_(self) -> list:
        """Member index arrays of the kept communities, in extraction order."""
        check_is_fitted(self, "result_")
        return [c.members for c in self.result_.kept]
