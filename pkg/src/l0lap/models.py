"""Stochastic block model generators, with degree correction and outliers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph


class InfeasibleParametersError(ValueError):
    """Raised when the requested parameters imply a probability above 1."""


@dataclass(frozen=True)
class ThetaDist:
    """Law of the degree variables.

    ``kind`` is ``"point"`` (all ones), ``"uniform"`` on ``[low, high]``, or
    ``"discrete"`` over ``support`` with ``weights``.
    """

    kind: str = "point"
    low: float = 0.5
    high: float = 1.0
    support: tuple = ()
    weights: tuple = ()

    def __post_init__(self):
        if self.kind not in ("point", "uniform", "discrete"):
            raise ValueError(f"unknown theta law {self.kind!r}")
        if self.kind == "uniform" and not 0 < self.low <= self.high:
            raise ValueError("uniform theta law needs 0 < low <= high")
        if self.kind == "discrete":
            if len(self.support) == 0 or len(self.support) != len(self.weights):
                raise ValueError("discrete theta law needs matching support and weights")
            if min(self.support) <= 0:
                raise ValueError("theta support must be positive")
            if abs(sum(self.weights) - 1.0) > 1e-12 or min(self.weights) < 0:
                raise ValueError("theta weights must be nonnegative and sum to 1")

    @classmethod
    def sbm(cls):
        return cls("point")

    @classmethod
    def dcsbm(cls):
        return cls("uniform", 0.5, 1.0)

    @property
    def mean(self) -> float:
        if self.kind == "point":
            return 1.0
        if self.kind == "uniform":
            return 0.5 * (self.low + self.high)
        return float(np.dot(self.support, self.weights))

    def draw(self, n, rng) -> np.ndarray:
        if self.kind == "point":
            return np.ones(n)
        if self.kind == "uniform":
            return rng.uniform(self.low, self.high, size=n)
        return rng.choice(np.asarray(self.support, float), size=n, p=self.weights)


def _validate_blocks(P, n_outlier_blocks=0):
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("connection matrix must be square")
    if not np.allclose(P, P.T, rtol=0, atol=0):
        raise ValueError("connection matrix must be symmetric")
    if P.min() < 0 or P.max() > 1:
        raise InfeasibleParametersError("connection probabilities must lie in [0, 1]")
    K = P.shape[0]
    k_real = K - n_outlier_blocks
    if K > 1:
        off = P[~np.eye(K, dtype=bool)]
        q_plus = off.max()
        p_minus = np.diag(P)[:k_real].min()
        if not p_minus > q_plus:
            raise ValueError(
                f"within-community probability {p_minus:g} must exceed "
                f"between-community probability {q_plus:g}")
        if n_outlier_blocks and not P[-1, -1] <= q_plus:
            raise ValueError("outlier block must not be denser than the between-community level")
    return P


@dataclass(frozen=True)
class DcsbmParams:
    """Parameters of a (degree-corrected) SBM, optionally with an outlier block.

    When ``outlier_frac > 0`` the last entry of ``pi`` and last row/column
    of ``P`` describe the outlier block.
    """

    n: int
    pi: tuple
    P: np.ndarray
    theta: ThetaDist = ThetaDist()
    outlier_frac: float = 0.0

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=np.float64)
        if pi.min() <= 0 or abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError("community proportions must be positive and sum to 1")
        P = _validate_blocks(self.P, int(self.outlier_frac > 0))
        if P.shape[0] != pi.size:
            raise ValueError("pi and P disagree on the number of blocks")
        if self.outlier_frac > 0 and abs(pi[-1] - self.outlier_frac) > 1e-12:
            raise ValueError("outlier_frac must equal the last block's proportion")


@dataclass
class GeneratedNetwork:
    """A sampled network with its ground truth.

    ``labels`` are block numbers ``1..K``; with an outlier block,
    ``outlier_label`` is ``K``.
    """

    graph: Graph
    labels: np.ndarray
    thetas: np.ndarray
    n_clipped: int = 0
    outlier_label: int | None = None

    def blocks(self) -> list:
        return [np.flatnonzero(self.labels == k) for k in np.unique(self.labels)]


def build_connection_matrix(K: int, beta: float, Lambda: float, pi, n: int,
                            e_theta: float = 1.0) -> np.ndarray:
    """Connection matrix with out-in ratio ``beta`` and expected degree ``Lambda``.

    The base matrix has ``1/beta`` on the diagonal and ones elsewhere; it is
    rescaled by ``Lambda / ((n - 1) * pi' P0 pi * e_theta**2)``.
    """
    if not beta > 0 or not Lambda > 0:
        raise ValueError("beta and Lambda must be positive")
    if n < 2:
        raise ValueError("n must be >= 2")
    pi = np.asarray(pi, dtype=np.float64)
    if pi.size != K:
        raise ValueError(f"pi has {pi.size} entries for K={K}")
    P0 = np.ones((K, K))
    np.fill_diagonal(P0, 1.0 / beta)
    scale = Lambda / ((n - 1) * (pi @ P0 @ pi) * e_theta ** 2)
    P = scale * P0
    if P.max() > 1.0:
        raise InfeasibleParametersError(
            f"Lambda={Lambda:g} with beta={beta:g} gives a connection probability of "
            f"{P.max():.4g} > 1")
    return P


def _sample_edges(labels, thetas, P, rng):
    """Independent Bernoulli edges with probability min(1, t_i t_j P[c_i, c_j])."""
    n = labels.size
    rows, cols = [], []
    n_clipped = 0
    for i in range(n - 1):
        j = np.arange(i + 1, n)
        prob = thetas[i] * thetas[j] * P[labels[i], labels[j]]
        n_clipped += int(np.count_nonzero(prob > 1.0))
        hit = j[rng.random(j.size) < prob]
        rows.append(np.full(hit.size, i))
        cols.append(hit)
    if rows:
        edges = np.column_stack([np.concatenate(rows), np.concatenate(cols)])
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
    return Graph.from_edges(n, edges), n_clipped


def sample(params: DcsbmParams, seed=None) -> GeneratedNetwork:
    """Draw labels from ``pi``, degree variables from ``theta`` and the edges."""
    rng = np.random.default_rng(seed)
    K = len(params.pi)
    labels = rng.choice(K, size=params.n, p=np.asarray(params.pi, float))
    thetas = params.theta.draw(params.n, rng)
    g, clipped = _sample_edges(labels, thetas, np.asarray(params.P, float), rng)
    return GeneratedNetwork(g, labels + 1, thetas, clipped,
                            K if params.outlier_frac > 0 else None)


def fixed_size_sample(sizes, P, theta: ThetaDist | None = None, seed=None,
                      outlier_block: bool = False) -> GeneratedNetwork:
    """Like :func:`sample` but with block ``k`` holding exactly ``sizes[k]`` nodes.

    With ``outlier_block`` the last block is validated as an outlier block.
    """
    theta = theta or ThetaDist.sbm()
    sizes = [int(s) for s in sizes]
    P = _validate_blocks(P, int(outlier_block))
    if P.shape[0] != len(sizes):
        raise ValueError("sizes and P disagree on the number of blocks")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(len(sizes)), sizes)
    thetas = theta.draw(labels.size, rng)
    g, clipped = _sample_edges(labels, thetas, P, rng)
    return GeneratedNetwork(g, labels + 1, thetas, clipped,
                            len(sizes) if outlier_block else None)


def simulation_network(sizes, beta: float, Lambda: float, model: str = "sbm",
                       n_outliers: int = 0, seed=None) -> GeneratedNetwork:
    """Benchmark network: blocks of the given sizes plus an optional outlier block.

    Outliers connect to every node with the between-community probability.
    The connection matrix is scaled using the community proportions over
    all ``n`` nodes, outliers included.
    """
    theta = ThetaDist.dcsbm() if model == "dcsbm" else ThetaDist.sbm()
    if model not in ("sbm", "dcsbm"):
        raise ValueError(f"unknown model {model!r}")
    all_sizes = list(sizes) + ([n_outliers] if n_outliers else [])
    n = sum(all_sizes)
    pi = np.asarray(all_sizes, dtype=np.float64) / n
    K = len(all_sizes)
    P = build_connection_matrix(K, beta, Lambda, pi, n, theta.mean)
    if n_outliers:
        q = P[0, 1] if K > 1 else P[0, 0]
        P[-1, :] = q
        P[:, -1] = q
    return fixed_size_sample(all_sizes, P, theta, seed, outlier_block=bool(n_outliers))
