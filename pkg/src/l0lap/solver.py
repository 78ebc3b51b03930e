"""L0-penalized Laplacian solver for a single candidate community."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._kernels import iterate, threshold_into
from .graph import Graph, GraphError


class DegenerateInputError(ValueError):
    """Raised when thresholding an all-zero vector without a penalty."""


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the alternating maximization.

    ``lam=None`` resolves to ``1/sqrt(n)`` for the graph being solved.
    """

    lam: float | None = None
    lam1: float = 0.0
    eta: float = 0.0
    eps: float = 1e-4
    max_iter: int = 500

    def __post_init__(self):
        if self.lam is not None and not self.lam > 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        if self.lam1 < 0:
            raise ValueError(f"lam1 must be >= 0, got {self.lam1}")
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")

    def resolved_lam(self, n: int) -> float:
        return self.lam if self.lam is not None else 1.0 / math.sqrt(n)


@dataclass
class SolverOutcome:
    support: np.ndarray
    u: np.ndarray
    v: np.ndarray
    iterations: int = 0
    converged: bool = False
    eta: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return self.support.size == 0

    @classmethod
    def empty_outcome(cls, n: int, iterations: int = 0, eta: float = 0.0) -> "SolverOutcome":
        z = np.zeros(n)
        return cls(np.zeros(0, dtype=np.int64), z, z.copy(), iterations, False, eta)


def hard_threshold(z, rho: float) -> np.ndarray:
    """Maximize ``u @ z - rho * ||u||_0`` over unit vectors.

    Entries are ranked by ``|z_i|`` (descending, ties by index). The cut
    ``r`` is the smallest rank with
    ``|z|_(r+1) <= sqrt(rho**2 + 2*rho*||z_r||)``, where ``z_r`` keeps the
    entries strictly larger than ``|z|_(r+1)`` and ``|z|_(n+1) = 0``.
    Returns the normalized ``z_r``, or the zero vector when ties at the
    boundary leave nothing.
    """
    z = np.asarray(z, dtype=np.float64)
    if rho < 0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    scale = np.abs(z).max() if z.size else 0.0
    if rho == 0:
        if scale == 0:
            raise DegenerateInputError("cannot normalize an all-zero vector")
        z = z / scale
        return z / np.linalg.norm(z)
    out = np.zeros_like(z)
    if scale == 0:
        return out
    # the support is invariant under joint rescaling of z and rho; this
    # keeps squared norms away from underflow
    threshold_into(z / scale, float(rho) / scale, out)
    return out


def l0lap_iterate(g: Graph, cfg: SolverConfig, v0) -> SolverOutcome:
    """Alternate the two thresholded updates from the start vector ``v0``.

    Each half-step thresholds ``(Q + 2*lam*I) x + 2*lam1 * x_d`` at
    ``eta/2``, where ``x_d`` is the degree-weighted reprojection of the
    previous iterate's support. Isolated nodes are never selected. An
    update that thresholds to nothing ends the run with an empty outcome.
    """
    if g.n_edges == 0:
        raise GraphError("graph has no edges")
    v0 = np.asarray(v0, dtype=np.float64)
    if v0.shape != (g.n,):
        raise GraphError(f"start vector of length {v0.shape} does not match n={g.n}")
    Q = g.laplacian
    u, v, k, status = iterate(
        Q.indptr, Q.indices, Q.data, g.degrees.astype(np.float64), v0,
        cfg.resolved_lam(g.n), cfg.lam1, cfg.eta / 2.0, cfg.eps, cfg.max_iter,
    )
    if status < 0:
        return SolverOutcome.empty_outcome(g.n, k, cfg.eta)
    support = np.flatnonzero((u != 0) & (v != 0))
    return SolverOutcome(support, u, v, k, status == 1, cfg.eta)


def two_phase_solve(g: Graph, eta: float, cfg: SolverConfig | None = None,
                    v0=None) -> SolverOutcome:
    """Solve with ``lam1=0`` from ``v0`` (uniform by default), then rerun with
    ``lam1=1`` from the phase-one result."""
    cfg = cfg or SolverConfig()
    if g.n_edges == 0:
        raise GraphError("graph has no edges")
    if v0 is None:
        v0 = np.full(g.n, 1.0 / math.sqrt(g.n))
    first = l0lap_iterate(g, replace(cfg, lam1=0.0, eta=eta), v0)
    if first.empty:
        first.diagnostics["phase"] = 1
        return first
    v_hat = first.v / np.linalg.norm(first.v)
    second = l0lap_iterate(g, replace(cfg, lam1=1.0, eta=eta), v_hat)
    second.diagnostics["phase"] = 2
    second.diagnostics["phase1_iterations"] = first.iterations
    return second
