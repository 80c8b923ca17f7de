"""Network topologies, Metropolis-Hastings mixing matrices and the per-round
communication operators (direct multi-step gossip and accelerated gossip).
"""

from __future__ import annotations

import json
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Topology",
    "MixingMatrix",
    "MixingOperator",
    "build_topology",
    "random_topology",
    "metropolis_weights",
    "spectral_gap",
    "spectral_gap_power",
    "make_operator",
    "accelerated_eta",
    "direct_bound",
    "accelerated_bound",
    "rho_bar_bound",
]

TOPOLOGY_KINDS = ("ring", "path", "complete", "exponential")
PROTOCOLS = ("direct", "accelerated")

# cap used whenever a bound on the effective gap is fed into a formula with (1 - rho)
RHO_CAP = 1.0 - 1e-12


@dataclass(frozen=True)
class Topology:
    """Undirected graph with self-loops stored as a boolean adjacency matrix."""

    n: int
    adjacency: np.ndarray = field(repr=False)
    kind: str = "custom"

    def __post_init__(self):
        adj = np.array(self.adjacency, dtype=bool)
        if adj.shape != (self.n, self.n):
            raise ValueError(f"adjacency must be {self.n}x{self.n}, got {adj.shape}")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if not adj.diagonal().all():
            raise ValueError("every node must be its own neighbor")
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)

    def neighbors(self, i: int) -> list[int]:
        """Neighbors of node ``i``, including ``i`` itself."""
        return np.flatnonzero(self.adjacency[i]).tolist()

    def degrees(self) -> np.ndarray:
        """Neighbor counts excluding self-loops."""
        return self.adjacency.sum(axis=1) - 1

    def is_connected(self) -> bool:
        seen = np.zeros(self.n, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            i = queue.popleft()
            for j in np.flatnonzero(self.adjacency[i] & ~seen):
                seen[j] = True
                queue.append(j)
        return bool(seen.all())

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, "adjacency": self.adjacency.astype(int).tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Topology":
        return cls(n=int(d["n"]), adjacency=np.array(d["adjacency"], dtype=bool), kind=d.get("kind", "custom"))


@dataclass(frozen=True)
class MixingMatrix:
    """Doubly stochastic weight matrix ``W`` with ``rho_w = ||W - J||_2^2``."""

    W: np.ndarray = field(repr=False)
    rho_w: float

    @property
    def n(self) -> int:
        return self.W.shape[0]

    def to_json(self) -> str:
        return json.dumps({"W": self.W.tolist(), "rho_w": self.rho_w})

    @classmethod
    def from_json(cls, text: str) -> "MixingMatrix":
        d = json.loads(text)
        W = np.array(d["W"], dtype=float)
        return cls(W=W, rho_w=float(d["rho_w"]))


@dataclass(frozen=True)
class MixingOperator:
    """Per-round communication map ``W_bar`` (``W**alpha`` or accelerated ``M_alpha``).

    ``rho_bar`` is the exact ``||W_bar - J||_2^2``; ``bound`` is the closed-form
    upper bound on it for the protocol.
    """

    matrix: np.ndarray = field(repr=False)
    protocol: str
    alpha: int
    rho_bar: float
    bound: float
    eta: float = 0.0
    rho_w: float = 0.0
    base: np.ndarray | None = field(default=None, repr=False)

    def apply(self, A: np.ndarray) -> np.ndarray:
        return self.matrix @ A


def _ring_adjacency(n: int) -> np.ndarray:
    adj = np.eye(n, dtype=bool)
    if n >= 2:
        idx = np.arange(n)
        adj[idx, (idx + 1) % n] = True
        adj[idx, (idx - 1) % n] = True
    return adj


def build_topology(kind: str, n: int, degree: int | None = None) -> Topology:
    """Construct a connected, symmetric topology with self-loops.

    ``exponential`` links each node to the nodes at offsets ``1, 2, 4, ...``
    (``degree`` of them) and symmetrizes the result.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if kind not in TOPOLOGY_KINDS:
        raise ValueError(f"unknown topology kind {kind!r}; expected one of {TOPOLOGY_KINDS}")
    if degree is not None and degree > n - 1:
        raise ValueError(f"degree {degree} exceeds n - 1 = {n - 1}")

    if kind == "ring":
        adj = _ring_adjacency(n)
    elif kind == "path":
        adj = np.eye(n, dtype=bool)
        idx = np.arange(n - 1)
        adj[idx, idx + 1] = True
        adj[idx + 1, idx] = True
    elif kind == "complete":
        adj = np.ones((n, n), dtype=bool)
    else:
        if degree is None:
            degree = max(1, int(np.floor(np.log2(max(n - 1, 1)))) + 1) if n > 1 else 0
            degree = min(degree, n - 1)
        if degree < 1 and n > 1:
            raise ValueError("exponential topology requires degree >= 1")
        adj = np.eye(n, dtype=bool)
        idx = np.arange(n)
        for k in range(degree):
            off = 2**k
            adj[idx, (idx + off) % n] = True
        adj = adj | adj.T
    return Topology(n=n, adjacency=adj, kind=kind)


def random_topology(n: int, rng: np.random.Generator, edge_prob: float = 0.2) -> Topology:
    """Random connected graph: a random spanning tree plus Erdos-Renyi extra edges."""
    adj = np.eye(n, dtype=bool)
    perm = rng.permutation(n)
    for k in range(1, n):
        i, j = perm[k], perm[rng.integers(k)]
        adj[i, j] = adj[j, i] = True
    extra = np.triu(rng.random((n, n)) < edge_prob, 1)
    adj |= extra | extra.T
    return Topology(n=n, adjacency=adj, kind="random")


def spectral_gap(W: np.ndarray, method: str = "auto") -> float:
    """Squared spectral norm ``||W - J||_2^2``.

    Symmetric eigendecomposition up to n = 512, SVD for nonsymmetric input,
    power iteration above that size (or when ``method="power"``).
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"W must be square, got shape {W.shape}")
    n = W.shape[0]
    if method == "power" or (method == "auto" and n > 512):
        return spectral_gap_power(W)
    D = W - np.full((n, n), 1.0 / n)
    if np.allclose(D, D.T, atol=1e-14, rtol=0):
        s = np.abs(np.linalg.eigvalsh((D + D.T) / 2)).max()
    else:
        s = np.linalg.norm(D, 2)
    return float(s**2)


def spectral_gap_power(W: np.ndarray, tol: float = 1e-12, max_iter: int = 10_000, seed: int = 0) -> float:
    """Power iteration on ``(W - J)^T (W - J)``; returns its top eigenvalue."""
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    v = np.random.default_rng(seed).standard_normal(n)
    v -= v.mean()
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return 0.0
    v /= norm
    lam = 0.0
    for _ in range(max_iter):
        u = W @ v
        u -= u.mean()
        w = W.T @ u
        w -= w.mean()
        new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(new - lam) <= tol * max(1.0, abs(new)):
            return new
        lam = new
    return lam


def metropolis_weights(topology: Topology) -> MixingMatrix:
    """Metropolis-Hastings weights ``W_ij = 1 / (1 + max(d_i, d_j))``."""
    adj = topology.adjacency
    d = topology.degrees()
    W = np.where(adj, 1.0 / (1.0 + np.maximum.outer(d, d)), 0.0)
    np.fill_diagonal(W, 0.0)
    np.fill_diagonal(W, 1.0 - W.sum(axis=1))
    W.setflags(write=False)
    return MixingMatrix(W=W, rho_w=spectral_gap(W))


def accelerated_eta(rho_w: float) -> float:
    s = np.sqrt(max(1.0 - rho_w, 0.0))
    return float((1.0 - s) / (1.0 + s))


def direct_bound(rho_w: float, alpha: int) -> float:
    return float(rho_w**alpha)


def accelerated_bound(rho_w: float, alpha: int) -> float:
    return float(2.0 * (1.0 - np.sqrt(1.0 - np.sqrt(rho_w))) ** (2 * alpha))


def rho_bar_bound(rho_w: float, protocol: str, alpha: int) -> float:
    """Closed-form upper bound on the effective gap, capped below 1."""
    if protocol == "direct":
        b = direct_bound(rho_w, alpha)
    elif protocol == "accelerated":
        b = accelerated_bound(rho_w, alpha)
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    return min(b, RHO_CAP)


def accelerated_matrix(W: np.ndarray, alpha: int, eta: float) -> np.ndarray:
    """``M_alpha`` from ``M_{s+1} = (1+eta) W M_s - eta M_{s-1}``, ``M_{-1} = M_0 = I``."""
    n = W.shape[0]
    prev = np.eye(n)
    cur = np.eye(n)
    for _ in range(alpha):
        prev, cur = cur, (1.0 + eta) * (W @ cur) - eta * prev
    return cur


def make_operator(mixing: MixingMatrix, protocol: str, alpha: int) -> MixingOperator:
    """Fold ``alpha`` communication steps of the chosen protocol into one matrix."""
    if alpha < 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    W = mixing.W
    rho_w = mixing.rho_w
    if protocol == "direct":
        M = np.linalg.matrix_power(W, alpha)
        eta = 0.0
        bound = direct_bound(rho_w, alpha)
        tol = 1e-12
    elif protocol == "accelerated":
        eta = accelerated_eta(rho_w) if rho_w > 0 else 0.0
        M = accelerated_matrix(W, alpha, eta)
        bound = accelerated_bound(rho_w, alpha)
        tol = 1e-9
    else:
        raise ValueError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")
    rho_bar = spectral_gap(M)
    if rho_bar > bound + tol:
        warnings.warn(
            f"{protocol} operator gap {rho_bar:.3e} exceeds its bound {bound:.3e} (alpha={alpha})",
            RuntimeWarning,
            stacklevel=2,
        )
    M.setflags(write=False)
    return MixingOperator(
        matrix=M, protocol=protocol, alpha=alpha, rho_bar=rho_bar, bound=bound, eta=eta, rho_w=rho_w, base=W
    )
