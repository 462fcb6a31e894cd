"""Symmetric nonnegative coupling networks.

Construction and validation of the coupling matrix, seeded random generators
(Erdos-Renyi, stochastic block model, core-periphery, complete), edge-list
file I/O, and Laplacian spectral data (weighted degrees, Fiedler value).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    AsymmetricInput,
    DisconnectedAfterRetries,
    IsolatedNode,
    NegativeWeight,
    ParseError,
)

DEFAULT_RETRIES = 100


@dataclass(frozen=True, eq=False)
class Network:
    """Undirected weighted network over nodes 0..n-1.

    The coupling matrix is exactly symmetric with nonnegative entries;
    self-loops (positive diagonal) are permitted. Instances are immutable
    after construction and safe to share across threads.
    """

    n: int
    weights: np.ndarray
    is_symmetric: bool = True

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, order="C")
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"coupling matrix must be square, got shape {w.shape}")
        if self.n != w.shape[0] or self.n < 1:
            raise ValueError(f"node count {self.n} does not match matrix of order {w.shape[0]}")
        if not np.array_equal(w, w.T):
            raise ValueError("coupling matrix must be exactly symmetric")
        if not np.all(w >= 0):
            raise ValueError("coupling weights must be nonnegative")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @staticmethod
    def from_weights(weights, symmetrize: bool = False) -> "Network":
        """Build a network, optionally symmetrizing by elementwise max."""
        w = np.asarray(weights, dtype=float)
        if symmetrize:
            w = np.maximum(w, w.T)
        return Network(n=w.shape[0], weights=w)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Network)
            and self.n == other.n
            and np.array_equal(self.weights, other.weights)
        )

    @cached_property
    def _degrees(self) -> np.ndarray:
        d = self.weights.sum(axis=1)
        d.flags.writeable = False
        return d

    @cached_property
    def _normalized(self) -> np.ndarray:
        # Not cached on failure: cached_property retries after a raise.
        d = self._degrees
        zero = np.flatnonzero(d == 0)
        if zero.size:
            raise IsolatedNode(int(zero[0]))
        a = self.weights / d[:, None]
        a.flags.writeable = False
        return a

    def degrees(self) -> np.ndarray:
        """Weighted degrees d_i = sum_j w_ij (row sums)."""
        return self._degrees

    def edge_count(self) -> int:
        """Number of undirected edges with nonzero weight; self-loops count once."""
        upper = np.triu(self.weights)
        return int(np.count_nonzero(upper))


@dataclass(frozen=True, eq=False)
class DegreeData:
    """Weighted degrees, graph Laplacian D - W, and its Fiedler value."""

    degrees: np.ndarray
    laplacian: np.ndarray
    fiedler: float


def laplacian(net: Network) -> np.ndarray:
    """Graph Laplacian D - W of the coupling matrix."""
    d = net.degrees()
    return np.diag(d) - net.weights


def degree_data(net: Network) -> DegreeData:
    """Compute degrees, Laplacian, and the second-smallest Laplacian eigenvalue.

    The Fiedler value is positive exactly when the graph is connected; a
    single-node graph is trivially connected and reports +inf.
    """
    lap = laplacian(net)
    if net.n == 1:
        fiedler = math.inf
    else:
        eigs = np.linalg.eigvalsh(lap)
        fiedler = max(float(eigs[1]), 0.0)
    return DegreeData(degrees=net.degrees(), laplacian=lap, fiedler=fiedler)


def normalized_adjacency(net: Network) -> np.ndarray:
    """Row-stochastic matrix A with A_ij = w_ij / d_i.

    Raises IsolatedNode if some row has no positive entry.
    """
    return net._normalized


def is_connected(net: Network) -> bool:
    """Breadth-first reachability over edges with positive weight."""
    adj = net.weights > 0
    reached = np.zeros(net.n, dtype=bool)
    reached[0] = True
    frontier = reached.copy()
    while frontier.any():
        nxt = adj[frontier].any(axis=0) & ~reached
        reached |= nxt
        frontier = nxt
    return bool(reached.all())


def _check_probability(p: float, name: str) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p}")


def _retry_connected(draw, max_retries: int) -> Network:
    for _ in range(max_retries):
        net = draw()
        if is_connected(net):
            return net
    raise DisconnectedAfterRetries(max_retries)


def erdos_renyi(n: int, p_e: float, seed: int, max_retries: int = DEFAULT_RETRIES) -> Network:
    """Connected Erdos-Renyi sample: each unordered pair kept with probability p_e.

    Resamples up to max_retries times until connected; deterministic in seed.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    _check_probability(p_e, "p_e")
    rng = np.random.default_rng(seed)

    def draw() -> Network:
        mask = np.triu(rng.random((n, n)) < p_e, k=1)
        w = (mask | mask.T).astype(float)
        return Network(n, w)

    return _retry_connected(draw, max_retries)


def stochastic_block_model(
    sizes: list[int],
    p_in: float,
    p_out: float,
    seed: int,
    max_retries: int = DEFAULT_RETRIES,
) -> Network:
    """Connected two-probability SBM: within-block pairs with p_in, across with p_out."""
    if not sizes or any(s < 1 for s in sizes):
        raise ValueError("sizes must be a nonempty list of positive block sizes")
    _check_probability(p_in, "p_in")
    _check_probability(p_out, "p_out")
    labels = np.repeat(np.arange(len(sizes)), sizes)
    n = int(labels.size)
    probs = np.where(labels[:, None] == labels[None, :], p_in, p_out)
    rng = np.random.default_rng(seed)

    def draw() -> Network:
        mask = np.triu(rng.random((n, n)) < probs, k=1)
        w = (mask | mask.T).astype(float)
        return Network(n, w)

    return _retry_connected(draw, max_retries)


def core_periphery(n: int, p_e: float, seed: int) -> Network:
    """Hub node 0 linked to every other node; remaining pairs appear with p_e.

    Connected by construction, so no retry is needed.
    """
    if n < 2:
        raise ValueError("core-periphery graph needs at least 2 nodes")
    _check_probability(p_e, "p_e")
    rng = np.random.default_rng(seed)
    mask = np.triu(rng.random((n, n)) < p_e, k=1)
    mask[0, :] = False
    w = (mask | mask.T).astype(float)
    w[0, 1:] = 1.0
    w[1:, 0] = 1.0
    return Network(n, w)


def complete_graph(n: int) -> Network:
    """Loop-free complete graph with unit weights."""
    if n < 2:
        raise ValueError("complete graph needs at least 2 nodes (no loop-free edge on 1)")
    w = np.ones((n, n)) - np.eye(n)
    return Network(n, w)


def load_edge_list(path, indexing: str = "zero", symmetrize: bool = True) -> Network:
    """Read a whitespace-separated edge list: ``i j [weight]`` per line.

    Lines starting with '#' are comments. Duplicate edges collapse to the max
    weight. Node ids are compacted to 0..n-1 in order of first appearance.
    With symmetrize=False the input must already be exactly symmetric.
    """
    if indexing not in ("zero", "one"):
        raise ValueError("indexing must be 'zero' or 'one'")
    base = 0 if indexing == "zero" else 1
    ids: dict[int, int] = {}
    entries: dict[tuple[int, int], float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            s = raw.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) not in (2, 3):
                raise ParseError(lineno, f"expected 'i j [weight]', got {len(parts)} fields")
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(lineno, "node ids must be integers") from None
            if a < base or b < base:
                raise ParseError(lineno, f"node id below {indexing}-indexed minimum {base}")
            if len(parts) == 3:
                try:
                    w = float(parts[2])
                except ValueError:
                    raise ParseError(lineno, "weight must be a real number") from None
                if not math.isfinite(w):
                    raise ParseError(lineno, "weight must be finite")
            else:
                w = 1.0
            if w < 0:
                raise NegativeWeight(lineno)
            for v in (a, b):
                ids.setdefault(v, len(ids))
            key = (ids[a], ids[b])
            entries[key] = max(entries.get(key, 0.0), w)
    if not ids:
        raise ParseError(0, "edge list contains no edges")
    n = len(ids)
    w = np.zeros((n, n))
    for (a, b), val in entries.items():
        w[a, b] = max(w[a, b], val)
    if symmetrize:
        w = np.maximum(w, w.T)
    elif not np.array_equal(w, w.T):
        raise AsymmetricInput("edge list is not symmetric; pass symmetrize=True to fold directions")
    return Network(n, w)


def save_edge_list(net: Network, path) -> None:
    """Write one ``i j weight`` line per undirected edge (upper triangle).

    When the natural first-appearance order of node ids in the edge stream
    would not reproduce 0..n-1 (isolated or late-appearing nodes), zero-weight
    anchor lines ``k k 0`` are prepended so that loading restores the network
    exactly.
    """
    rows, cols = np.nonzero(np.triu(net.weights))
    order: dict[int, int] = {}
    for i, j in zip(rows, cols):
        order.setdefault(int(i), len(order))
        order.setdefault(int(j), len(order))
    natural = len(order) == net.n and all(order[k] == k for k in range(net.n))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if not natural:
            for k in range(net.n):
                fh.write(f"{k} {k} 0.0\n")
        for i, j in zip(rows, cols):
            fh.write(f"{i} {j} {float(net.weights[i, j])!r}\n")
