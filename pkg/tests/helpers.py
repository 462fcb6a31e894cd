"""Shared test utilities: oracles and instance factories."""

from __future__ import annotations

import numpy as np

from opflow.graph import Network, erdos_renyi


def fd_gradient(fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        grad[i] = (fn(x + step) - fn(x - step)) / (2.0 * h)
    return grad


def fd_jacobian(fn, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian of a vector function."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        cols.append((fn(x + step) - fn(x - step)) / (2.0 * h))
    return np.array(cols).T


def random_weighted_network(n: int, seed: int, density: float = 0.5, w_max: float = 2.0) -> Network:
    """Connected random graph with uniform positive edge weights."""
    rng = np.random.default_rng(seed)
    for attempt in range(200):
        mask = np.triu(rng.random((n, n)) < density, k=1)
        w = np.where(mask, rng.uniform(0.1, w_max, size=(n, n)), 0.0)
        w = np.triu(w, k=1)
        w = w + w.T
        net = Network(n, w)
        from opflow.graph import is_connected

        if is_connected(net):
            return net
    raise RuntimeError("could not sample a connected weighted graph")


def random_nfj_instance(seed: int, n_max: int = 50, u_range=(0.5, 100.0), sigma_range=(0.0, 5.0), p_choices=(1.0, 2.0)):
    """Random connected instance with parameter ranges from the acceptance suite."""
    from opflow.models import NfjParams

    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, n_max + 1))
    net = erdos_renyi(n, min(1.0, 4.0 / n + 0.1), seed=seed + 1000)
    u = rng.uniform(*u_range, size=n)
    sigma = rng.uniform(*sigma_range, size=n)
    p = float(rng.choice(p_choices))
    return net, NfjParams(u=u, sigma=sigma, p=p)


def two_node_unit_edge() -> Network:
    return Network.from_weights([[0.0, 1.0], [1.0, 0.0]])


def refine_two_node_root(u=(1.0, 4.0), sigma=(1.0, 1.0), p=1.0) -> np.ndarray:
    """Grid search plus local shrink refinement for the 2-node steady state.

    Independent of the production Newton path: scans [min u, max u]^2 for the
    minimal sup-norm residual of
        F1 = x1 - x2 + sigma1 (x1^p - u1) x1
        F2 = x2 - x1 + sigma2 (x2^p - u2) x2
    then shrinks a local grid around the incumbent ten times.
    """
    u1, u2 = u
    s1, s2 = sigma

    def resid(x1, x2):
        f1 = x1 - x2 + s1 * (x1**p - u1) * x1
        f2 = x2 - x1 + s2 * (x2**p - u2) * x2
        return np.maximum(np.abs(f1), np.abs(f2))

    lo = min(u1, u2) ** (1.0 / p)
    hi = max(u1, u2) ** (1.0 / p)
    xs = np.arange(lo, hi + 1e-9, 1e-3)
    g1, g2 = np.meshgrid(xs, xs, indexing="ij")
    r = resid(g1, g2)
    k = np.unravel_index(np.argmin(r), r.shape)
    best = np.array([g1[k], g2[k]])
    span = 2e-3
    for _ in range(12):
        xs1 = np.linspace(best[0] - span, best[0] + span, 21)
        xs2 = np.linspace(best[1] - span, best[1] + span, 21)
        g1, g2 = np.meshgrid(xs1, xs2, indexing="ij")
        r = resid(g1, g2)
        k = np.unravel_index(np.argmin(r), r.shape)
        best = np.array([g1[k], g2[k]])
        span /= 8.0
    return best
