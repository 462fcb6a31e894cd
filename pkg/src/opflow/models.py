"""Opinion models on a network: payouts, update protocols, vector fields, energies.

Three models share the stage. The averaging (Abelson/DeGroot) model relaxes
each opinion toward the neighborhood mean under the row-stochastic normalized
adjacency A. The Taylor model adds linear anchoring to per-agent convictions
u_i with susceptibility lambda_i. The nonlinear model (NFJ) couples through
the raw symmetric matrix M and anchors through the friction-type force
sigma_i (u_i - x_i^p) x_i, which pulls agent i toward u_i^(1/p) with a
strength that grows with the opinion value itself.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DivisionByZeroLambda, NonpositiveState
from .graph import Network, normalized_adjacency


def _as_vector(v, n: int, name: str) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"{name} must be a length-{n} vector, got shape {a.shape}")
    return a


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=a.dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class NfjParams:
    """Parameters of the nonlinear model.

    Convictions u_i are strictly positive, stubbornness sigma_i >= 0, and the
    exponent p > 0 sets the strength of the nonlinearity. An infinite
    sigma_i is encoded by the pinned flag: pinned agents are held at
    u_i^(1/p) exactly and their stored sigma is zeroed/ignored.
    """

    u: np.ndarray
    sigma: np.ndarray
    p: float = 1.0
    pinned: np.ndarray = None

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        if u.ndim != 1 or sigma.shape != u.shape:
            raise ValueError("u and sigma must be vectors of equal length")
        if not np.all(u > 0):
            raise ValueError("convictions u must be strictly positive")
        if not self.p > 0:
            raise ValueError("nonlinearity exponent p must be positive")
        pinned = self.pinned
        if pinned is None:
            pinned = np.zeros(u.shape, dtype=bool)
        else:
            pinned = np.asarray(pinned, dtype=bool)
            if pinned.shape != u.shape:
                raise ValueError("pinned mask must match u in length")
        pinned = pinned | np.isinf(sigma)
        sigma = np.where(pinned, 0.0, sigma)
        if not np.all(np.isfinite(sigma)) or np.any(sigma < 0):
            raise ValueError("sigma must be nonnegative (inf means pinned)")
        object.__setattr__(self, "u", _freeze(u))
        object.__setattr__(self, "sigma", _freeze(sigma))
        object.__setattr__(self, "pinned", _freeze(pinned))
        object.__setattr__(self, "has_pinned", bool(pinned.any()))
        object.__setattr__(self, "_pins", _freeze(u ** (1.0 / self.p)))

    @property
    def n(self) -> int:
        return self.u.size

    def powers(self, x: np.ndarray) -> np.ndarray:
        """x^p with a fast path for the common p = 1."""
        return x if self.p == 1.0 else x**self.p

    def pin_values(self) -> np.ndarray:
        """Target opinions u_i^(1/p) of pinned agents."""
        return self._pins


@dataclass(frozen=True, eq=False)
class TaylorParams:
    """Susceptibilities lambda_i in [0, 1] and convictions u_i >= 0.

    lambda_i = 1 means no anchoring; if every agent has lambda_i = 1 the
    model degenerates to pure averaging, which is flagged with a warning.
    """

    lam: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        u = np.asarray(self.u, dtype=float)
        if lam.ndim != 1 or u.shape != lam.shape:
            raise ValueError("lam and u must be vectors of equal length")
        if np.any(lam < 0) or np.any(lam > 1):
            raise ValueError("lambda entries must lie in [0, 1]")
        if np.any(u < 0):
            raise ValueError("convictions must be nonnegative")
        if np.all(lam == 1.0):
            warnings.warn(
                "all lambda_i = 1: anchoring vanishes and the compromise "
                "equilibrium degenerates to the consensus family",
                RuntimeWarning,
                stacklevel=2,
            )
        object.__setattr__(self, "lam", _freeze(lam))
        object.__setattr__(self, "u", _freeze(u))

    @property
    def n(self) -> int:
        return self.u.size


@dataclass(frozen=True)
class OpinionState:
    """Opinion vector in the open positive sector at time t."""

    x: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if np.any(x <= 0):
            raise NonpositiveState("opinion state must be strictly positive")
        if self.t < 0:
            raise ValueError("time must be nonnegative")
        object.__setattr__(self, "x", _freeze(x))


def _require_positive(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise NonpositiveState()
    return x


# ---------------------------------------------------------------------------
# Payout functions (one agent at a time)
# ---------------------------------------------------------------------------

def payout_abelson(net: Network, x, i: int) -> float:
    """Disagreement cost (1/2) sum_j A_ij (x_i - x_j)^2 of agent i."""
    x = np.asarray(x, dtype=float)
    a = normalized_adjacency(net)[i]
    return 0.5 * float(a @ (x[i] - x) ** 2)


def payout_fj(net: Network, params: TaylorParams, x, i: int) -> float:
    """Taylor payout: lambda-weighted disagreement plus quadratic anchoring.

    (lambda_i/2) sum_j A_ij (x_i - x_j)^2 + ((1 - lambda_i)/2) (x_i - u_i)^2
    """
    x = np.asarray(x, dtype=float)
    lam = params.lam[i]
    return lam * payout_abelson(net, x, i) + 0.5 * (1.0 - lam) * float(
        (x[i] - params.u[i]) ** 2
    )


def payout_nfj(net: Network, params: NfjParams, x, i: int) -> float:
    """Nonlinear payout of agent i.

    (1/2) sum_j M_ij (x_i - x_j)^2 + sigma_i (x_i^(p+2)/(p+2) - u_i x_i^2 / 2)

    The anchoring part is nonconvex; its unique positive stationary point in
    x_i (others fixed) is the agent's best response.
    """
    x = np.asarray(x, dtype=float)
    w = net.weights[i]
    coupling = 0.5 * float(w @ (x[i] - x) ** 2)
    p = params.p
    xi = float(x[i])
    return coupling + float(params.sigma[i]) * (
        xi ** (p + 2.0) / (p + 2.0) - 0.5 * float(params.u[i]) * xi**2
    )


# ---------------------------------------------------------------------------
# Continuous vector fields
# ---------------------------------------------------------------------------

def vector_field_abelson(net: Network, x) -> np.ndarray:
    """dx_i/dt = sum_j A_ij (x_j - x_i); A is row-stochastic so this is Ax - x."""
    x = np.asarray(x, dtype=float)
    a = normalized_adjacency(net)
    return a @ x - x


def vector_field_taylor(net: Network, params: TaylorParams, x) -> np.ndarray:
    """dx_i/dt = lambda_i sum_j A_ij (x_j - x_i) + (1 - lambda_i)(u_i - x_i)."""
    x = np.asarray(x, dtype=float)
    lam = params.lam
    return lam * vector_field_abelson(net, x) + (1.0 - lam) * (params.u - x)


def vector_field_nfj(net: Network, params: NfjParams, x) -> np.ndarray:
    """dx_i/dt = sum_j M_ij (x_j - x_i) + sigma_i (u_i - x_i^p) x_i.

    Pinned agents are sources held at u_i^(1/p); their component is 0.
    Raises NonpositiveState off the positive sector.
    """
    x = _require_positive(x)
    out = net.weights @ x - net.degrees() * x + params.sigma * (params.u - params.powers(x)) * x
    if params.has_pinned:
        out = np.where(params.pinned, 0.0, out)
    return out


def modified_fj_field(net: Network, u, sigma, x) -> np.ndarray:
    """Linear comparison model: dx_i/dt = sum_j M_ij (x_j - x_i) + sigma_i (u_i - x_i).

    Same raw coupling M as the nonlinear model, but with the linear anchoring
    force, so both models see identical (u, sigma) in experiments.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    return net.weights @ x - net.degrees() * x + sigma * (u - x)


# ---------------------------------------------------------------------------
# Discrete update protocols
# ---------------------------------------------------------------------------

def discrete_step_degroot(net: Network, x) -> np.ndarray:
    """x_i(k+1) = sum_j A_ij x_j(k)."""
    x = np.asarray(x, dtype=float)
    return normalized_adjacency(net) @ x


def discrete_step_fj(net: Network, params: TaylorParams, x) -> np.ndarray:
    """x_i(k+1) = lambda_i sum_j A_ij x_j(k) + (1 - lambda_i) u_i."""
    x = np.asarray(x, dtype=float)
    return params.lam * (normalized_adjacency(net) @ x) + (1.0 - params.lam) * params.u


def discrete_step_nfj(net: Network, params: NfjParams, x) -> np.ndarray:
    """x_i(k+1) = sum_j M_ij x_j(k) + sigma_i (u_i - x_i^p(k)) x_i(k).

    Meaningful as a protocol when M is row-(sub)stochastic; exposed for any
    nonnegative M for experimentation. Pinned agents emit u_i^(1/p). An
    iterate leaving the positive sector raises NonpositiveState rather than
    being clamped.
    """
    x = _require_positive(x)
    out = net.weights @ x + params.sigma * (params.u - params.powers(x)) * x
    if params.has_pinned:
        out = np.where(params.pinned, params.pin_values(), out)
    if np.any(out <= 0):
        raise NonpositiveState("discrete update left the positive sector")
    return out


def substochastic_transform(net: Network, params: TaylorParams) -> tuple[np.ndarray, np.ndarray]:
    """Fold susceptibilities into the coupling: B_ij = lambda_j A_ij, sigma_i = (1-lambda_i)/lambda_i.

    B is substochastic (row sums <= 1). Requires lambda_i > 0 for every agent;
    a zero susceptibility must be modeled as a pinned agent instead. B plays a
    coupling-only role here, so a zero-degree node simply contributes a zero
    row rather than failing row normalization.
    """
    lam = params.lam
    if np.any(lam == 0):
        raise DivisionByZeroLambda("lambda_i = 0 cannot be transformed; model the agent as pinned")
    d = net.degrees()
    a = np.divide(net.weights, d[:, None], out=np.zeros_like(net.weights), where=d[:, None] > 0)
    b = a * lam[None, :]
    sigma = (1.0 - lam) / lam
    return b, sigma


def transformed_taylor_field(net: Network, params: TaylorParams, y) -> np.ndarray:
    """Taylor dynamics in the rescaled variables y_i = x_i / lambda_i.

    dy_i/dt = sum_j B_ij (y_j - y_i) + sigma_i u_i + (lambda_i - 1) y_i,
    with (B, sigma) from the substochastic transform.
    """
    y = np.asarray(y, dtype=float)
    b, sigma = substochastic_transform(net, params)
    return b @ y - b.sum(axis=1) * y + sigma * params.u + (params.lam - 1.0) * y


# ---------------------------------------------------------------------------
# Energies (gradient-flow potentials)
# ---------------------------------------------------------------------------

def energy_nfj(net: Network, params: NfjParams, x) -> float:
    """Potential whose negative gradient is the nonlinear vector field.

    Phi(x) = (1/4) sum_ij M_ij (x_i - x_j)^2
             + sum_i sigma_i x_i^(p+2) / (p+2) - (1/2) sum_i sigma_i u_i x_i^2

    Pinned agents contribute only through the coupling term (their stored
    sigma is zero), matching a flow that never moves them.
    """
    x = np.asarray(x, dtype=float)
    w = net.weights
    quad = float(x @ (net.degrees() * x) - x @ (w @ x))  # x^T (D - W) x
    p = params.p
    anchor = float(np.sum(params.sigma * x ** (p + 2.0))) / (p + 2.0)
    drive = 0.5 * float(np.sum(params.sigma * params.u * x**2))
    return 0.5 * quad + anchor - drive


def energy_taylor(net: Network, params: TaylorParams, y) -> float:
    """Potential for the rescaled Taylor flow dy/dt = -grad Phi(y).

    Phi(y) = (1/4) sum_ij B_ij (y_i - y_j)^2
             - sum_k (sigma_k u_k y_k + (1/2)(lambda_k - 1) y_k^2)

    The anchoring sum enters with an overall minus sign so that -grad Phi
    reproduces the transformed field (the quadratic part is then convex,
    (1/2)(1 - lambda_k) y_k^2 >= 0). The gradient identity is exact whenever
    B is symmetric, e.g. constant lambda on a regular graph.
    """
    y = np.asarray(y, dtype=float)
    b, sigma = substochastic_transform(net, params)
    quad = float(y**2 @ (b.sum(axis=1) + b.sum(axis=0)) - 2.0 * (y @ (b @ y)))
    anchor = float(np.sum(sigma * params.u * y)) + 0.5 * float(
        np.sum((params.lam - 1.0) * y**2)
    )
    return 0.25 * quad - anchor


def modified_fj_energy(net: Network, u, sigma, x) -> float:
    """Potential for the linear comparison model.

    Phi(x) = (1/4) sum_ij M_ij (x_i - x_j)^2 + (1/2) sum_i sigma_i (x_i - u_i)^2
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    quad = float(x @ (net.degrees() * x) - x @ (net.weights @ x))
    return 0.5 * quad + 0.5 * float(np.sum(sigma * (x - u) ** 2))


# ---------------------------------------------------------------------------
# Model bundles: parameters plus the operations the integrator needs
# ---------------------------------------------------------------------------

class AbelsonModel:
    """Pure environmental averaging; converges to consensus on connected graphs."""

    kind = "abelson"

    def field(self, net: Network, x) -> np.ndarray:
        return vector_field_abelson(net, x)

    def raw_field(self, net: Network):
        a = normalized_adjacency(net)

        def f(x):
            return a @ x - x

        return f

    def energy(self, net: Network, x):
        return None

    def discrete_step(self, net: Network, x) -> np.ndarray:
        return discrete_step_degroot(net, x)

    def initialize(self, x0: np.ndarray) -> np.ndarray:
        return x0

    def box_bounds(self, x0: np.ndarray) -> tuple[float, float]:
        return float(np.min(x0)), float(np.max(x0))

    def box_coords(self, x: np.ndarray) -> np.ndarray:
        return x

    def stiffness_bound(self, net: Network, x0: np.ndarray) -> float:
        return 2.0


@dataclass(frozen=True)
class TaylorModel:
    """Averaging with linear anchoring; the continuous Friedkin-Johnsen model."""

    params: TaylorParams
    kind: str = field(default="taylor", init=False)

    def field(self, net: Network, x) -> np.ndarray:
        return vector_field_taylor(net, self.params, x)

    def raw_field(self, net: Network):
        a = normalized_adjacency(net)
        lam = self.params.lam
        drive = (1.0 - lam) * self.params.u

        def f(x):
            return lam * (a @ x) - x + drive

        return f

    def energy(self, net: Network, x):
        if np.any(self.params.lam == 0):
            return None
        return energy_taylor(net, self.params, np.asarray(x, float) / self.params.lam)

    def discrete_step(self, net: Network, x) -> np.ndarray:
        return discrete_step_fj(net, self.params, x)

    def initialize(self, x0: np.ndarray) -> np.ndarray:
        return x0

    def box_bounds(self, x0: np.ndarray) -> tuple[float, float]:
        lo = min(float(np.min(x0)), float(np.min(self.params.u)))
        hi = max(float(np.max(x0)), float(np.max(self.params.u)))
        return lo, hi

    def box_coords(self, x: np.ndarray) -> np.ndarray:
        return x

    def stiffness_bound(self, net: Network, x0: np.ndarray) -> float:
        return 2.0


@dataclass(frozen=True)
class NfjModel:
    """Nonlinear anchoring over the raw coupling matrix M."""

    params: NfjParams
    kind: str = field(default="nfj", init=False)

    def field(self, net: Network, x) -> np.ndarray:
        return vector_field_nfj(net, self.params, x)

    def raw_field(self, net: Network):
        w = net.weights
        d = net.degrees()
        u, sigma, p = self.params.u, self.params.sigma, self.params.p
        pinned = self.params.pinned if self.params.has_pinned else None
        if p == 1.0:

            def f(x):
                out = w @ x + x * (sigma * (u - x) - d)
                return out if pinned is None else np.where(pinned, 0.0, out)

        else:

            def f(x):
                out = w @ x + x * (sigma * (u - x**p) - d)
                return out if pinned is None else np.where(pinned, 0.0, out)

        return f

    def energy(self, net: Network, x):
        return energy_nfj(net, self.params, x)

    def discrete_step(self, net: Network, x) -> np.ndarray:
        return discrete_step_nfj(net, self.params, x)

    def initialize(self, x0: np.ndarray) -> np.ndarray:
        if self.params.has_pinned:
            return np.where(self.params.pinned, self.params.pin_values(), x0)
        return x0

    def box_bounds(self, x0: np.ndarray) -> tuple[float, float]:
        # Invariant box in x^p coordinates: c- <= x_i^p(t) <= c+.
        xp = self.params.powers(np.asarray(x0, float))
        lo = min(float(np.min(xp)), float(np.min(self.params.u)))
        hi = max(float(np.max(xp)), float(np.max(self.params.u)))
        return lo, hi

    def box_coords(self, x: np.ndarray) -> np.ndarray:
        return self.params.powers(x)

    def stiffness_bound(self, net: Network, x0: np.ndarray) -> float:
        lo, hi = self.box_bounds(np.asarray(x0, float))
        p, u, sigma = self.params.p, self.params.u, self.params.sigma
        shift = sigma * np.maximum(np.abs((p + 1.0) * hi - u), np.abs((p + 1.0) * lo - u))
        return 2.0 * float(np.max(net.degrees())) + float(np.max(shift, initial=0.0))


@dataclass(frozen=True)
class ModifiedFjModel:
    """Linear-anchoring twin of the nonlinear model over the same raw coupling M."""

    u: np.ndarray
    sigma: np.ndarray
    kind: str = field(default="modified_fj", init=False)

    def __post_init__(self):
        object.__setattr__(self, "u", _freeze(np.asarray(self.u, dtype=float)))
        object.__setattr__(self, "sigma", _freeze(np.asarray(self.sigma, dtype=float)))
        if self.u.shape != self.sigma.shape or self.u.ndim != 1:
            raise ValueError("u and sigma must be vectors of equal length")
        if np.any(self.sigma < 0):
            raise ValueError("sigma must be nonnegative")

    def field(self, net: Network, x) -> np.ndarray:
        return modified_fj_field(net, self.u, self.sigma, x)

    def raw_field(self, net: Network):
        w = net.weights
        shift = net.degrees() + self.sigma
        drive = self.sigma * self.u

        def f(x):
            return w @ x - shift * x + drive

        return f

    def energy(self, net: Network, x):
        return modified_fj_energy(net, self.u, self.sigma, x)

    discrete_step = None

    def initialize(self, x0: np.ndarray) -> np.ndarray:
        return x0

    def box_bounds(self, x0: np.ndarray) -> tuple[float, float]:
        lo = min(float(np.min(x0)), float(np.min(self.u)))
        hi = max(float(np.max(x0)), float(np.max(self.u)))
        return lo, hi

    def box_coords(self, x: np.ndarray) -> np.ndarray:
        return x

    def stiffness_bound(self, net: Network, x0: np.ndarray) -> float:
        return 2.0 * float(np.max(net.degrees())) + float(np.max(self.sigma, initial=0.0))
