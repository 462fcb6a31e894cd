"""Steady states of the nonlinear model and their certification.

The steady-state equation is encoded by the map

    F(x)_i = d_i x_i - sum_j M_ij x_j + sigma_i (x_i^p - u_i) x_i,

whose roots are exactly the equilibria of the continuous flow. Its Jacobian
G - M (G diagonal) is, at any positive root, a symmetric M-matrix with
strictly positive eigenvalues, which is what certify() checks numerically:
smallest eigenvalue via a symmetric eigensolver, and positivity of all
leading principal minors via an incremental (Cholesky) factorization.
Uniqueness is verified empirically by multistart, and Nash optimality by a
per-agent best-response grid search over the payout.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import IntegratorConfig, integrate, suggest_dt
from .errors import (
    MaxIterExceeded,
    MultistartMismatch,
    NashViolation,
    NonpositiveState,
    SingularJacobian,
    SingularSystem,
)
from .graph import Network, laplacian, normalized_adjacency
from .models import NfjModel, NfjParams, TaylorParams, payout_nfj, vector_field_nfj

_DEGENERATE_EIG = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    """Newton solver settings: residual target, damping, multistart count."""

    tol: float = 1e-12
    max_iter: int = 100
    starts: int = 100
    armijo_c: float = 1e-4
    max_backtracks: int = 30

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1 or self.starts < 1:
            raise ValueError("max_iter and starts must be at least 1")


@dataclass(frozen=True, eq=False)
class EquilibriumCertificate:
    """Solved steady state with stability, uniqueness, and Nash evidence."""

    x_star: np.ndarray
    residual: float
    jac_min_eig: float | None = None
    m_matrix_ok: bool | None = None
    nash_ok: bool | None = None
    multistart_agreement: float | None = None
    degenerate_consensus: bool = False
    n_iter: int | None = None
    seed: int | None = None

    def to_json_dict(self, params_echo: dict | None = None) -> dict:
        return {
            "x_star": [float(v) for v in self.x_star],
            "residual": float(self.residual),
            "jac_min_eig": None if self.jac_min_eig is None else float(self.jac_min_eig),
            "m_matrix_ok": self.m_matrix_ok,
            "nash_ok": self.nash_ok,
            "multistart_agreement": None
            if self.multistart_agreement is None
            else float(self.multistart_agreement),
            "degenerate_consensus": self.degenerate_consensus,
            "params_echo": params_echo,
            "seed": self.seed,
        }


def f_map(net: Network, params: NfjParams, x) -> np.ndarray:
    """Steady-state residual map; F(x) = 0 iff x solves the steady equation.

    F(x) = -(vector field) on free agents. Pinned agents report their offset
    from the pin value u_i^(1/p), so F(x) = 0 still characterizes equilibria.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise NonpositiveState()
    d = net.degrees()
    out = d * x - net.weights @ x + params.sigma * (x**params.p - params.u) * x
    if params.pinned.any():
        out = np.where(params.pinned, x - params.pin_values(), out)
    return out


def jacobian_nfj(net: Network, params: NfjParams, x) -> np.ndarray:
    """Jacobian of f_map: G - M with g_i = d_i + sigma_i ((p+1) x_i^p - u_i).

    Symmetric whenever no agent is pinned; pinned rows reduce to the identity.
    """
    x = np.asarray(x, dtype=float)
    p = params.p
    g = net.degrees() + params.sigma * ((p + 1.0) * x**p - params.u)
    jac = np.diag(g) - net.weights
    if params.pinned.any():
        idx = np.flatnonzero(params.pinned)
        jac[idx, :] = 0.0
        jac[idx, idx] = 1.0
    return jac


def default_start(params: NfjParams) -> np.ndarray:
    """Conviction-based start clamp(u, min u, max u)^(1/p), inside the root box."""
    u = params.u
    return np.clip(u, u.min(), u.max()) ** (1.0 / params.p)


def _energy_descent_steps(net, params, x, f, free, armijo_c, count=25):
    """Globalization fallback: backtracked steps along -F, descending the flow energy.

    The energy's stationary points in the positive sector are exactly the
    roots of F, and the field points inward at the boundary of the sector,
    so these steps cannot stall where the Newton merit can.
    """
    from .models import energy_nfj

    d = net.degrees()
    phi = energy_nfj(net, params, x)
    for _ in range(count):
        g = f[free]
        gg = float(g @ g)
        if gg == 0.0:
            break
        xp_hi = max(float(np.max(x**params.p)), float(params.u.max()))
        lips = 2.0 * float(np.max(d)) + float(
            np.max(params.sigma * np.maximum((params.p + 1.0) * xp_hi - params.u, params.u), initial=0.0)
        )
        eta = 4.0 / max(lips, 1e-30)
        for _ in range(60):
            x_try = x.copy()
            x_try[free] = x[free] - eta * g
            if np.all(x_try[free] > 0):
                phi_try = energy_nfj(net, params, x_try)
                if phi_try <= phi - armijo_c * eta * gg:
                    break
            eta *= 0.5
        else:
            return x, f, phi, False
        x, phi = x_try, phi_try
        f = f_map(net, params, x)
    return x, f, phi, True


def newton_solve(
    net: Network,
    params: NfjParams,
    x0=None,
    cfg: SolverConfig | None = None,
) -> EquilibriumCertificate:
    """Damped Newton on f_map with a positivity-safeguarded Armijo line search.

    The step fraction is halved (up to cfg.max_backtracks times) until the
    iterate is strictly positive and the squared residual satisfies the
    Armijo decrease with c = cfg.armijo_c. Pinned agents are eliminated from
    the linear system; their coordinates stay at the pin value. When the
    merit line search stalls, either a plain full step is kept (near a root,
    where roundoff flattens the merit) or a short run of energy-descent
    steps re-globalizes the iterate before Newton resumes.
    """
    cfg = cfg or SolverConfig()
    free = ~params.pinned
    x = default_start(params) if x0 is None else np.asarray(x0, dtype=float).copy()
    if np.any(x <= 0):
        raise NonpositiveState("Newton start must be strictly positive")
    if params.pinned.any():
        x = np.where(params.pinned, params.pin_values(), x)
    f = f_map(net, params, x)
    merit = 0.5 * float(f[free] @ f[free])
    best_x, best_r = x, float(np.max(np.abs(f)))
    stagnant = 0
    for it in range(cfg.max_iter):
        residual = float(np.max(np.abs(f)))
        if residual < best_r:
            best_x, best_r = x, residual
        if residual < cfg.tol:
            return EquilibriumCertificate(x_star=x, residual=residual, n_iter=it)
        jac = jacobian_nfj(net, params, x)[np.ix_(free, free)]
        try:
            dx = np.linalg.solve(jac, -f[free])
        except np.linalg.LinAlgError:
            raise SingularJacobian(f"Jacobian solve failed at iteration {it}") from None
        # For Newton steps the directional derivative of the merit is -2*merit.
        frac = 1.0
        accepted = False
        for _ in range(cfg.max_backtracks + 1):
            x_try = x.copy()
            x_try[free] = x[free] + frac * dx
            if np.all(x_try[free] > 0):
                f_try = f_map(net, params, x_try)
                m_try = 0.5 * float(f_try[free] @ f_try[free])
                if m_try <= merit * (1.0 - 2.0 * cfg.armijo_c * frac):
                    x, f, merit = x_try, f_try, m_try
                    accepted = True
                    break
            frac *= 0.5
        if accepted:
            stagnant = 0
            continue
        # Full-step polish: near a root the merit sits at its roundoff floor
        # and Armijo cannot certify decrease, but the plain step still
        # improves the sup-norm residual.
        x_full = x.copy()
        x_full[free] = x[free] + dx
        if np.all(x_full[free] > 0):
            f_full = f_map(net, params, x_full)
            if float(np.max(np.abs(f_full))) < residual:
                x, f = x_full, f_full
                merit = 0.5 * float(f[free] @ f[free])
                stagnant = 0
                continue
        x, f, _, ok = _energy_descent_steps(net, params, x, f, free, cfg.armijo_c)
        new_merit = 0.5 * float(f[free] @ f[free])
        # Only iterations where no path makes progress count as stagnation
        # (they indicate bouncing on the roundoff floor).
        stagnant = stagnant + 1 if new_merit >= merit or not ok else 0
        merit = new_merit
        if stagnant >= 3:
            break
    residual = float(np.max(np.abs(f)))
    if residual < best_r:
        best_x, best_r = x, residual
    if best_r < cfg.tol:
        return EquilibriumCertificate(x_star=best_x, residual=best_r, n_iter=cfg.max_iter)
    raise MaxIterExceeded(f"residual {best_r:.3e} above tol after {cfg.max_iter} iterations")


def certify(net: Network, params: NfjParams, x_star) -> EquilibriumCertificate:
    """Stability certificate at a candidate steady state.

    jac_min_eig comes from a symmetric eigensolver on the free-agent block of
    G - M; m_matrix_ok holds when all leading principal minors are positive,
    checked by attempting a Cholesky factorization (its pivots grow the
    leading-minor chain) and cross-checked against the eigenvalue sign. A
    near-zero smallest eigenvalue flags the degenerate consensus family of
    the sigma = 0 limit.
    """
    x_star = np.asarray(x_star, dtype=float)
    free = ~params.pinned
    residual = float(np.max(np.abs(f_map(net, params, x_star))))
    jac = jacobian_nfj(net, params, x_star)[np.ix_(free, free)]
    jac_min_eig = float(np.linalg.eigvalsh(jac)[0])
    try:
        np.linalg.cholesky(jac)
        leading_minors_ok = True
    except np.linalg.LinAlgError:
        leading_minors_ok = False
    # An eigenvalue at the roundoff floor (sigma = 0 Laplacian kernel) must
    # not certify positivity even if the factorization's pivots squeak by.
    floor = 1e-12 * max(1.0, float(np.max(np.abs(np.diag(jac)))))
    m_matrix_ok = bool(leading_minors_ok and jac_min_eig > floor)
    return EquilibriumCertificate(
        x_star=x_star,
        residual=residual,
        jac_min_eig=jac_min_eig,
        m_matrix_ok=m_matrix_ok,
        degenerate_consensus=jac_min_eig <= _DEGENERATE_EIG,
    )


def multistart_uniqueness(
    net: Network,
    params: NfjParams,
    cfg: SolverConfig | None = None,
    seed: int = 0,
) -> EquilibriumCertificate:
    """Empirical uniqueness: Newton from cfg.starts log-uniform samples.

    Starts are drawn log-uniformly per coordinate in [min u, max u]^(1/p).
    Raises MultistartMismatch if any two converged roots differ by more than
    1e-6 times the sup norm of the reference root; otherwise returns the
    certificate with multistart_agreement filled.
    """
    cfg = cfg or SolverConfig()
    base = newton_solve(net, params, cfg=cfg)
    roots = [base.x_star]
    invp = 1.0 / params.p
    lo = float(params.u.min()) ** invp
    hi = float(params.u.max()) ** invp
    rng = np.random.default_rng(seed)
    free = ~params.pinned
    for _ in range(cfg.starts - 1):
        if lo == hi:
            x0 = np.full(params.n, lo)
        else:
            x0 = np.exp(rng.uniform(np.log(lo), np.log(hi), size=params.n))
        x0 = np.where(free, x0, params.pin_values())
        roots.append(newton_solve(net, params, x0=x0, cfg=cfg).x_star)
    stack = np.array(roots)
    if len(roots) == 1:
        agreement = 0.0
    else:
        agreement = float(np.max(np.abs(stack[:, None, :] - stack[None, :, :])))
    limit = 1e-6 * float(np.max(np.abs(base.x_star)))
    if agreement > limit:
        raise MultistartMismatch(agreement, limit)
    cert = certify(net, params, base.x_star)
    return replace(cert, multistart_agreement=agreement, n_iter=base.n_iter, seed=seed)


def _payout_on_grid(net: Network, params: NfjParams, x_star: np.ndarray, i: int, cand: np.ndarray) -> np.ndarray:
    diffs = cand[:, None] - x_star[None, :]
    diffs[:, i] = 0.0  # deviating agent moves both occurrences of x_i
    coupling = 0.5 * (diffs**2) @ net.weights[i]
    p = params.p
    anchor = params.sigma[i] * (cand ** (p + 2.0) / (p + 2.0) - 0.5 * params.u[i] * cand**2)
    return coupling + anchor


def verify_nash(net: Network, params: NfjParams, x_star, grid: int = 1001) -> bool:
    """Best-response check: no unilateral deviation on a 1-D grid pays off.

    For every free agent the payout is scanned over `grid` points spanning
    [c_-^(1/p)/2, 2 c_+^(1/p)] with c_- = min u and c_+ = max u, and the
    stationarity of the payout at x_star is confirmed by a central
    finite-difference derivative. Raises NashViolation identifying the agent
    with the most profitable deviation.
    """
    x_star = np.asarray(x_star, dtype=float)
    if np.any(x_star <= 0):
        raise NonpositiveState()
    invp = 1.0 / params.p
    lo = 0.5 * float(params.u.min()) ** invp
    hi = 2.0 * float(params.u.max()) ** invp
    cand = np.linspace(lo, hi, grid)
    worst = None
    for i in range(params.n):
        if params.pinned[i]:
            continue
        base = payout_nfj(net, params, x_star, i)
        payouts = _payout_on_grid(net, params, x_star, i, cand)
        k = int(np.argmin(payouts))
        improvement = base - float(payouts[k])
        # Five-point central stencil: exact for the quartic payouts of p in {1, 2},
        # and large enough steps to stay above cancellation noise.
        h = 1e-3 * (1.0 + abs(float(x_star[i])))
        pts = x_star[i] + h * np.array([-2.0, -1.0, 1.0, 2.0])
        g = _payout_on_grid(net, params, x_star, i, pts)
        deriv = float((g[0] - 8.0 * g[1] + 8.0 * g[2] - g[3]) / (12.0 * h))
        if improvement > 1e-9 or abs(deriv) > 1e-8:
            score = max(improvement, abs(deriv))
            if worst is None or score > worst[0]:
                worst = (score, i, float(cand[k]), improvement)
    if worst is not None:
        _, agent, candidate, improvement = worst
        raise NashViolation(agent, candidate, improvement)
    return True


def taylor_equilibrium(net: Network, params: TaylorParams) -> np.ndarray:
    """Closed-form Taylor steady state: x* = (I - Lambda A)^(-1) (I - Lambda) u."""
    lam = params.lam
    if np.all(lam == 1.0):
        raise SingularSystem("all lambda_i = 1: the steady states form the consensus family")
    a = normalized_adjacency(net)
    system = np.eye(net.n) - lam[:, None] * a
    try:
        return np.linalg.solve(system, (1.0 - lam) * params.u)
    except np.linalg.LinAlgError:
        raise SingularSystem("I - Lambda A is singular") from None


def taylor_jacobian_check(net: Network, params: TaylorParams) -> float:
    """Smallest eigenvalue of I - Lambda A, via a symmetrizing similarity.

    Lambda D^-1 M shares its spectrum with the symmetric S M S for
    S = (Lambda D^-1)^(1/2), so the result is real; it is positive on a
    connected graph whenever some lambda_i < 1.
    """
    d = net.degrees()
    if np.any(d == 0):
        # Delegate the isolated-node error to the shared path.
        normalized_adjacency(net)
    s = np.sqrt(params.lam / d)
    sym = s[:, None] * net.weights * s[None, :]
    return 1.0 - float(np.linalg.eigvalsh(sym)[-1])


def modified_fj_equilibrium(net: Network, u, sigma) -> np.ndarray:
    """Steady state of the linear comparison model: (L + diag sigma) x = sigma u."""
    sigma = np.asarray(sigma, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.all(sigma == 0):
        raise SingularSystem("all sigma_i = 0: consensus family, no unique steady state")
    try:
        return np.linalg.solve(laplacian(net) + np.diag(sigma), sigma * u)
    except np.linalg.LinAlgError:
        raise SingularSystem("L + diag(sigma) is singular") from None


def perturbation_decay_rate(
    net: Network,
    params: NfjParams,
    x_star,
    rate_hint: float,
    eps: float = 1e-3,
    seed: int = 0,
) -> float:
    """Measured exponential decay rate of a random perturbation of x_star.

    Integrates from x_star + eps*v (v a random unit vector over free agents)
    and fits log ||x(t) - x_star|| on the late window where the distance has
    fallen to [1e-8, 1e-5] of its initial value, by which point faster modes
    are negligible relative to the slowest one.
    """
    x_star = np.asarray(x_star, dtype=float)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(params.n)
    v[params.pinned] = 0.0
    v /= np.linalg.norm(v)
    x0 = x_star + eps * v
    if np.any(x0 <= 0):
        raise ValueError("perturbation left the positive sector; reduce eps")
    model = NfjModel(params)
    dt = min(0.01, suggest_dt(net, model, x0))
    t_end = 1.5 * np.log(1e8) / max(rate_hint, 1e-12)
    cfg = IntegratorConfig(dt=dt, t_end=t_end, method="rk4_adaptive", stop_tol=1e-30, record_stride=1)
    traj = integrate(net, model, x0, cfg)
    dist = np.linalg.norm(traj.states - x_star[None, :], axis=1)
    d0 = dist[0]
    window = (dist >= 1e-8 * d0) & (dist <= 1e-5 * d0) & (dist > 0)
    if int(window.sum()) < 2:
        raise ValueError("perturbation decay never traversed the fitting window")
    slope = np.polyfit(traj.times[window], np.log(dist[window]), 1)[0]
    return -float(slope)


def residual_norm(net: Network, params: NfjParams, x) -> float:
    """Sup norm of the steady-state residual; equals the field sup norm."""
    return float(np.max(np.abs(f_map(net, params, x))))


def field_residual(net: Network, params: NfjParams, x) -> float:
    """Sup norm of the continuous vector field at x."""
    return float(np.max(np.abs(vector_field_nfj(net, params, x))))
