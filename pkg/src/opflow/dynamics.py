"""Trajectory integration and discrete iteration with invariant monitoring.

Classical fixed-step RK4 integrates the continuous models; the adaptive
variant halves the step whenever a step would leave the model's invariant
box (the max/min-principle region determined by initial data and
convictions) by more than a tolerance, which is the only error control the
flows here need. Trajectories record time-stamped states together with the
energy (when the model has one) and the opinion spread x_+ - x_-.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDecay, NonpositiveState, StepSizeUnderflow
from .graph import Network
from .models import NfjParams, OpinionState

_METHODS = ("rk4_fixed", "rk4_adaptive")
_MAX_HALVINGS = 20


@dataclass(frozen=True)
class IntegratorConfig:
    """Step size, horizon, stopping rule, and box guard for integrate()."""

    dt: float = 0.01
    t_end: float = 100.0
    method: str = "rk4_fixed"
    stop_tol: float = 1e-10
    record_stride: int = 1
    box_tol: float = 1e-9

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end > self.dt:
            raise ValueError("t_end must exceed dt")
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}")
        if not self.stop_tol > 0:
            raise ValueError("stop_tol must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer")
        if self.box_tol < 0:
            raise ValueError("box_tol must be nonnegative")


@dataclass(eq=False)
class Trajectory:
    """Recorded samples of a run: times, states, per-sample energy and spread."""

    times: np.ndarray
    states: np.ndarray
    energy: np.ndarray | None
    spread: np.ndarray
    converged: bool
    model: str

    @property
    def n_samples(self) -> int:
        return self.times.size

    def final_state(self) -> OpinionState:
        return OpinionState(x=self.states[-1], t=float(self.times[-1]))


@dataclass(frozen=True)
class BoundsReport:
    """Worst transgressions of the invariant box c- <= x_i^p(t) <= c+.

    Transgressions are signed: a value of 0 means the trajectory touches the
    box boundary, negative values are interior margin.
    """

    c_minus: float
    c_plus: float
    max_under: float
    max_over: float

    @property
    def worst(self) -> float:
        return max(self.max_under, self.max_over)


def _rk4(field, x: np.ndarray, h: float, k1: np.ndarray) -> np.ndarray:
    hh = 0.5 * h
    k2 = field(x + hh * k1)
    k3 = field(x + hh * k2)
    k4 = field(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


def _transgression(model, box: tuple[float, float], x: np.ndarray) -> float:
    lo, hi = box
    c = model.box_coords(x)
    return max(lo - float(np.min(c)), float(np.max(c)) - hi)


class _Recorder:
    def __init__(self, model, net):
        self.model = model
        self.net = net
        self.times: list[float] = []
        self.states: list[np.ndarray] = []
        self.energy: list[float] | None = None

    def record(self, t: float, x: np.ndarray) -> None:
        self.times.append(t)
        self.states.append(np.array(x))
        e = self.model.energy(self.net, x)
        if e is not None:
            if self.energy is None:
                self.energy = []
            self.energy.append(float(e))

    def build(self, converged: bool) -> Trajectory:
        states = np.array(self.states)
        return Trajectory(
            times=np.array(self.times),
            states=states,
            energy=None if self.energy is None else np.array(self.energy),
            spread=states.max(axis=1) - states.min(axis=1),
            converged=converged,
            model=self.model.kind,
        )


def integrate(net: Network, model, x0, cfg: IntegratorConfig) -> Trajectory:
    """Integrate dx/dt = field(x) from a strictly positive x0.

    Runs until t_end or until the sup norm of the field drops below
    cfg.stop_tol (the converged flag). In adaptive mode a step that would
    leave the invariant box by more than cfg.box_tol, or leave the positive
    sector, is retried with a halved step, up to 20 halvings.
    """
    x = np.asarray(x0, dtype=float)
    if np.any(x <= 0):
        raise NonpositiveState("initial state must be strictly positive")
    x = model.initialize(x)
    box = model.box_bounds(x)
    adaptive = cfg.method == "rk4_adaptive"
    # Stage evaluations skip per-call validation; positivity is enforced on
    # accepted steps below (NaN-safely, via the negated all-positive test).
    fld = model.raw_field(net)

    rec = _Recorder(model, net)
    rec.record(0.0, x)
    t = 0.0
    steps = 0
    converged = False
    # Tolerance on the time comparison so roundoff never forces a zero-length step.
    t_edge = cfg.t_end - 1e-12 * cfg.dt
    while t < t_edge:
        k1 = fld(x)
        if float(np.abs(k1).max()) < cfg.stop_tol:
            converged = True
            break
        h = min(cfg.dt, cfg.t_end - t)
        if adaptive:
            accepted = False
            for _ in range(_MAX_HALVINGS + 1):
                if h < 1e-12 * cfg.dt:
                    raise StepSizeUnderflow(f"dt underflow at t={t:.6g}")
                x_new = _rk4(fld, x, h, k1)
                if bool(np.all(x_new > 0)) and _transgression(model, box, x_new) <= cfg.box_tol:
                    accepted = True
                    break
                h *= 0.5
            if not accepted:
                raise StepSizeUnderflow(f"invariant box not restored after {_MAX_HALVINGS} halvings at t={t:.6g}")
        else:
            x_new = _rk4(fld, x, h, k1)
            if not bool(np.all(x_new > 0)):
                raise NonpositiveState(f"integrator left the positive sector at t={t + h:.6g}")
        t += h
        x = x_new
        steps += 1
        if steps % cfg.record_stride == 0:
            rec.record(t, x)
    if not converged:
        converged = float(np.abs(fld(x)).max()) < cfg.stop_tol
    if rec.times[-1] != t:
        rec.record(t, x)
    return rec.build(converged)


def iterate_discrete(net: Network, model, x0, steps: int) -> Trajectory:
    """Apply the model's discrete protocol `steps` times, recording every iterate."""
    if getattr(model, "discrete_step", None) is None:
        raise ValueError(f"model {model.kind!r} has no discrete protocol")
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    x = np.asarray(x0, dtype=float)
    if np.any(x <= 0):
        raise NonpositiveState("initial state must be strictly positive", step=0)
    x = model.initialize(x)
    rec = _Recorder(model, net)
    rec.record(0.0, x)
    for k in range(1, steps + 1):
        try:
            x = model.discrete_step(net, x)
        except NonpositiveState as err:
            raise NonpositiveState(str(err.args[0]).split(" (step")[0], step=k) from None
        rec.record(float(k), x)
    return rec.build(converged=False)


def monitor_bounds(traj: Trajectory, params: NfjParams, x0=None) -> BoundsReport:
    """Check the max/min-principle box against every recorded sample.

    The box is c- = min_i min(x_i(0)^p, u_i), c+ = max_i max(x_i(0)^p, u_i),
    and transgressions are measured in x^p coordinates.
    """
    x0 = traj.states[0] if x0 is None else np.asarray(x0, dtype=float)
    p = params.p
    xp0 = x0**p
    c_minus = min(float(np.min(xp0)), float(np.min(params.u)))
    c_plus = max(float(np.max(xp0)), float(np.max(params.u)))
    xp = traj.states**p
    return BoundsReport(
        c_minus=c_minus,
        c_plus=c_plus,
        max_under=float(np.max(c_minus - xp)),
        max_over=float(np.max(xp - c_plus)),
    )


def spread_decay_rate(traj: Trajectory) -> float:
    """Exponential decay rate of the spread x_+ - x_-.

    Least-squares slope of log(spread) over the window where the spread lies
    in [1e-10, 1e-2] times its initial value; returns the positive rate.
    Raises InsufficientDecay when fewer than two samples fall in the window.
    """
    s0 = float(traj.spread[0])
    if s0 <= 0:
        raise InsufficientDecay("initial spread is zero")
    window = (traj.spread >= 1e-10 * s0) & (traj.spread <= 1e-2 * s0) & (traj.spread > 0)
    if int(window.sum()) < 2:
        raise InsufficientDecay("spread never traversed the fitting window")
    slope = np.polyfit(traj.times[window], np.log(traj.spread[window]), 1)[0]
    return -float(slope)


def suggest_dt(net: Network, model, x0, target: float = 1.0) -> float:
    """Step size keeping |J| dt <= target for the model's stiffness bound."""
    bound = model.stiffness_bound(net, np.asarray(x0, dtype=float))
    return target / max(bound, 1e-30)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Long-format trajectory: header ``t,node,value``."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,node,value\n")
        for t, row in zip(traj.times, traj.states):
            ts = _fmt(t)
            for j, v in enumerate(row):
                fh.write(f"{ts},{j},{_fmt(v)}\n")


def write_summary_csv(traj: Trajectory, path) -> None:
    """Per-sample summary: header ``t,energy,spread,mean`` (energy nan if undefined)."""
    energy = traj.energy
    means = traj.states.mean(axis=1)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,energy,spread,mean\n")
        for k in range(traj.n_samples):
            e = float("nan") if energy is None else energy[k]
            fh.write(f"{_fmt(traj.times[k])},{_fmt(e)},{_fmt(traj.spread[k])},{_fmt(means[k])}\n")
