"""Momentum-aware trajectory refinement.

The running cost couples kinetic energy, an external momentum-modulation
force, an acceleration (momentum-change) penalty, and an uncertainty trace,
integrated by trapezoid over the sampled horizon with a terminal-deviation
regularizer. Minimization is projected gradient descent with Armijo
backtracking over the free position samples; the boundary samples are never
touched, which is what carries momentum consistency across replanning
segments.

Velocities and accelerations entering the cost are derived from the position
samples by finite differences (central in the interior, one-sided at the
ends), so the cost is a pure function of the position trace and the descent
contract is exact. All internals are shape-generic over leading batch axes:
the simulator descends a whole cluster in lockstep through the same code
that optimizes a single candidate.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .endpoint_regulation import RegulationConfig, regulation_energy
from .errors import CoincidentNeighbor
from .frenet_geometry import FrenetState, ReferencePath
from .quintic_sampling import TrajectoryCandidate

_COINCIDENT_DIST = 1e-9

# Nodes held fixed at each end of the horizon. Two nodes (not one) because
# the end-weighted trapezoid rows unbalance the adjoint of the one-sided
# difference stencils there: a single-node boundary lets the minimizer grow
# an acceleration kink at the first interior sample. With a two-node buffer
# every free node sees only interior-centered stencils with uniform weights,
# so smooth states have O(h) gradients and refinements stay smooth.
_FIXED_EDGE = 2

_MAX_BACKTRACKS = 40


@dataclass
class KinematicModel:
    """Linear kinematic evolution: two chained double integrators.

    State ordering [s, s_dot, s_ddot, d, d_dot, d_ddot]; the control enters
    the third derivative of each axis. Kept as the model contract for the
    discretized optimizer, not as a separate solver.
    """

    A: np.ndarray = field(default_factory=lambda: _chain_a())
    B: np.ndarray = field(default_factory=lambda: _chain_b())
    C: np.ndarray = field(default_factory=lambda: np.eye(6))
    D: np.ndarray = field(default_factory=lambda: np.zeros((6, 2)))

    def derivative(self, state, control):
        return self.A @ np.asarray(state, float) + self.B @ np.asarray(control, float)

    def observe(self, state, control):
        return self.C @ np.asarray(state, float) + self.D @ np.asarray(control, float)


def _chain_a() -> np.ndarray:
    a = np.zeros((6, 6))
    a[0, 1] = a[1, 2] = 1.0
    a[3, 4] = a[4, 5] = 1.0
    return a


def _chain_b() -> np.ndarray:
    b = np.zeros((6, 2))
    b[2, 0] = 1.0
    b[5, 1] = 1.0
    return b


@dataclass(frozen=True)
class OptimizerConfig:
    """Weights and solver controls for the momentum-aware refinement."""

    mass: float = 1.0
    accel_weight: float = 0.1
    uncertainty_weight: float = 0.05
    terminal_weight: float = 1.0
    dt: float = 0.05
    max_iters: int = 50
    armijo_c: float = 1e-4
    step_shrink: float = 0.5
    grad_tol: float = 1e-6

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if min(self.accel_weight, self.uncertainty_weight, self.terminal_weight) < 0:
            raise ValueError("weights must be nonnegative")
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if not 0 < self.step_shrink < 1:
            raise ValueError("step_shrink must lie in (0, 1)")
        if self.dt <= 0 or self.max_iters < 0:
            raise ValueError("dt must be positive and max_iters nonnegative")


@dataclass(frozen=True)
class AssistiveParams:
    """Bounded guidance shaping: pace restoring plus lateral centering.

    ``bumps`` is a tuple of (center, width, amplitude) Gaussian bumps whose
    clipped sum is the surface-irregularity factor along arc length.
    """

    target_speed: float = 1.0
    speed_gain: float = 0.4
    centering_gain: float = 0.3
    damping_gain: float = 0.2
    max_force: float = 3.0
    bumps: tuple = ()

    def __post_init__(self):
        object.__setattr__(
            self, "bumps", tuple((float(c), float(w), float(a)) for c, w, a in self.bumps)
        )
        if self.max_force <= 0:
            raise ValueError("max_force must be positive")
        for _, width, amp in self.bumps:
            if width <= 0 or not 0 <= amp <= 1:
                raise ValueError("bump widths must be positive, amplitudes in [0, 1]")


@dataclass(frozen=True)
class InteractionParams:
    """Bounded repulsion from surrounding agents."""

    max_intensity: float = 2.0
    range_scale: float = 0.8
    speed_scale: float = 1.0
    cutoff: float = 4.0

    def __post_init__(self):
        if min(self.max_intensity, self.range_scale, self.speed_scale, self.cutoff) <= 0:
            raise ValueError("interaction parameters must be positive")


@dataclass
class Neighbor:
    """Surrounding agent: Cartesian position/velocity and uncertainty trace."""

    position: np.ndarray
    velocity: np.ndarray
    covariance_trace: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)
        if self.covariance_trace < 0 or not np.all(
            np.isfinite(self.position)
        ) or not np.all(np.isfinite(self.velocity)):
            raise ValueError("neighbor state must be finite with nonnegative trace")


@dataclass
class PlanningContext:
    """Read-only environment for one planning cycle.

    Neighbors move at constant velocity within the horizon; the uncertainty
    trace is the scenario baseline plus the neighbor covariance traces.
    """

    path: ReferencePath
    assistive: AssistiveParams
    interaction: InteractionParams
    neighbors: tuple = ()
    sigma_baseline: float = 0.0

    def sigma_trace(self) -> float:
        return float(self.sigma_baseline) + sum(
            nb.covariance_trace for nb in self.neighbors
        )


def _bumps(s, params: AssistiveParams):
    """Clipped Gaussian-bump sum beta(s) in [0, 1] and its derivative."""
    s = np.asarray(s, dtype=float)
    beta = np.zeros_like(s)
    dbeta = np.zeros_like(s)
    for center, width, amp in params.bumps:
        g = amp * np.exp(-0.5 * ((s - center) / width) ** 2)
        beta += g
        dbeta += g * (-(s - center) / width**2)
    over = beta > 1.0
    beta = np.where(over, 1.0, beta)
    dbeta = np.where(over, 0.0, dbeta)
    return beta, dbeta


def surface_irregularity(s, params: AssistiveParams):
    """Surface-irregularity factor beta(s), clipped to [0, 1]."""
    beta, _ = _bumps(s, params)
    return beta if np.ndim(s) else float(beta)


def assistive_force(state: FrenetState, params: AssistiveParams) -> np.ndarray:
    """Guidance force in Frenet components, saturated to ``max_force``."""
    beta = surface_irregularity(state.s, params)
    raw = np.array(
        [
            -params.speed_gain * (state.s_dot - params.target_speed) * (1.0 + beta),
            -params.centering_gain * state.d - params.damping_gain * state.d_dot,
        ]
    )
    norm = float(np.linalg.norm(raw))
    if norm > params.max_force:
        raw *= params.max_force / norm
    return raw


def interaction_force(agent_pos, agent_vel, neighbors, params: InteractionParams) -> np.ndarray:
    """Summed repulsion in Cartesian coordinates.

    Intensity is max_intensity * min(1, exp(-r/range_scale) * (1 + dv/speed_scale))
    along the unit vector from neighbor to agent; neighbors beyond the cutoff
    contribute exactly zero.
    """
    agent_pos = np.asarray(agent_pos, dtype=float)
    agent_vel = np.asarray(agent_vel, dtype=float)
    total = np.zeros(2)
    for nb in neighbors:
        rvec = agent_pos - nb.position
        r = float(np.linalg.norm(rvec))
        if r < _COINCIDENT_DIST:
            raise CoincidentNeighbor("neighbor coincides with the agent")
        if r > params.cutoff:
            continue
        dv = float(np.linalg.norm(agent_vel - nb.velocity))
        intensity = params.max_intensity * min(
            1.0, np.exp(-r / params.range_scale) * (1.0 + dv / params.speed_scale)
        )
        total += intensity * rvec / r
    return total


def lagrangian_at(
    state: FrenetState, v_dot, f_ext, sigma_trace: float, config: OptimizerConfig
) -> float:
    """Running cost at one state: kinetic - modulation + accel + uncertainty."""
    v = np.array([state.s_dot, state.d_dot])
    v_dot = np.asarray(v_dot, dtype=float)
    f_ext = np.asarray(f_ext, dtype=float)
    return float(
        0.5 * config.mass * (v @ v)
        - f_ext @ v
        + config.accel_weight * (v_dot @ v_dot)
        + config.uncertainty_weight * sigma_trace
    )


# --- batched force field and its state Jacobian -------------------------------
# All helpers below treat the node axis as the last axis and broadcast over
# any leading batch axes.

def _dot(a, b):
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1]


def _assistive_batch(s, vs, d, vd, params: AssistiveParams, want_jac: bool):
    """Saturated guidance force per node; Jacobian columns are (s, vs, d, vd)."""
    beta, dbeta = _bumps(s, params)
    raw = np.stack(
        [
            -params.speed_gain * (vs - params.target_speed) * (1.0 + beta),
            -params.centering_gain * d - params.damping_gain * vd,
        ],
        axis=-1,
    )
    jac = None
    if want_jac:
        jac = np.zeros(raw.shape[:-1] + (2, 4))
        jac[..., 0, 0] = -params.speed_gain * (vs - params.target_speed) * dbeta
        jac[..., 0, 1] = -params.speed_gain * (1.0 + beta)
        jac[..., 1, 2] = -params.centering_gain
        jac[..., 1, 3] = -params.damping_gain

    norm = np.sqrt(_dot(raw, raw))
    sat = norm > params.max_force
    force = raw.copy()
    if np.any(sat):
        scale = params.max_force / norm[sat]
        force[sat] = raw[sat] * scale[:, None]
        if want_jac:
            rhat = raw[sat] / norm[sat, None]
            rj = np.einsum("nk,nkz->nz", rhat, jac[sat])
            jac[sat] = scale[:, None, None] * (
                jac[sat] - rhat[:, :, None] * rj[:, None, :]
            )
    return force, jac


def _interaction_batch(times, s, vs, d, vd, ctx: PlanningContext, want_jac: bool):
    """Repulsion projected on the local (tangent, normal) frame per node.

    The agent's Cartesian position is r(s) + d*n(s) and its velocity is
    approximated as vs*t(s) + vd*n(s); both are differentiated exactly
    against the implemented spline geometry (parameter speed included).
    """
    shape = np.shape(s)
    force_fren = np.zeros(shape + (2,))
    jac = np.zeros(shape + (2, 4)) if want_jac else None
    if not ctx.neighbors:
        return force_fren, jac

    pos, gamma, tan, nor, kappa = ctx.path.frame(s)
    x = pos + d[..., None] * nor
    u = vs[..., None] * tan + vd[..., None] * nor
    params = ctx.interaction

    f_cart = np.zeros(shape + (2,))
    jc = np.zeros(shape + (4, 2)) if want_jac else None
    if want_jac:
        dx_ds = (gamma * (1.0 - d * kappa))[..., None] * tan
        du_ds = (gamma * kappa)[..., None] * (vs[..., None] * nor - vd[..., None] * tan)

    for nb in ctx.neighbors:
        q = nb.position + times[..., None] * nb.velocity
        rvec = x - q
        r = np.sqrt(_dot(rvec, rvec))
        if np.any(r < _COINCIDENT_DIST):
            raise CoincidentNeighbor("neighbor coincides with a trajectory sample")
        active = r <= params.cutoff
        if not np.any(active):
            continue
        nhat = rvec / r[..., None]
        du = u - nb.velocity
        dv = np.sqrt(_dot(du, du))
        safe_dv = np.where(dv > 1e-12, dv, 1.0)
        dvhat = np.where((dv > 1e-12)[..., None], du / safe_dv[..., None], 0.0)
        decay = np.exp(-r / params.range_scale)
        base = decay * (1.0 + dv / params.speed_scale)
        alpha = params.max_intensity * np.minimum(base, 1.0)
        act = active.astype(float)
        f_cart += (act * alpha)[..., None] * nhat

        if want_jac:
            pref = params.max_intensity * decay * (base < 1.0) * act
            scale_r = -pref * (1.0 + dv / params.speed_scale) / params.range_scale
            scale_v = pref / params.speed_scale
            dalpha = np.empty(shape + (4,))
            dalpha[..., 0] = scale_r * _dot(nhat, dx_ds) + scale_v * _dot(dvhat, du_ds)
            dalpha[..., 1] = scale_v * _dot(dvhat, tan)
            dalpha[..., 2] = scale_r * _dot(nhat, nor)
            dalpha[..., 3] = scale_v * _dot(dvhat, nor)
            jc += dalpha[..., :, None] * nhat[..., None, :]
            # direction change: (alpha/r) (I - nhat nhat^T) dx/dz, z in {s, d}
            coef = (act * alpha / r)[..., None]
            for z, dx in ((0, dx_ds), (2, nor)):
                proj = dx - nhat * _dot(nhat, dx)[..., None]
                jc[..., z, :] += coef * proj

    force_fren[..., 0] = _dot(f_cart, tan)
    force_fren[..., 1] = _dot(f_cart, nor)
    if want_jac:
        jac[..., 0, :] = (
            jc[..., :, 0] * tan[..., None, 0] + jc[..., :, 1] * tan[..., None, 1]
        )
        jac[..., 1, :] = (
            jc[..., :, 0] * nor[..., None, 0] + jc[..., :, 1] * nor[..., None, 1]
        )
        # frame rotation along s: dt/ds = gamma*kappa*n, dn/ds = -gamma*kappa*t
        gk = gamma * kappa
        jac[..., 0, 0] += gk * _dot(f_cart, nor)
        jac[..., 1, 0] -= gk * _dot(f_cart, tan)
    return force_fren, jac


def _force_field(times, s, vs, d, vd, ctx: PlanningContext, want_jac: bool):
    """External modulation F_ext = -F_assistive + F_interaction per node."""
    f_asst, j_asst = _assistive_batch(s, vs, d, vd, ctx.assistive, want_jac)
    f_int, j_int = _interaction_batch(times, s, vs, d, vd, ctx, want_jac)
    force = f_int - f_asst
    jac = (j_int - j_asst) if want_jac else None
    return force, jac


# --- finite-difference stencils over the position trace -----------------------

def _fd_velocity(p, h):
    v = np.empty_like(p)
    v[..., 0] = (p[..., 1] - p[..., 0]) / h
    v[..., -1] = (p[..., -1] - p[..., -2]) / h
    v[..., 1:-1] = (p[..., 2:] - p[..., :-2]) / (2.0 * h)
    return v


def _fd_accel(p, h):
    h2 = h * h
    a = np.empty_like(p)
    a[..., 1:-1] = (p[..., 2:] - 2.0 * p[..., 1:-1] + p[..., :-2]) / h2
    a[..., 0] = (p[..., 0] - 2.0 * p[..., 1] + p[..., 2]) / h2
    a[..., -1] = (p[..., -1] - 2.0 * p[..., -2] + p[..., -3]) / h2
    return a


def _fd_velocity_adjoint(y, h):
    g = np.zeros_like(y)
    g[..., 2:] += y[..., 1:-1] / (2.0 * h)
    g[..., :-2] -= y[..., 1:-1] / (2.0 * h)
    g[..., 0] -= y[..., 0] / h
    g[..., 1] += y[..., 0] / h
    g[..., -1] += y[..., -1] / h
    g[..., -2] -= y[..., -1] / h
    return g


def _fd_accel_adjoint(y, h):
    h2 = h * h
    g = np.zeros_like(y)
    g[..., 2:] += y[..., 1:-1] / h2
    g[..., 1:-1] -= 2.0 * y[..., 1:-1] / h2
    g[..., :-2] += y[..., 1:-1] / h2
    g[..., 0] += y[..., 0] / h2
    g[..., 1] -= 2.0 * y[..., 0] / h2
    g[..., 2] += y[..., 0] / h2
    g[..., -1] += y[..., -1] / h2
    g[..., -2] -= 2.0 * y[..., -1] / h2
    g[..., -3] += y[..., -1] / h2
    return g


def _running_cost(times, ps, pd, ctx, config):
    """Trapezoid of the running cost; broadcasts over leading batch axes."""
    h = float(times[1] - times[0])
    vs = _fd_velocity(ps, h)
    vd = _fd_velocity(pd, h)
    a_s = _fd_accel(ps, h)
    a_d = _fd_accel(pd, h)
    force, _ = _force_field(times, ps, vs, pd, vd, ctx, want_jac=False)
    integrand = (
        0.5 * config.mass * (vs * vs + vd * vd)
        - (force[..., 0] * vs + force[..., 1] * vd)
        + config.accel_weight * (a_s * a_s + a_d * a_d)
        + config.uncertainty_weight * ctx.sigma_trace()
    )
    return np.trapezoid(integrand, times, axis=-1)


def _running_gradient(times, ps, pd, ctx, config):
    """Gradient of the discretized running cost w.r.t. the free positions."""
    h = float(times[1] - times[0])
    vs = _fd_velocity(ps, h)
    vd = _fd_velocity(pd, h)
    a_s = _fd_accel(ps, h)
    a_d = _fd_accel(pd, h)
    force, jac = _force_field(times, ps, vs, pd, vd, ctx, want_jac=True)

    w = np.full(len(times), h)
    w[0] = w[-1] = 0.5 * h

    direct_s = -(jac[..., 0, 0] * vs + jac[..., 1, 0] * vd)
    direct_d = -(jac[..., 0, 2] * vs + jac[..., 1, 2] * vd)
    dv_s = config.mass * vs - force[..., 0] - (jac[..., 0, 1] * vs + jac[..., 1, 1] * vd)
    dv_d = config.mass * vd - force[..., 1] - (jac[..., 0, 3] * vs + jac[..., 1, 3] * vd)
    da_s = 2.0 * config.accel_weight * a_s
    da_d = 2.0 * config.accel_weight * a_d

    grad_s = w * direct_s + _fd_velocity_adjoint(w * dv_s, h) + _fd_accel_adjoint(w * da_s, h)
    grad_d = w * direct_d + _fd_velocity_adjoint(w * dv_d, h) + _fd_accel_adjoint(w * da_d, h)
    lo, hi = _FIXED_EDGE, len(times) - _FIXED_EDGE
    return np.stack([grad_s[..., lo:hi], grad_d[..., lo:hi]], axis=-1)


def total_cost(
    candidate: TrajectoryCandidate,
    ctx: PlanningContext,
    reference: TrajectoryCandidate | None,
    config: OptimizerConfig,
    reg: RegulationConfig | None = None,
) -> float:
    """Discretized objective: trapezoid of the running cost plus the weighted
    terminal deviation against ``reference``.

    Velocities and accelerations are re-derived from the sampled positions so
    the value is a pure function of the position trace (the optimizer's own
    discretization); that keeps descent comparisons exact.
    """
    cost = float(
        _running_cost(
            candidate.times, candidate.states[:, 0], candidate.states[:, 3], ctx, config
        )
    )
    if reference is not None and reg is not None and config.terminal_weight > 0:
        cost += config.terminal_weight * regulation_energy(candidate, reference, reg)
    return cost


def cost_gradient(
    candidate: TrajectoryCandidate,
    ctx: PlanningContext,
    config: OptimizerConfig,
    positions: np.ndarray | None = None,
) -> np.ndarray:
    """Analytic gradient of the discretized cost w.r.t. free positions.

    Free positions are the samples between the fixed two-node boundary
    buffers; returns shape (n_samples - 4, 2) with columns (longitudinal,
    lateral). The terminal regularizer depends only on the fixed endpoint
    and thus contributes nothing.
    """
    if positions is None:
        ps = candidate.states[:, 0].copy()
        pd = candidate.states[:, 3].copy()
    else:
        ps = positions[:, 0]
        pd = positions[:, 1]
    return _running_gradient(candidate.times, ps, pd, ctx, config)


def _descend(times, ps, pd, ctx, config, reg_terms):
    """Lockstep Armijo descent over a batch of position traces.

    ``ps``/``pd`` have shape (batch, n_samples); each row carries its own
    constant regularizer term, cost history, and line-search step. Rows stop
    independently on the gradient tolerance or a failed line search.
    """
    n_batch, n_nodes = ps.shape
    cur = _running_cost(times, ps, pd, ctx, config) + reg_terms
    histories = [[float(c)] for c in cur]
    if config.max_iters == 0 or n_nodes <= 2 * _FIXED_EDGE:
        return ps, pd, cur, histories

    h = float(times[1] - times[0])
    # Fixed step at the curvature scale of the acceleration penalty
    # (second-difference stencil norm ~4/h^2). Growing the step beyond this
    # is Armijo-acceptable but amplifies the stiff modes and shows up as
    # acceleration noise, so the cap is kept every iteration.
    step0 = 1.0 / (1.0 + 32.0 * config.accel_weight / h**3 + config.mass / h)
    lo, hi = _FIXED_EDGE, n_nodes - _FIXED_EDGE

    alive = np.ones(n_batch, dtype=bool)
    for _ in range(config.max_iters):
        grad = _running_gradient(times, ps, pd, ctx, config)
        gnorm2 = np.sum(grad * grad, axis=(-2, -1))
        alive &= np.sqrt(gnorm2) > config.grad_tol
        if not np.any(alive):
            break
        alpha = np.full(n_batch, step0)
        trying = alive.copy()
        accepted = np.zeros(n_batch, dtype=bool)
        for _ in range(_MAX_BACKTRACKS):
            if not np.any(trying):
                break
            ps_try = ps.copy()
            pd_try = pd.copy()
            ps_try[:, lo:hi] -= alpha[:, None] * grad[..., 0]
            pd_try[:, lo:hi] -= alpha[:, None] * grad[..., 1]
            costs = _running_cost(times, ps_try, pd_try, ctx, config) + reg_terms
            ok = trying & (costs <= cur - config.armijo_c * alpha * gnorm2)
            if np.any(ok):
                ps[ok] = ps_try[ok]
                pd[ok] = pd_try[ok]
                cur[ok] = costs[ok]
                accepted |= ok
                for i in np.nonzero(ok)[0]:
                    histories[i].append(float(costs[i]))
            trying &= ~ok
            alpha[trying] *= config.step_shrink
        alive &= accepted
        if not np.any(alive):
            break
    return ps, pd, cur, histories


def _rebuild_candidate(candidate, ps, pd, cost, history) -> TrajectoryCandidate:
    """Candidate with refined positions; interior derivatives by central
    differences, endpoint rows kept at the original boundary values."""
    h = candidate.dt
    states = candidate.states.copy()
    states[:, 0] = ps
    states[:, 3] = pd
    states[1:-1, 1] = (ps[2:] - ps[:-2]) / (2.0 * h)
    states[1:-1, 2] = (ps[2:] - 2.0 * ps[1:-1] + ps[:-2]) / (h * h)
    states[1:-1, 4] = (pd[2:] - pd[:-2]) / (2.0 * h)
    states[1:-1, 5] = (pd[2:] - 2.0 * pd[1:-1] + pd[:-2]) / (h * h)
    states[0] = candidate.states[0]
    states[-1] = candidate.states[-1]
    return replace(
        candidate,
        states=states,
        jerk_lon=np.gradient(states[:, 2], h, edge_order=2),
        jerk_lat=np.gradient(states[:, 5], h, edge_order=2),
        cost=cost,
        cost_history=history,
        optimized=True,
    )


def optimize_trajectory(
    candidate: TrajectoryCandidate,
    ctx: PlanningContext,
    reference: TrajectoryCandidate | None,
    config: OptimizerConfig,
    reg: RegulationConfig | None = None,
) -> TrajectoryCandidate:
    """Refine free position samples by Armijo-backtracked descent.

    Always returns a valid candidate annotated with ``cost`` and
    ``cost_history`` (actual objective values, non-increasing); terminates on
    the gradient tolerance, the iteration cap, or a failed line search.
    """
    reg_term = 0.0
    if reference is not None and reg is not None and config.terminal_weight > 0:
        reg_term = config.terminal_weight * regulation_energy(candidate, reference, reg)

    ps, pd, cost, histories = _descend(
        candidate.times,
        candidate.states[None, :, 0].copy(),
        candidate.states[None, :, 3].copy(),
        ctx,
        config,
        np.array([reg_term]),
    )
    history = histories[0]
    if len(history) == 1:
        out = candidate.copy()
        out.cost = history[0]
        out.cost_history = history
        return out
    return _rebuild_candidate(candidate, ps[0], pd[0], float(cost[0]), history)


def optimize_cluster(
    candidates,
    ctx: PlanningContext,
    reference: TrajectoryCandidate,
    config: OptimizerConfig,
    reg: RegulationConfig | None = None,
):
    """Optimize a whole cluster, batching candidates that share a horizon.

    Exactly the per-candidate descent, run in lockstep; returns refined
    candidates in the input order.
    """
    groups: dict[tuple, list[int]] = {}
    for i, cand in enumerate(candidates):
        key = (len(cand.times), float(cand.horizon))
        groups.setdefault(key, []).append(i)

    out = list(candidates)
    for indices in groups.values():
        batch = [candidates[i] for i in indices]
        times = batch[0].times
        ps = np.stack([c.states[:, 0] for c in batch])
        pd = np.stack([c.states[:, 3] for c in batch])
        if reg is not None and config.terminal_weight > 0:
            reg_terms = np.array(
                [
                    config.terminal_weight * regulation_energy(c, reference, reg)
                    for c in batch
                ]
            )
        else:
            reg_terms = np.zeros(len(batch))
        ps, pd, costs, histories = _descend(times, ps, pd, ctx, config, reg_terms)
        for row, i in enumerate(indices):
            history = histories[row]
            if len(history) == 1:
                refined = candidates[i].copy()
                refined.cost = history[0]
                refined.cost_history = history
            else:
                refined = _rebuild_candidate(
                    candidates[i], ps[row], pd[row], float(costs[row]), history
                )
            out[i] = refined
    return out
