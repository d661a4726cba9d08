"""Shared geometry, candidate, and context factories for the test suite."""

import numpy as np
from frenetplan.frenet_geometry import FrenetState, build_reference_path
from frenetplan.momentum_optimizer import (
    AssistiveParams,
    InteractionParams,
    Neighbor,
    PlanningContext,
)
from frenetplan.quintic_sampling import build_candidate


def straight_path(length=30.0, step=0.5):
    x = np.arange(0.0, length + step / 2, step)
    return build_reference_path(np.column_stack([x, np.zeros_like(x)]))


def circle_path(radius, ccw=True, n=256, frac=0.95):
    theta = np.linspace(0.0, 2 * np.pi * frac, n)
    if not ccw:
        theta = -theta
    pts = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    return build_reference_path(pts)


def s_curve_path(length=24.0, amplitude=0.8, step=0.25):
    x = np.arange(0.0, length + step / 2, step)
    return build_reference_path(np.column_stack([x, amplitude * np.sin(0.4 * x)]))


def make_candidate(
    initial=None,
    terminal_speed=1.1,
    offset=0.3,
    horizon=2.0,
    dt=0.05,
):
    """One forward candidate via the standard builder."""
    if initial is None:
        initial = FrenetState(2.0, 1.0, 0.0, 0.0, 0.0, 0.0)
    terminal_s = initial.s + 0.5 * (initial.s_dot + terminal_speed) * horizon
    cand = build_candidate(initial, terminal_s, terminal_speed, offset, horizon, dt)
    assert cand is not None
    return cand


def random_candidate(rng, dt=0.1, horizon=None):
    """Random forward candidate with nontrivial boundary rates."""
    initial = FrenetState(
        s=float(rng.uniform(1.5, 3.0)),
        s_dot=float(rng.uniform(0.5, 1.3)),
        s_ddot=float(rng.uniform(-0.3, 0.3)),
        d=float(rng.uniform(-0.4, 0.4)),
        d_dot=float(rng.uniform(-0.2, 0.2)),
        d_ddot=float(rng.uniform(-0.2, 0.2)),
    )
    horizon = horizon or float(rng.choice([1.0, 1.5, 2.0]))
    speed = float(rng.uniform(0.4, 1.4))
    offset = float(rng.uniform(-0.7, 0.7))
    terminal_s = initial.s + 0.5 * (initial.s_dot + speed) * horizon
    cand = build_candidate(initial, terminal_s, speed, offset, horizon, dt)
    return cand


def make_context(path, neighbors=(), bumps=(), v_des=1.0, sigma=0.1):
    return PlanningContext(
        path=path,
        assistive=AssistiveParams(
            target_speed=v_des,
            speed_gain=0.5,
            centering_gain=0.3,
            damping_gain=0.2,
            max_force=3.0,
            bumps=bumps,
        ),
        interaction=InteractionParams(
            max_intensity=2.0, range_scale=0.8, speed_scale=1.0, cutoff=4.0
        ),
        neighbors=tuple(neighbors),
        sigma_baseline=sigma,
    )


def active_context(path, rng=None):
    """Context with every force term active: neighbors, bumps, uncertainty."""
    rng = rng or np.random.default_rng(7)
    neighbors = (
        Neighbor(
            position=np.array([rng.uniform(3.0, 5.0), rng.uniform(-1.5, -0.5)]),
            velocity=np.array([rng.uniform(-0.3, 0.3), rng.uniform(0.2, 0.5)]),
            covariance_trace=0.1,
        ),
        Neighbor(
            position=np.array([rng.uniform(4.0, 6.0), rng.uniform(0.5, 1.5)]),
            velocity=np.array([rng.uniform(-0.4, 0.0), 0.0]),
            covariance_trace=0.05,
        ),
    )
    bumps = ((float(rng.uniform(2.0, 5.0)), 1.2, 0.7),)
    return make_context(path, neighbors=neighbors, bumps=bumps)
