"""Candidate feasibility classification and the metric families:
smoothness (jerk) statistics, endpoint nearest-neighbor density, and
feasibility/violation breakdowns.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, TooFewEndpoints
from .frenet_geometry import ReferencePath
from .quintic_sampling import TrajectoryCandidate, TrajectoryCluster

# Below this Cartesian speed, curvature-family quantities are undefined and
# the corresponding checks are skipped at that sample.
_DEGENERATE_SPEED = 1e-3


class Constraint(enum.Enum):
    VELOCITY = "velocity"
    ACCELERATION = "acceleration"
    JERK = "jerk"
    CURVATURE = "curvature"
    YAW_RATE = "yaw_rate"
    CURVATURE_RATE = "curvature_rate"


CONSTRAINT_ORDER = (
    Constraint.VELOCITY,
    Constraint.ACCELERATION,
    Constraint.JERK,
    Constraint.CURVATURE,
    Constraint.YAW_RATE,
    Constraint.CURVATURE_RATE,
)


@dataclass(frozen=True)
class KinematicLimits:
    """Hard limits; walking-pace defaults for the bundled scenarios."""

    v_max: float = 2.0
    a_max: float = 1.5
    j_max: float = 4.0
    kappa_max: float = 1.0
    yaw_rate_max: float = 1.0
    kappa_rate_max: float = 2.0

    def __post_init__(self):
        if min(
            self.v_max,
            self.a_max,
            self.j_max,
            self.kappa_max,
            self.yaw_rate_max,
            self.kappa_rate_max,
        ) <= 0:
            raise ValueError("all limits must be strictly positive")

    def limit_for(self, constraint: Constraint) -> float:
        return {
            Constraint.VELOCITY: self.v_max,
            Constraint.ACCELERATION: self.a_max,
            Constraint.JERK: self.j_max,
            Constraint.CURVATURE: self.kappa_max,
            Constraint.YAW_RATE: self.yaw_rate_max,
            Constraint.CURVATURE_RATE: self.kappa_rate_max,
        }[constraint]


@dataclass
class FeasibilityReport:
    feasible: bool
    violations: frozenset
    worst_margins: dict
    notes: tuple = ()


@dataclass(frozen=True)
class ClusterStats:
    """Nearest-neighbor statistics over terminal states (population std)."""

    nn_mean: float
    nn_std: float
    nn_min: float
    nn_max: float
    count: int


@dataclass
class JerkStats:
    """Per-axis jerk magnitude summary plus plot-ready profile series.

    Statistics are over |jerk|; ``profile`` maps column names to arrays,
    one entry per sample.
    """

    jerk_lon: np.ndarray
    jerk_lat: np.ndarray
    median_lon: float
    iqr_lon: float
    rms_lon: float
    peak_lon: float
    median_lat: float
    iqr_lat: float
    rms_lat: float
    peak_lat: float
    profile: dict


PROFILE_COLUMNS = (
    "t",
    "s",
    "s_dot",
    "s_ddot",
    "jerk_lon",
    "d",
    "d_dot",
    "d_ddot",
    "jerk_lat",
)


def check_candidate(
    candidate: TrajectoryCandidate, path: ReferencePath, limits: KinematicLimits
) -> FeasibilityReport:
    """Classify one candidate against the kinematic limits.

    Speed/acceleration come from finite differences of the Cartesian trace,
    curvature from first/second central differences (yaw rate = curvature *
    speed, curvature rate = d kappa / dt), and jerk from the per-axis stored
    series. A candidate may violate several constraints at once.
    """
    st = candidate.states
    dt = candidate.dt
    _, _, _, nor, _ = path.frame(st[:, 0])
    xy = path.position(st[:, 0]) + st[:, 3][:, None] * nor

    vel = np.gradient(xy, dt, axis=0, edge_order=2)
    acc = np.gradient(vel, dt, axis=0, edge_order=2)
    speed = np.linalg.norm(vel, axis=1)
    accel = np.linalg.norm(acc, axis=1)

    margins = {
        Constraint.VELOCITY: float(np.max(speed)) / limits.v_max,
        Constraint.ACCELERATION: float(np.max(accel)) / limits.a_max,
        Constraint.JERK: float(
            max(np.max(np.abs(candidate.jerk_lon)), np.max(np.abs(candidate.jerk_lat)))
        )
        / limits.j_max,
    }

    notes = []
    valid = speed > _DEGENERATE_SPEED
    if np.all(valid):
        cross = vel[:, 0] * acc[:, 1] - vel[:, 1] * acc[:, 0]
        kappa = cross / speed**3
        kappa_rate = np.gradient(kappa, dt, edge_order=2)
        margins[Constraint.CURVATURE] = float(np.max(np.abs(kappa))) / limits.kappa_max
        margins[Constraint.YAW_RATE] = (
            float(np.max(np.abs(kappa * speed))) / limits.yaw_rate_max
        )
        margins[Constraint.CURVATURE_RATE] = (
            float(np.max(np.abs(kappa_rate))) / limits.kappa_rate_max
        )
    else:
        degenerate = np.nonzero(~valid)[0]
        notes.append(
            f"curvature checks skipped at {degenerate.size} near-zero-speed "
            f"sample(s), first at t={candidate.times[degenerate[0]]:.3f}"
        )
        if np.any(valid):
            cross = vel[:, 0] * acc[:, 1] - vel[:, 1] * acc[:, 0]
            kappa = np.where(valid, cross / np.maximum(speed, _DEGENERATE_SPEED) ** 3, 0.0)
            margins[Constraint.CURVATURE] = (
                float(np.max(np.abs(kappa[valid]))) / limits.kappa_max
            )
            margins[Constraint.YAW_RATE] = (
                float(np.max(np.abs((kappa * speed)[valid]))) / limits.yaw_rate_max
            )
            kappa_rate = np.gradient(kappa, dt, edge_order=2)
            rate_valid = valid.copy()
            # a rate estimate touching a skipped sample is unreliable
            rate_valid[:-1] &= valid[1:]
            rate_valid[1:] &= valid[:-1]
            if np.any(rate_valid):
                margins[Constraint.CURVATURE_RATE] = (
                    float(np.max(np.abs(kappa_rate[rate_valid]))) / limits.kappa_rate_max
                )
            else:
                margins[Constraint.CURVATURE_RATE] = 0.0
        else:
            margins[Constraint.CURVATURE] = 0.0
            margins[Constraint.YAW_RATE] = 0.0
            margins[Constraint.CURVATURE_RATE] = 0.0

    violations = frozenset(c for c, m in margins.items() if m > 1.0)
    return FeasibilityReport(
        feasible=not violations,
        violations=violations,
        worst_margins=margins,
        notes=tuple(notes),
    )


def nn_distance_stats(cluster: TrajectoryCluster) -> ClusterStats:
    """Nearest-neighbor distances between terminal 6-vectors (SI Euclidean)."""
    terms = cluster.terminal_matrix()
    n = terms.shape[0]
    if n < 2:
        raise TooFewEndpoints("need at least 2 endpoints for nearest-neighbor stats")
    diff = terms[:, None, :] - terms[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    np.fill_diagonal(dist, np.inf)
    nearest = dist.min(axis=1)
    return ClusterStats(
        nn_mean=float(nearest.mean()),
        nn_std=float(nearest.std()),
        nn_min=float(nearest.min()),
        nn_max=float(nearest.max()),
        count=n,
    )


def jerk_statistics(candidate: TrajectoryCandidate) -> JerkStats:
    """Summaries of |jerk| per Frenet axis plus the profile series."""
    jl = np.abs(candidate.jerk_lon)
    jt = np.abs(candidate.jerk_lat)
    st = candidate.states
    profile = {
        "t": candidate.times.copy(),
        "s": st[:, 0].copy(),
        "s_dot": st[:, 1].copy(),
        "s_ddot": st[:, 2].copy(),
        "jerk_lon": candidate.jerk_lon.copy(),
        "d": st[:, 3].copy(),
        "d_dot": st[:, 4].copy(),
        "d_ddot": st[:, 5].copy(),
        "jerk_lat": candidate.jerk_lat.copy(),
    }
    q25l, q75l = np.percentile(jl, [25, 75])
    q25t, q75t = np.percentile(jt, [25, 75])
    return JerkStats(
        jerk_lon=candidate.jerk_lon.copy(),
        jerk_lat=candidate.jerk_lat.copy(),
        median_lon=float(np.median(jl)),
        iqr_lon=float(q75l - q25l),
        rms_lon=float(np.sqrt(np.mean(jl**2))),
        peak_lon=float(jl.max()),
        median_lat=float(np.median(jt)),
        iqr_lat=float(q75t - q25t),
        rms_lat=float(np.sqrt(np.mean(jt**2))),
        peak_lat=float(jt.max()),
        profile=profile,
    )


@dataclass(frozen=True)
class FeasibilityBreakdown:
    overall_ratio: float
    violation_rates: dict
    count: int


def feasibility_breakdown(reports) -> FeasibilityBreakdown:
    """Feasible fraction plus per-constraint violation fractions.

    A candidate violating several constraints counts once per constraint.
    """
    reports = list(reports)
    if not reports:
        raise EmptyInput("no feasibility reports given")
    n = len(reports)
    rates = {
        c: sum(1 for r in reports if c in r.violations) / n for c in CONSTRAINT_ORDER
    }
    overall = sum(1 for r in reports if r.feasible) / n
    return FeasibilityBreakdown(overall_ratio=overall, violation_rates=rates, count=n)
