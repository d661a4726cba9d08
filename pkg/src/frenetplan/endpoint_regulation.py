"""Terminal-state regulation: soft deviation energy plus spacing repair.

The cluster's terminal states are compared against a reference candidate
through a weighted deviation energy, de-duplicated below a spacing floor,
and densified wherever consecutive terminal gaps exceed the spacing cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyCluster
from .frenet_geometry import FrenetState, ReferencePath
from .quintic_sampling import (
    SamplingGrid,
    TrajectoryCandidate,
    TrajectoryCluster,
    build_candidate,
    generate_cluster,
)

# Insertions allowed per oversized gap before the budget flag is raised.
_GAP_BUDGET = 8

# Treat deviations below this as exact ties when picking the reference.
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class RegulationConfig:
    """Weights and spacing bounds for terminal-state regulation.

    ``weights`` scales the terminal [s_dot, s_ddot, d_dot, d_ddot] deviation;
    consecutive terminal gaps are repaired into [min_gap, max_gap];
    ``terminal_weight`` scales the deviation energy inside the total cost.
    """

    weights: tuple = (1.0, 0.5, 1.0, 0.5)
    max_gap: float = 0.5
    min_gap: float = 0.02
    terminal_weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.weights) != 4 or any(w < 0 for w in self.weights):
            raise ValueError("weights must be 4 nonnegative values")
        if not self.max_gap > self.min_gap >= 0:
            raise ValueError("need max_gap > min_gap >= 0")
        if self.terminal_weight < 0:
            raise ValueError("terminal_weight must be nonnegative")


def terminal_eta(candidate: TrajectoryCandidate) -> np.ndarray:
    """Terminal kinematics [s_dot, s_ddot, d_dot, d_ddot] at the horizon."""
    return candidate.states[-1, [1, 2, 4, 5]]


def select_reference_candidate(cluster: TrajectoryCluster) -> int:
    """Index of the candidate whose terminal (d, s_dot) is closest to
    (0, median terminal speed); ties go to the smaller index."""
    if not cluster.candidates:
        raise EmptyCluster("cannot select a reference in an empty cluster")
    terms = cluster.terminal_matrix()
    target = np.array([0.0, float(np.median(terms[:, 1]))])
    dev = np.column_stack([terms[:, 3], terms[:, 1]]) - target
    dist2 = np.sum(dev * dev, axis=1)
    best = 0
    for i in range(1, len(dist2)):
        if dist2[i] < dist2[best] - _TIE_TOL:
            best = i
    return best


def regulation_energy(
    candidate: TrajectoryCandidate,
    reference: TrajectoryCandidate,
    config: RegulationConfig,
) -> float:
    """Weighted squared terminal deviation against the reference candidate."""
    delta = terminal_eta(candidate) - terminal_eta(reference)
    weighted = np.asarray(config.weights) * delta
    return float(weighted @ weighted)


def sort_by_terminal(cluster: TrajectoryCluster) -> TrajectoryCluster:
    """Sort candidates by terminal lateral offset, then terminal speed."""
    order = sorted(
        range(len(cluster.candidates)),
        key=lambda i: (
            cluster.candidates[i].states[-1, 3],
            cluster.candidates[i].states[-1, 1],
        ),
    )
    return replace(
        cluster,
        candidates=[cluster.candidates[i] for i in order],
        reference_index=0,
    )


def _snap_to_grid(value: float, dt: float) -> float:
    return max(4 * dt, round(value / dt) * dt)


def enforce_spacing(
    cluster: TrajectoryCluster,
    config: RegulationConfig,
    path: ReferencePath,
    grid: SamplingGrid,
) -> TrajectoryCluster:
    """Repair consecutive terminal gaps into [min_gap, max_gap].

    Near-duplicates (gap below the floor) are dropped keeping the earlier
    candidate; oversized gaps are filled by re-solving quintics toward
    linearly interpolated terminal configurations, up to 8 insertions per
    gap (beyond that the budget flag is set instead of failing).
    """
    if not cluster.candidates:
        raise EmptyCluster("cannot enforce spacing on an empty cluster")

    kept: list[TrajectoryCandidate] = [cluster.candidates[0]]
    for cand in cluster.candidates[1:]:
        gap = float(np.linalg.norm(cand.states[-1] - kept[-1].states[-1]))
        if gap >= config.min_gap:
            kept.append(cand)

    budget_exhausted = False
    out: list[TrajectoryCandidate] = []
    for a, b in zip(kept[:-1], kept[1:]):
        out.append(a)
        term_a = a.states[-1]
        term_b = b.states[-1]
        gap = float(np.linalg.norm(term_b - term_a))
        if gap <= config.max_gap:
            continue
        n_insert = math.ceil(gap / config.max_gap) - 1
        if n_insert > _GAP_BUDGET:
            n_insert = _GAP_BUDGET
            budget_exhausted = True
        for j in range(1, n_insert + 1):
            alpha = j / (n_insert + 1)
            # one-sided form: exact when components of a and b coincide,
            # so sorting ties stay ties and the repaired chain order holds
            target = term_a + alpha * (term_b - term_a)
            horizon = _snap_to_grid(a.horizon + alpha * (b.horizon - a.horizon), grid.dt)
            cand = build_candidate(
                cluster.initial,
                terminal_s=float(target[0]),
                terminal_speed=float(target[1]),
                lateral_offset=float(target[3]),
                horizon=horizon,
                dt=grid.dt,
                grid_key=(horizon, float(target[1]), float(target[3]), "inserted"),
            )
            if cand is not None:
                out.append(cand)
    out.append(kept[-1])

    repaired = TrajectoryCluster(
        candidates=out,
        reference_index=0,
        initial=cluster.initial,
        spacing_budget_exhausted=budget_exhausted or cluster.spacing_budget_exhausted,
    )
    repaired = sort_by_terminal(repaired)
    repaired.reference_index = select_reference_candidate(repaired)
    return repaired


def regulated_cluster(
    initial: FrenetState,
    path: ReferencePath,
    grid: SamplingGrid,
    config: RegulationConfig,
) -> TrajectoryCluster:
    """Generate, sort, and spacing-repair a cluster, annotating each candidate
    with its deviation energy against the selected reference."""
    cluster = sort_by_terminal(generate_cluster(initial, path, grid))
    cluster.reference_index = select_reference_candidate(cluster)
    cluster = enforce_spacing(cluster, config, path, grid)
    reference = cluster.candidates[cluster.reference_index]
    for cand in cluster.candidates:
        cand.regulation_energy = regulation_energy(cand, reference, config)
    return cluster
