"""Exception types shared across the planner."""


class PlannerError(Exception):
    """Base class for all planner-domain failures."""


# --- reference-path geometry ---

class TooFewWaypoints(PlannerError):
    pass


class DuplicateWaypoint(PlannerError):
    pass


class OutOfRangeS(PlannerError):
    pass


class InvalidLateralOffset(PlannerError):
    pass


class ProjectionAmbiguous(PlannerError):
    pass


class OutsideTube(PlannerError):
    pass


# --- polynomial sampling ---

class NonPositiveSpan(PlannerError):
    pass


class IllConditioned(PlannerError):
    pass


class EmptyCluster(PlannerError):
    pass


class PathTooShort(PlannerError):
    pass


# --- forces / interaction ---

class CoincidentNeighbor(PlannerError):
    pass


# --- metrics ---

class TooFewEndpoints(PlannerError):
    pass


class EmptyInput(PlannerError):
    pass


# --- simulation / scenario ---

class ScenarioInvalid(PlannerError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NoFeasibleCandidate(PlannerError):
    """Raised when a planning cycle has no feasible candidate.

    Carries the partial simulation log accumulated up to the failing cycle
    (``partial_log`` may be None when raised outside the simulator).
    """

    def __init__(self, message, partial_log=None):
        self.partial_log = partial_log
        super().__init__(message)
