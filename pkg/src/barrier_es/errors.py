"""Exception types raised across the package."""


class BarrierESError(Exception):
    pass


class InfeasibleStart(BarrierESError):
    """The initial point fails the relaxed feasibility test at sigma_0."""


class NonFiniteObjective(BarrierESError):
    pass


class AllInfeasible(BarrierESError):
    """Every offspring available to the recombination map is infeasible."""


class DegenerateSampler(BarrierESError):
    pass


class DomainError(BarrierESError, ValueError):
    pass


class WeightError(BarrierESError, ValueError):
    pass


class EvaluationError(BarrierESError):
    """An oracle call failed (hidden constraint)."""


class SizeError(BarrierESError, ValueError):
    pass


class InsufficientSeeds(BarrierESError, ValueError):
    pass


class ConfigError(BarrierESError, ValueError):
    def __init__(self, key_path: str, message: str):
        self.key_path = key_path
        super().__init__(f"{key_path}: {message}")
