"""Exception hierarchy shared by all flockbench modules."""


class FlockbenchError(Exception):
    """Base class for every error raised by flockbench."""


class ConfigurationError(FlockbenchError, ValueError):
    """Invalid or inconsistent input (bad shapes, missing masses, bad config)."""


class DomainError(FlockbenchError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class IndeterminateTailError(FlockbenchError):
    """A tabulated kernel whose tail cannot be bounded from its samples."""


class DivergenceError(DomainError):
    """A quantity requiring a finite tail integral was asked of a fat-tailed kernel."""


class DegenerateInputError(DomainError):
    """Initial data violating a theorem hypothesis such as ``|x0|_inf > 0``."""


class PositivityError(DomainError):
    """Kernel vanishes somewhere although strict positivity is required."""


class NotCriticalError(DomainError):
    """Two-particle data is not at the critical velocity."""


class ModelError(FlockbenchError, RuntimeError):
    """Runtime failure of a model evaluation (collision, instability)."""

    step = None


class CollisionError(ModelError):
    """Two agents coincide where the bonding force is singular."""

    def __init__(self, i, j, distance, step=None):
        self.pair = (int(i), int(j))
        self.distance = float(distance)
        self.step = step
        where = "" if step is None else f" at step {step}"
        super().__init__(
            f"agents {self.pair[0]} and {self.pair[1]} collide "
            f"(distance {self.distance:.3e}){where}"
        )


class SingularWeightError(ModelError):
    """Zero normalisation in the Motsch-Tadmor weights."""


class StabilityError(ModelError):
    """Step size too large: ``h * sum_j phi_ij >= 1`` for some agent."""

    def __init__(self, agent, degree_sum, h, step=None):
        self.agent = int(agent)
        self.degree_sum = float(degree_sum)
        self.h = float(h)
        self.step = step
        where = "" if step is None else f" at step {step}"
        super().__init__(
            f"agent {self.agent}: h*degree = {self.h * self.degree_sum:.6g} >= 1 "
            f"(degree sum {self.degree_sum:.6g}, h {self.h:.6g}){where}"
        )


class NotRootedError(DomainError):
    """A graph expected to be rooted has unreachable vertices."""


class CoverageError(DomainError):
    """Points fall outside a binning grid."""
