"""Exception hierarchy shared by every corrdyn module."""


class CorrdynError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(CorrdynError, ValueError):
    pass


class SingularPointError(CorrdynError, ValueError):
    """Raised at points where a branch is not locally invertible (z = 0, w = c)
    or where the orbifold weight is singular."""


class BranchPointError(SingularPointError):
    """A continuation path comes too close to the branch point 0."""


class ContinuationError(CorrdynError):
    """Adaptive branch tracking did not finish within its step budget."""


class CapacityError(CorrdynError):
    """A per-level frontier exceeded ``frontier_cap``."""

    def __init__(self, level, size, cap):
        super().__init__(
            f"frontier at level {level} has {size} nodes, exceeding frontier_cap={cap}"
        )
        self.level = level
        self.size = size
        self.cap = cap


class BudgetError(CorrdynError):
    """A requested computation needs more nodes/pixels than the configured budget."""

    def __init__(self, required, budget, what="node"):
        super().__init__(f"{what} budget exceeded: requires {required}, budget is {budget}")
        self.required = required
        self.budget = budget


class InvalidCycleError(CorrdynError, ValueError):
    pass


class RefinementError(CorrdynError):
    pass


class RefinementLost(RefinementError):
    """Frozen-branch tracking became ambiguous during Newton refinement."""


class NoConvergence(RefinementError):
    pass
