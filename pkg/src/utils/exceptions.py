"""
Exception hierarchy shared by all censorlab packages.
"""


class CensorLabError(Exception):
    """Base class for every error raised by censorlab"""


class ModelError(CensorLabError, ValueError):
    """Invalid system or graph: empty state space, zero weights, bad parameters"""


class ConstraintError(CensorLabError, ValueError):
    """A configuration is not a member of the state space"""


class BudgetExceededError(CensorLabError, RuntimeError):
    """An enumeration, flow or transport budget would be exceeded"""

    def __init__(self, what: str, size: int, budget: int):
        self.what = what
        self.size = size
        self.budget = budget
        super().__init__(f"{what}: size {size} exceeds budget {budget}")


class SpaceMismatchError(CensorLabError, ValueError):
    """Two distributions live on different state spaces"""


class ScheduleError(CensorLabError, ValueError):
    """Invalid schedule construction (permutation, mask, divisibility, bipartition)"""


class ConfigError(CensorLabError, ValueError):
    """Invalid experiment configuration or unusable input/output path"""


class OrderViolationError(CensorLabError, AssertionError):
    """The monotone grand coupling produced top < bottom at some site"""

    def __init__(self, step: int, site: int, seed: int):
        self.step = step
        self.site = site
        self.seed = seed
        super().__init__(f"top chain fell below bottom chain at step {step}, site {site} (seed {seed})")
