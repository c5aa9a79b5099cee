"""
Exception hierarchy for the LNC planner.

Every module raises a subclass of LncError so the CLI can map failures to
exit codes without inspecting messages.
"""

from typing import Iterable, Optional


class LncError(Exception):
    """Base class for every error raised by the planner package"""
    pass


class ConfigError(LncError):
    """Invalid run configuration (bad radii, step size, paths)"""
    pass


class LtlSyntaxError(LncError):
    """Formula text could not be parsed"""

    def __init__(self, message: str, position: int, text: str = ''):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class UndeclaredPropositionError(LncError):
    """Formula mentions a proposition that was not declared"""

    def __init__(self, name: str, position: Optional[int] = None):
        self.name = name
        self.position = position
        where = f" at position {position}" if position is not None else ''
        super().__init__(f"Undeclared proposition '{name}'{where}")


class TranslationBudgetError(LncError):
    """Automaton construction exceeded its state budget"""

    def __init__(self, budget: int, reached: int):
        self.budget = budget
        self.reached = reached
        super().__init__(
            f"Formula too large: automaton construction reached {reached} states "
            f"(budget {budget})"
        )


class NetworkError(LncError):
    """Malformed sensor network or command layer"""
    pass


class CoverageError(LncError):
    """Command layer does not certify coverage of the sensor network"""

    def __init__(self, message: str, uncovered: Iterable = ()):
        self.uncovered = list(uncovered)
        super().__init__(message)


class BudgetExceededError(LncError):
    """State enumeration went over the configured budget"""

    def __init__(self, what: str, budget: int, reached: int):
        self.what = what
        self.budget = budget
        self.reached = reached
        super().__init__(f"{what} exceeded budget: {reached} > {budget}")


class InfeasibleError(LncError):
    """No accepting lasso exists for the requested specification"""
    pass


class PlanningError(LncError):
    """A synthesized plan failed its own verification"""
    pass


class HorizonError(LncError):
    """Stitching did not close a lasso within the horizon"""
    pass


class ConsensusError(LncError):
    """Consensus simulation received inconsistent inputs"""
    pass


class OracleBoundError(LncError):
    """Brute-force oracle invoked outside its enumeration bounds"""
    pass
