"""Exception types shared across the package."""


class ChainAllocError(Exception):
    """Base class for all package errors."""


class ParseError(ChainAllocError):
    """Scenario file could not be read or is not valid JSON."""


class ValidationError(ChainAllocError):
    """Scenario content violates a model invariant; message names the first violation."""


class InvalidAssignment(ChainAllocError):
    """Assignment breaks a structural constraint (unmapped request, wrong host type, ...)."""


class TooLarge(ChainAllocError):
    """Combination count exceeds the configured enumeration cap."""

    def __init__(self, combinations: int, cap: int):
        super().__init__(f"{combinations} assignment combinations exceed cap {cap}")
        self.combinations = combinations
        self.cap = cap


class Infeasible(ChainAllocError):
    """No assignment satisfies the minimum-lifetime requirements."""


class MinLifetimeViolated(ChainAllocError):
    """Heuristic result cannot satisfy a device's minimum-lifetime requirement."""

    def __init__(self, device: str, lifetime: float, required: float):
        super().__init__(
            f"device {device!r} lifetime {lifetime:.3f} below required {required:.3f} intervals"
        )
        self.device = device
        self.lifetime = lifetime
        self.required = required


class LPInfeasible(ChainAllocError):
    """Linear relaxation has no feasible point (over-tight budget rows)."""


class LPInternalError(ChainAllocError):
    """Relaxation solve reached a state that is impossible by construction."""


class RoundingInfeasible(ChainAllocError):
    """No integral completion of the fractional solution meets the lifetime budgets."""


class BrokenChain(ChainAllocError):
    """A chain step has no assigned performer."""


class PolicyFailure(ChainAllocError):
    """A policy could not produce a feasible assignment during an episode."""

    def __init__(self, t: int, reason: str):
        super().__init__(f"t={t}: {reason}")
        self.t = t
        self.reason = reason
