"""Exception types shared across the package."""


class AuditError(Exception):
    """Base class for all fairdecomp errors."""


class EmptyGroup(AuditError):
    """One treatment arm has no units after cleaning."""


class DegenerateOutcome(AuditError):
    """The outcome is constant after cleaning."""


class TooFewUnits(AuditError):
    """Not enough units for the requested fold count."""


class CyclicGraph(AuditError):
    """The declared DAG contains a directed cycle."""


class RoleViolation(AuditError):
    """A node role or edge violates the structural rules of the graph."""


class MissingRequiredEdge(AuditError):
    """A domain-knowledge required edge is absent."""


class NonFiniteInput(AuditError):
    """A learner received NaN or infinite values."""


class EmptyPool(AuditError):
    """A donor pool is empty even after cell merging."""


class SchemaMismatch(AuditError):
    """An input file does not match the expected schema."""


class EmptyCohort(AuditError):
    """Cohort filters left no records."""


class DomainError(AuditError):
    """A numeric argument is outside the function's domain."""


class DegenerateAllocation(AuditError):
    """Path products sum to ~0; proportional allocation is undefined."""
