"""Exception taxonomy shared across the library."""


class FreqwalkError(Exception):
    """Base class for all library errors."""


class NonPhysicalState(FreqwalkError):
    """Effective inertia collapsed (M(x) <= M_min) while evaluating the dynamics."""

    def __init__(self, message, time=None, step=None):
        super().__init__(message)
        self.time = time
        self.step = step


class NonFiniteState(FreqwalkError):
    """Trajectory left the representable range (overflow / NaN)."""

    def __init__(self, message, time=None, step=None):
        super().__init__(message)
        self.time = time
        self.step = step


class InfeasibleGain(FreqwalkError):
    """Gain vector violates the initial-condition feasibility bound."""


class SingularInitialTangent(FreqwalkError):
    """Initial-tangent derivative is singular at the zero-discriminant boundary."""


class NoEquilibrium(FreqwalkError):
    """The steady-state equation has no real root for these gains."""


class MissingTangents(FreqwalkError):
    """Operation requires a trajectory integrated with tangents."""


class InfeasiblePerturbation(FreqwalkError):
    """A finite-difference probe point left the feasible gain region."""


class EmptyGradientSet(FreqwalkError):
    """Gradient surgery needs at least one gradient."""


class SchemaError(FreqwalkError):
    """CSV or config layout does not match the expected schema."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ConfigError(FreqwalkError):
    """Run configuration is malformed or contains unknown keys."""
