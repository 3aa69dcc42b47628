"""Exception types shared across the engine."""


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(EngineError):
    """Operator or vector dimensions are inconsistent."""


class ValidationError(EngineError):
    """An input violates a documented precondition."""


class ResourceCapError(EngineError):
    """Composite Liouville dimension exceeds the desk-scale cap."""


class IllConditionedMapError(EngineError):
    """A dynamical-map inverse is too ill-conditioned to trust.

    Carries the offending condition number in ``cond``.
    """

    def __init__(self, message, cond):
        super().__init__(f"{message} (condition number {cond:.3e})")
        self.cond = cond


class DefectiveMapError(EngineError):
    """Eigenvector matrix of a stationary map is numerically defective."""


class RefinementError(EngineError):
    """Adaptive substep refinement failed to converge.

    Carries the best achieved Frobenius-norm change in ``achieved``.
    """

    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved change {achieved:.3e})")
        self.achieved = achieved


class DivergentSpectrumError(EngineError):
    """Time-integrated spectrum diverges (emitter has bright stationary state)."""


class UnsupportedConfigurationError(EngineError):
    """Requested configuration is explicitly unsupported."""


class ConfigError(EngineError):
    """Scenario configuration failed strict validation."""
