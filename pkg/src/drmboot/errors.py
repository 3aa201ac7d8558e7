"""Exception types shared across the package."""


class DrmError(Exception):
    """Base class for all drmboot errors."""


class BasisDomainError(DrmError):
    """An observation lies outside the domain of a basis term.

    Carries enough context (group, index within group, offending value and
    term) to point the user at the bad record.
    """

    def __init__(self, message, *, group=None, index=None, value=None, term=None):
        super().__init__(message)
        self.group = group
        self.index = index
        self.value = value
        self.term = term


class EvaluationError(DrmError):
    """A likelihood evaluation produced a non-finite result.

    ``theta`` is the parameter block being evaluated; ``observation`` is the
    pooled index of the first offending observation when identifiable.
    """

    def __init__(self, message, *, theta=None, observation=None):
        super().__init__(message)
        self.theta = theta
        self.observation = observation


class FitError(DrmError):
    """Maximization failed in a way ridge escalation could not recover."""


class BootstrapError(DrmError):
    """Bootstrap resampling produced pathologically unstable refits."""


class ConfigError(DrmError):
    """Invalid run configuration (CLI or config file)."""
