"""Exception hierarchy shared by all hoferlab modules."""


class HoferlabError(Exception):
    """Base class for every error raised by this package."""


class DomainError(HoferlabError, ValueError):
    """Input lies outside the domain on which an operation is defined."""


class DegenerateBasisError(HoferlabError, ValueError):
    pass


class UndersampledError(HoferlabError, ValueError):
    """Consecutive samples are too far apart for principal-branch unwrapping."""


class OracleFailureError(HoferlabError, RuntimeError):
    pass


class ConvergenceError(HoferlabError, RuntimeError):
    """An iterative refinement did not reach its tolerance."""


class InvalidDiscError(HoferlabError, ValueError):
    pass


class ConstructionError(HoferlabError, ValueError):
    pass


class CohomologyObstructionError(HoferlabError, ValueError):
    """Two area forms with different total area have no Moser primitive."""


class StepSizeError(HoferlabError, ValueError):
    def __init__(self, message, suggested_steps=None):
        super().__init__(message)
        self.suggested_steps = suggested_steps


class OrientationError(HoferlabError, ValueError):
    pass


class ProfileError(HoferlabError, ValueError):
    pass


class NotInTError(HoferlabError, ValueError):
    """Two connections do not preserve the same loop."""


class MeanNotZeroError(HoferlabError, ValueError):
    pass


class ConfigError(HoferlabError, ValueError):
    pass
