"""Exception types shared across the package."""


class DegenerateDistanceError(ValueError):
    """A path-loss term was evaluated at zero distance."""


class EpisodeFinishedError(RuntimeError):
    """A step was requested after the time horizon ran out."""


class InfeasibleConfigurationError(ValueError):
    """Scenario or radio parameters admit no valid safe distance or placement."""


class InvariantError(AssertionError):
    """An internal structural invariant was violated (indicates a bug)."""
