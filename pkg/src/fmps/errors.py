"""Exception types shared across the package."""


class NonPhysicalRegionError(ValueError):
    """Coupling parameters outside the range with a real ground-state energy."""


class StateNotCanonicalError(RuntimeError):
    """An operation required an (approximately) canonical MPS and got something else."""


class DegenerateStateError(RuntimeError):
    """All singular values fell below the floor; the state collapsed."""


class InsufficientDataError(ValueError):
    """Not enough data points for the requested fit."""


class BracketError(RuntimeError):
    """A root / boundary search could not bracket a sign change."""
