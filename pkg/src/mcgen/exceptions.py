class MCGenWarning(UserWarning):
    """Degenerate-but-tolerated input (constant feature, tiny class, k=1, ...)."""


class ValidationError(ValueError):
    """Bad user input. ``stage`` names the pipeline stage or config object."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class InvariantError(RuntimeError):
    """An internal invariant was violated; indicates a bug, not bad input."""
