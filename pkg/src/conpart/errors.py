class GuardViolation(RuntimeError):
    """A configured size or resource guard was exceeded.

    ``guard`` names the guard so the CLI can report it.
    """

    def __init__(self, guard: str, message: str):
        super().__init__(f"[{guard}] {message}")
        self.guard = guard


class ModelExhausted(GuardViolation):
    """A hard-stopped FixedH model was asked for H_k past its last value."""

    def __init__(self, message: str):
        super().__init__("model-exhausted", message)


class ParseError(ValueError):
    """Malformed rho/model/partition string; ``position`` is a 0-based column."""

    def __init__(self, text: str, position: int, message: str):
        super().__init__(f"{message} at position {position} in {text!r}")
        self.text = text
        self.position = position
