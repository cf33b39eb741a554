"""
Exception types raised across the fsispectra packages.
"""


class MeshError(ValueError):
    """Invalid geometry, mesh file parse failure or violated mesh invariant."""

    def __init__(self, message: str, line: int = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DimensionError(ValueError):
    """Array or state does not match the expected layout size."""

    def __init__(self, what: str, expected, actual):
        super().__init__(f"{what}: expected {expected}, got {actual}")
        self.expected = expected
        self.actual = actual


class ConfigError(ValueError):
    """Configuration validation failure; lists every violated field."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("Invalid configuration: " + "; ".join(self.violations))


class NotInComplementError(ValueError):
    """State handed to the zero-resolvent solver does not lie in N⊥."""


class SolverError(RuntimeError):
    """Factorization, eigensolver or time-stepping breakdown."""

    def __init__(self, message: str, step: int = None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step
