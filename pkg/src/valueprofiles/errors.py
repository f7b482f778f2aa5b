"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration value or inconsistent settings."""


class SequenceExhaustedError(RuntimeError):
    """Raised when an environment is stepped past its last trial."""


class DegenerateEvidenceError(ArithmeticError):
    """The observation has zero likelihood under every hidden state."""


class ContractError(ValueError):
    """An object was used with a kind or shape it does not support."""
