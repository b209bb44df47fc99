"""Exception types shared across the package."""


class MecSwarmError(Exception):
    """Base class for all package errors."""


class ConfigError(MecSwarmError, ValueError):
    """Invalid configuration values."""


class ParseError(MecSwarmError, ValueError):
    """A file could not be parsed into the expected structure."""


class ValidationError(MecSwarmError, ValueError):
    """Parsed data violates a domain invariant."""


class ContractError(MecSwarmError, ValueError):
    """Arguments violate an operation's preconditions (shapes, indices)."""


class NonFiniteError(MecSwarmError, FloatingPointError):
    """A NaN or infinity surfaced where finite values are required."""


class CapExceededError(MecSwarmError):
    """An exhaustive enumeration would exceed the configured size cap."""
