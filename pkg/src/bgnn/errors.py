"""Exception types shared across the package."""


class BgnnError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(BgnnError):
    """Operands have incompatible shapes."""


class DomainError(BgnnError):
    """A value lies outside an operation's mathematical domain."""


class ContractError(BgnnError):
    """A caller violated a documented precondition."""


class ConfigError(BgnnError):
    """An invalid configuration value."""


class FormatError(BgnnError):
    """A dataset file or bundle does not match its documented format."""


class TrainingError(BgnnError):
    """Training diverged or otherwise failed at runtime."""
