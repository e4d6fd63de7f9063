"""Exception types shared across the package."""


class HierdmfError(Exception):
    """Base class for errors raised by this package."""


class FormatError(HierdmfError):
    """A stored file is malformed: bad magic, bad header, or truncated payload."""


class ValidationError(HierdmfError):
    """Input data violates a structural invariant."""


class ConfigError(HierdmfError):
    """Configuration is invalid or internally inconsistent."""
