"""Exception types shared across the package.

Plain ``ValueError`` is used for ordinary precondition violations; the
classes here mark conditions the CLI maps to distinct error categories.
"""


class PhotonCalError(Exception):
    """Base class for package-specific failures."""


class FormatError(PhotonCalError):
    """A file is malformed: bad magic, truncated payload, failed checksum."""


class CalibrationError(PhotonCalError):
    """A calibration stack is unusable (e.g. too many defective pixels)."""


class ScopeError(PhotonCalError):
    """A lookup table was applied to data outside the scope it was built from."""
