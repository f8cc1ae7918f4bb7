"""Exception taxonomy.

Three error families map onto the CLI exit codes: hierarchy validation
(exit 1), stream / protocol IO (exit 2), numeric domain (exit 3).
"""


class HiercertError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(HiercertError, ValueError):
    """A numeric argument is outside its mathematical domain."""


# --- hierarchy validation -------------------------------------------------

class HierarchyError(HiercertError, ValueError):
    """The hierarchy document violates a structural invariant."""


class MultipleParentsError(HierarchyError):
    pass


class LevelInversionError(HierarchyError):
    pass


class CycleDetectedError(HierarchyError):
    pass


class DanglingParentError(HierarchyError):
    pass


class EmptyLeafSetError(HierarchyError):
    pass


# --- sample streams and protocol ------------------------------------------

class StreamError(HiercertError, IOError):
    """Sample stream or external-process protocol failure."""


class BadMagicError(StreamError):
    pass


class HeaderMismatchError(StreamError):
    pass


class InsufficientSamplesError(StreamError):
    pass


class LabelOutOfRangeError(StreamError):
    pass


class UnsupportedCapabilityError(StreamError):
    pass


class ProcessHandshakeError(StreamError):
    pass


# --- configuration ----------------------------------------------------------

class NonDescendingThresholdsError(DomainError):
    pass


class DimMismatchError(HiercertError, ValueError):
    """Arrays that must describe the same pixel grid disagree in shape."""
