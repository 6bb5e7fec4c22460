"""Exception hierarchy shared by all modules."""


class SripsError(Exception):
    """Base class for library errors."""


class DisconnectedGraph(SripsError):
    """The neighborhood graph has unreachable pairs; sampling is too sparse for the link radius."""


class CombinatorialBudget(SripsError):
    """A partition enumeration would exceed the configured vertex cap."""


class MemoryBudget(SripsError):
    """The simplex count exceeds the configured cap."""


class OutOfRange(SripsError):
    """A filtration value exceeds the scale cap r_max."""


class IllDefined(SripsError):
    """A winding number is not defined (some pair is exactly antipodal)."""


class NoAttribution(SripsError):
    """A bar has no critical simplex to attribute (dimension 0 or infinite in dimension 1)."""
