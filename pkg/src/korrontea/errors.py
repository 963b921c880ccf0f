"""Exception types shared across the package."""


class KorronteaError(Exception):
    """Base class for all library errors."""


# --- flow model ---

class SliceNotInHistory(KorronteaError):
    """The given slice is not an element of the history."""


class CrossSiteComparison(KorronteaError):
    """Time stamps of different sites were compared.

    Local physical clocks of distinct sites share only their rate, not
    their origin, so absolute stamp values are incomparable across sites.
    """


class InsufficientHistory(KorronteaError):
    """The history is too short for the requested classification."""


# --- occurrence operators ---

class EmptySet(KorronteaError):
    """minimal/maximal time stamp applied to an empty slice set."""


class NoQualifyingSlice(KorronteaError):
    """No slice in the group has a stamp at or after the given instant."""


class FlowWithoutQualifyingSlice(KorronteaError):
    """A flow of the group has no slice at or after the given instant."""

    def __init__(self, flow_id: str):
        super().__init__(f"flow {flow_id!r} has no qualifying slice")
        self.flow_id = flow_id


# --- fusion engine ---

class EmptyGroup(KorronteaError):
    """A synchronization policy was requested for an empty flow group."""


class MixedSites(KorronteaError):
    """The flows of a group do not share one capture/creation site."""


class UnknownFlow(KorronteaError):
    """An event referenced a flow that is not part of the engine group."""


class NonMonotonicStamps(KorronteaError):
    """A flow delivered a slice whose stamp does not increase."""


class EmptyConsumption(KorronteaError):
    """A composed slice was requested from zero source slices."""


class AlreadyPrimitive(KorronteaError):
    """Separation applied to a history that carries a single flow."""


# --- clocks ---

class TimeReversal(KorronteaError):
    """The virtual timeline was asked to move backwards."""


# --- transport ---

class MalformedFrame(KorronteaError):
    """A wire frame is truncated, has a bad magic, or trailing bytes."""


class VersionMismatch(KorronteaError):
    """A wire frame announced an unsupported protocol version."""


class SequenceGap(KorronteaError):
    """A decoded slice fails the per-flow sequence-number property."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class ChannelClosed(KorronteaError):
    """Send attempted on a closed channel."""


# --- simulator ---

class InvalidConfig(KorronteaError):
    """A scenario configuration violates its invariants."""


class TraceSyntaxError(KorronteaError):
    """A trace file line could not be parsed."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
