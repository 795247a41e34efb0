"""Exception hierarchy shared by the library and the command-line harness."""


class SyncError(Exception):
    """Base class for all iqsync failures."""


class ConfigurationError(SyncError, ValueError):
    """Invalid protocol, link or sweep parameters."""


class OversizeError(SyncError):
    """A pattern or simulation exceeds the desk-scale guard."""


class DetectionDataError(SyncError, ValueError):
    """Malformed detection data: unsorted, unparsable, empty or out of range."""


class NoDetectionStatisticsError(SyncError, ValueError):
    """The counter distribution is degenerate (p_sig = p_noise = 0)."""


class SolverError(SyncError):
    """The tolerable-attenuation bracket is not monotone."""


class NoSolutionError(SolverError):
    """The requested success probability cannot be reached."""


class FitError(SyncError, ValueError):
    """Degenerate input for the poly-logarithmic fit."""
