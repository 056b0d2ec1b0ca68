"""Exception hierarchy shared by all tailrv modules."""


class TailRVError(Exception):
    """Base class for library errors."""


class InvalidWindowError(TailRVError, ValueError):
    pass


class InvalidEtaError(TailRVError, ValueError):
    pass


class UnsupportedDimensionError(TailRVError, ValueError):
    pass


class IncompatibleGridsError(TailRVError, ValueError):
    pass


class AlignmentError(TailRVError, ValueError):
    pass


class DegenerateSiteError(TailRVError):
    """All draws vanish at the requested site, so p_h cannot be estimated."""


class ViolatedKksuterError(TailRVError):
    """A tail-process draw does not exceed level 1 where it must."""


class SupportMismatchError(TailRVError, ValueError):
    pass


class ZeroNormError(TailRVError, ZeroDivisionError):
    pass


class NonPSDKernelError(TailRVError):
    pass


class InvalidSigmaError(TailRVError, ValueError):
    pass


class InsufficientExceedancesError(TailRVError):
    pass


class DegenerateSampleError(TailRVError, ValueError):
    pass


class RejectionCapError(TailRVError):
    """Representer kept producing identically zero paths."""
