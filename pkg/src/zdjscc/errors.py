"""Exception types shared across the package."""


class ZdjsccError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(ZdjsccError):
    pass


class SingularMatrix(ZdjsccError):
    pass


class NotSymmetric(ZdjsccError):
    pass


class NotPD(ZdjsccError):
    pass


class NotPSD(ZdjsccError):
    pass


class NoConvergence(ZdjsccError):
    pass


class ResonantSpectrum(ZdjsccError):
    """Raised when some eigenvalue product lambda_i(A) * lambda_j(B) is too
    close to 1 for the Stein equation X = A X B' + W to have a well
    conditioned unique solution."""


class InvalidModel(ZdjsccError):
    pass


class InvalidArgument(ZdjsccError):
    pass


class DegenerateDirection(ZdjsccError):
    pass


class SingularInnovationCovariance(ZdjsccError):
    pass


class CertificateFailure(ZdjsccError):
    """The scale search for the encoding matrix ran past its doubling cap.

    This should never happen for a feasible model; treat it as a bug signal
    rather than a normal infeasibility verdict.
    """
