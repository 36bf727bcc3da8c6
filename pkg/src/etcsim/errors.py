"""Exception types shared across the package."""


class EtcsimError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(EtcsimError, ValueError):
    """Matrix/vector dimensions or symmetry are inconsistent with the operation."""


class DomainError(EtcsimError, ValueError):
    """A numeric argument lies outside its admissible range."""


class DefinitenessError(EtcsimError, ValueError):
    """A Gram or weight matrix is not Hermitian positive definite."""


class NotHurwitzError(EtcsimError, ValueError):
    """A matrix required to be Hurwitz has spectrum in the closed right half-plane."""


class CertificateError(EtcsimError, RuntimeError):
    """A certificate's hypotheses are violated, so its value is undefined."""


class ConfigurationError(EtcsimError, ValueError):
    """A triggering rule or run setup is internally inconsistent."""


class ConfigParseError(EtcsimError, ValueError):
    """A configuration file failed to parse or validate."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ZenoSuspected(EtcsimError, RuntimeError):
    """An inter-event time fell below the configured guard threshold."""

    def __init__(self, t_k, inter_event):
        super().__init__(
            f"inter-event time {inter_event:.3e} s below guard at t_k = {t_k:.6f} s"
        )
        self.t_k = t_k
        self.inter_event = inter_event


class HorizonError(EtcsimError, RuntimeError):
    """The simulation horizon is too short for the requested quantity."""


class SpectralGapError(EtcsimError, ValueError):
    """An eigenvalue lies too close to the requested splitting abscissa."""


class UnsupportedStructureError(EtcsimError, ValueError):
    """The operation requires matrix structure the input does not have."""
