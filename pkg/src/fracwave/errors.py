"""Exception hierarchy shared across the package.

The command line driver maps these onto exit codes, so library code should
raise the most specific class that applies.
"""


class FracwaveError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(FracwaveError):
    """Invalid experiment configuration (bad field, missing section, ...)."""


class NumericsError(FracwaveError):
    """A numerical computation could not be carried out reliably."""


class MittagLefflerError(NumericsError):
    """Mittag-Leffler evaluation outside the supported parameter regime."""


class ContourError(NumericsError):
    """An integration contour collides with (or gets too close to) a spectrum."""


class DefectiveClusterError(NumericsError):
    """A spectral cluster is not diagonalizable where diagonalizability is required."""


class EllipticityError(NumericsError):
    """Coefficient field violates uniform ellipticity."""
