"""Exception taxonomy shared by the whole package.

ValidationError maps to CLI exit code 2, NumericError to exit code 3.
"""


class CertipropError(Exception):
    pass


class ValidationError(CertipropError):
    """Bad inputs: malformed files, dimension mismatches, invalid flags."""


class NumericError(CertipropError):
    """Numeric failure: overflow, non-finite values, singular systems."""


class SingularMatrixError(NumericError):
    """Recoordination matrix is singular or too ill-conditioned to invert."""
