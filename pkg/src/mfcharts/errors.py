"""Exception hierarchy.

Every error raised on purpose by the package derives from ``MfchartsError``.
The ``exit_code`` class attribute is what the command line returns when the
error escapes a subcommand: 1 for usage/configuration problems, 3 for
numerical failures.
"""


class MfchartsError(Exception):
    exit_code = 1


class ConfigError(MfchartsError, ValueError):
    exit_code = 1


class NumericError(MfchartsError, ArithmeticError):
    exit_code = 3


# basis
class InvalidDomain(ConfigError):
    pass


class TooFewBasis(ConfigError):
    pass


class PointOutOfDomain(ConfigError):
    pass


class SingularSystem(NumericError):
    pass


class NonFiniteInput(NumericError):
    pass


class EmptyGrid(ConfigError):
    pass


class AllGcvNonFinite(NumericError):
    pass


# mfd
class ShapeMismatch(ConfigError):
    pass


class InsufficientPoints(ConfigError):
    def __init__(self, message, *, obs_id=None, var=None, k=None):
        super().__init__(message)
        self.obs_id = obs_id
        self.var = var
        self.k = k


class ArgOutOfDomain(ConfigError):
    pass


class DegenerateVariable(NumericError):
    pass


class UnknownId(ConfigError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class UnknownVariable(ConfigError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class BasisMismatch(ConfigError):
    pass


# mfpca / charts / regression
class EigenFailure(NumericError):
    pass


class ZeroEigenvalue(NumericError):
    pass


class EmptyInput(ConfigError):
    pass


class InsufficientDof(NumericError):
    pass


class InsufficientData(ConfigError):
    pass


# simulation
class UnsupportedR2(ConfigError):
    pass


class InvalidShiftType(ConfigError):
    pass


# cli / persistence
class InvalidConfig(ConfigError):
    pass


class IoError(ConfigError):
    pass


class SchemaVersionMismatch(ConfigError):
    pass


class KindMismatch(ConfigError):
    pass
