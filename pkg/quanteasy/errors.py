# -*- coding: utf-8 -*-

"""Exceptions raised by quanteasy.

Every error belongs to one of three families. The command line maps the family
to its exit code, so callers only need to catch :class:`QuantEasyError`.
"""


class QuantEasyError(Exception):
    exit_code = 1


class ConfigError(QuantEasyError):
    exit_code = 2


class DataError(QuantEasyError):
    exit_code = 3


class NumericalError(QuantEasyError):
    exit_code = 4


#################
#  data errors  #
#################
class UnparseableRow(DataError):
    def __init__(self, row, reason):
        super(UnparseableRow, self).__init__(f"row {row}: {reason}")
        self.row = row
        self.reason = reason


class EmptyFile(DataError):
    pass


class NoValidDays(DataError):
    pass


class EmptyDay(DataError):
    pass


class TooFewObservations(DataError):
    pass


class DegenerateDay(DataError):
    pass


class SeriesTooShort(DataError):
    pass


class IndexOutOfRange(DataError):
    pass


class InsufficientHistory(DataError):
    pass


class MissingImpliedVol(DataError):
    pass


class LengthMismatch(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class TooFewQuotes(DataError):
    pass


class NoBracketingMaturities(DataError):
    pass


class LookAheadError(DataError):
    pass


class MultiStepRefused(DataError):
    pass


######################
#  numerical errors  #
######################
class RankDeficientDesign(NumericalError):
    pass


class NonConvergence(NumericalError):
    pass


class ExplosivePath(NumericalError):
    pass


class AllStartsFailed(NumericalError):
    pass


class NoStableRegion(NumericalError):
    def __init__(self, msg, table=None):
        super(NoStableRegion, self).__init__(msg)
        self.table = table


class NonFiniteLikelihood(NumericalError):
    pass


class OptimizerDivergence(NumericalError):
    pass


class RootBracketFailure(NumericalError):
    pass


class RootFailure(NumericalError):
    pass


class NoBracket(NumericalError):
    pass


class DegenerateVariance(NumericalError):
    pass


class BootstrapFailure(NumericalError):
    pass


class SeparationDetected(UserWarning):
    """Perfect separation in the hit logit; the fit fell back to a ridge penalty."""
