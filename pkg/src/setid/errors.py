"""Exception hierarchy.

Every error carries a ``stage`` tag and an ``exit_code`` so the command line
front end can map failures to distinct process exit codes.
"""

from __future__ import annotations


class SetIdError(Exception):
    """Base class for all package errors."""

    stage = "setid"
    exit_code = 10


# -- configuration and data ------------------------------------------------

class ConfigError(SetIdError):
    stage = "config"
    exit_code = 3


class ParseError(ConfigError):
    """Malformed configuration text.

    Parameters
    ----------
    message : str
        Human readable description.
    offset : int
        Zero-based character offset into the parsed string.
    line, column : int
        One-based position of the offending character.
    """

    def __init__(self, message: str, offset: int = 0, line: int = 1, column: int | None = None):
        self.offset = int(offset)
        self.line = int(line)
        self.column = int(column if column is not None else offset + 1)
        super().__init__(f"{message} (line {self.line}, column {self.column}, offset {self.offset})")


class UnknownParameterName(ConfigError):
    pass


class DimensionMismatch(SetIdError):
    stage = "model"
    exit_code = 3


class DataError(SetIdError):
    stage = "data"
    exit_code = 4


class RaggedRows(DataError):
    pass


class NonNumericCell(DataError):
    pass


class SurveyOutOfRange(DataError):
    pass


# -- model solution --------------------------------------------------------

class SolveError(SetIdError):
    stage = "solve"
    exit_code = 5


class Indeterminate(SolveError):
    pass


class NoStableSolution(SolveError):
    pass


class NumericalFailure(SolveError):
    pass


class SolveFailedAtPerturbation(SolveError):
    pass


class RiccatiDivergence(SolveError):
    pass


# -- filtering ---------------------------------------------------------------

class FilterError(SetIdError):
    stage = "filter"
    exit_code = 6


class NonPSDCovariance(FilterError):
    pass


# -- wedge algebra and moments ----------------------------------------------

class WedgeError(SetIdError):
    stage = "wedges"
    exit_code = 8


class SingularMapUnflagged(WedgeError):
    pass


class CalibrationOutsideValidRegion(WedgeError):
    pass


class MomentError(SetIdError):
    stage = "moments"
    exit_code = 7


class DegenerateSurvey(MomentError):
    pass


class AlphaBlockRankDeficient(MomentError):
    pass


# -- estimation ----------------------------------------------------------------

class EstimationError(SetIdError):
    stage = "estimate"
    exit_code = 7


class EmptySetAtCutoff(EstimationError):
    def __init__(self, message: str, suggested_cutoff: float | None = None):
        self.suggested_cutoff = suggested_cutoff
        super().__init__(message)


class AllProposalsRejected(EstimationError):
    pass


class NonFiniteCriterion(EstimationError):
    pass


# -- perturbation weights --------------------------------------------------

class QPError(SetIdError):
    stage = "wedges"
    exit_code = 8


class SingularMomentCovariance(QPError):
    pass


class QPInfeasible(QPError):
    def __init__(self, message: str, certificate=None):
        self.certificate = certificate
        super().__init__(message)


# -- specification test --------------------------------------------------------

class TestError(SetIdError):
    __test__ = False  # keep pytest from collecting this class
    stage = "test"
    exit_code = 9


class SingularVarianceOnTestedCoords(TestError):
    pass


class DegenerateBootstrapDistribution(TestError):
    pass


# -- warnings ------------------------------------------------------------------

class InstrumentRankDeficient(UserWarning):
    """Instrument second-moment matrix has deficient rank."""


class AcceptanceRateWarning(UserWarning):
    """Post-adaptation acceptance rate outside the target window."""


class DegenerateSurveyWarning(UserWarning):
    """Survey series is constant at 0 or 1 and reduces to a limit case."""
