"""Exception hierarchy.

Every exception carries the process exit code the command-line front end
uses for it.  Codes fall in three disjoint ranges: 10-19 for scenario
parsing and validation, 20-29 for numerical failures, 30-39 for I/O.
"""


class PectubeError(Exception):
    exit_code = 1


# -- scenario parsing / validation (10-19) ---------------------------------

class ScenarioError(PectubeError):
    exit_code = 10


class ScenarioNotFoundError(ScenarioError):
    exit_code = 11


class ScenarioSyntaxError(ScenarioError):
    exit_code = 12


class InvariantError(ScenarioError, ValueError):
    """A configuration value violates a model invariant.

    ``key`` names the offending field when known.
    """

    exit_code = 13

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class UnknownKeyError(ScenarioError):
    exit_code = 14


# -- numerics (20-29) ------------------------------------------------------

class ComputationError(PectubeError):
    exit_code = 20


class DomainError(ComputationError, ValueError):
    exit_code = 21


class SingularityError(DomainError):
    exit_code = 22


class BesselOverflowError(ComputationError, OverflowError):
    exit_code = 23


class PoleHitError(ComputationError, ZeroDivisionError):
    exit_code = 24


class AccuracyError(ComputationError):
    exit_code = 25


class NoModeError(ComputationError):
    exit_code = 26


class DegeneratePoleError(ComputationError):
    exit_code = 27


class NonFiniteError(ComputationError):
    exit_code = 28


class UnsupportedTopologyError(DomainError):
    """The operation does not apply to this layer arrangement."""

    exit_code = 29


# -- I/O (30-39) -----------------------------------------------------------

class OutputError(PectubeError, OSError):
    exit_code = 30
