"""Exception hierarchy.

Solver failures carry the partially computed profile and its report so callers
(the CLI in particular) can still write diagnostics.
"""


class DarkSolitonError(Exception):
    pass


class InvalidParameterError(DarkSolitonError, ValueError):
    pass


class UnavailableTransformError(DarkSolitonError):
    pass


class MultiplierSingularError(DarkSolitonError, ValueError):
    pass


class EtaTouchesOneError(DarkSolitonError, ValueError):
    pass


class TauTooLargeError(DarkSolitonError, ValueError):
    pass


class MomentumUndefinedError(DarkSolitonError):
    pass


class MismatchedLengthsError(DarkSolitonError, ValueError):
    pass


class OffGridAtomWarning(UserWarning):
    pass


class BoxTooSmallWarning(UserWarning):
    pass


class HypothesisWarning(UserWarning):
    """A solver was run on a kernel outside the hypotheses it relies on."""


class SolverError(DarkSolitonError):
    """Base for solver failures; ``profile`` and ``report`` may be None."""

    def __init__(self, message, profile=None, report=None):
        super().__init__(message)
        self.profile = profile
        self.report = report


class NoConvergenceError(SolverError):
    pass


class CollapseToZeroError(SolverError):
    pass


class LinearSolveStagnationError(SolverError):
    pass


class NonDescentError(SolverError):
    pass


class ChainBrokenError(SolverError):
    def __init__(self, message, results=(), lam=None, cause=None):
        super().__init__(message)
        self.results = list(results)
        self.lam = lam
        self.cause = cause
