"""Exception types shared across the library.

Every error raised by alphacross derives from :class:`AlphaCrossError`, so
callers can catch one type at the boundary. The CLI maps these onto stable
exit codes (see ``alphacross.cli.EXIT_CODES``).
"""


class AlphaCrossError(Exception):
    """Base class for all alphacross errors."""


class InputError(AlphaCrossError):
    """Malformed user input: files, config keys, dimensions, parameter ranges."""


class MissingValues(InputError):
    """A time series contains NaN/None cells; ingestion rejects these outright."""


class DimensionMismatch(InputError):
    """Turnovers, labels and history do not describe the same set of streams."""


class NegativeTurnover(InputError):
    """A per-stream turnover fraction is negative."""


class AllZeroWeights(AlphaCrossError):
    """Every raw weight is zero, so there is nothing to normalize."""


class ZeroVolatility(AlphaCrossError):
    """Portfolio variance is zero; the Sharpe ratio is undefined."""


class ZeroVarianceStream(AlphaCrossError):
    """A stream's history is constant; its correlation row is undefined."""


class NotPositiveDefinite(AlphaCrossError):
    """A matrix that must be positive-definite is not (no deformation attempted)."""


class IndefiniteCovariance(AlphaCrossError):
    """Sample covariance has negative eigenvalues beyond rounding tolerance."""


class IndefiniteCorrelation(AlphaCrossError):
    """Leading correlation eigenvalue is non-positive; the matrix is corrupt."""


class SingularCovariance(AlphaCrossError):
    """Covariance not invertible; use the principal-component regression path."""


class RankDeficient(AlphaCrossError):
    """More factors requested than the covariance rank supports."""


class RankDeficientLoadings(AlphaCrossError):
    """Regression loadings lack full column rank under the weighted inner product."""


class AllAlphasKilled(AlphaCrossError):
    """Costs dominate every alpha: the active set is empty and no valid
    allocation satisfying the unit absolute-weight budget exists."""


class CycleDetected(AlphaCrossError):
    """The inner iteration revisited a (active set, signs) state without
    converging. Carries the offending state for diagnosis."""

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state


class MaxIterations(AlphaCrossError):
    """Iteration cap reached before the stopping criteria were met."""


class OuterLoopCycle(AlphaCrossError):
    """The turnover-reduction recompute loop revisited a universe."""


class TooManyStreams(AlphaCrossError):
    """Brute-force enumeration refused: 3^N cost grows too fast past N = 8."""


class NoFeasiblePattern(AlphaCrossError):
    """Only the empty sign pattern is feasible: costs kill everything."""


class NoPositiveCapacity(AlphaCrossError):
    """Optimized P&L is non-positive at every sampled investment level."""


class UnboundedCapacity(AlphaCrossError):
    """With no impact term (Q = 0) the optimal investment level is unbounded."""
