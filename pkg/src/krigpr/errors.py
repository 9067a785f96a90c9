"""Exception hierarchy shared by all krigpr modules."""


class KrigprError(Exception):
    """Base class for all krigpr errors."""


class DuplicateLocation(KrigprError):
    """Two sampling locations coincide exactly."""


class MissingValue(KrigprError):
    """A required numeric cell is missing or not parseable."""


class TooFewSamples(KrigprError):
    """Not enough observations for the requested operation."""


class ShapeMismatch(KrigprError):
    """Array lengths or required levels do not line up."""


class DegenerateInput(KrigprError):
    """Input carries no usable variation (e.g. constant feature matrix)."""


class EmptyVariogram(KrigprError):
    """No point pair falls within the requested maximum lag."""


class InsufficientBins(KrigprError):
    """Too few empirical variogram bins to fit a model."""


class FitFailure(KrigprError):
    """Variogram model fitting did not produce finite parameters."""


class DomainError(KrigprError):
    """Argument outside the mathematical domain (e.g. negative lag)."""


class SingularSystem(KrigprError):
    """The kriging system is singular even after diagonal jitter."""


class NumericalFailure(KrigprError):
    """A linear solve returned non-finite or badly negative results."""


class TooFewNeighbors(KrigprError):
    """k exceeds the number of available neighbor observations."""


class BackendFailure(KrigprError):
    """An external regressor process failed or violated the protocol."""


class UnsupportedMetric(KrigprError):
    """The requested metric is undefined for this prediction method."""


class MoranUndefined(KrigprError):
    """Moran's I is undefined (constant values)."""


class SkewUndefined(KrigprError):
    """Skewness is undefined (zero variance)."""


class CorrUndefined(KrigprError):
    """Pearson correlation is undefined (constant input)."""


class R2Undefined(KrigprError):
    """R-squared is undefined (constant observations)."""


class NotPSD(KrigprError):
    """Covariance matrix is not positive semi-definite after jitter."""
