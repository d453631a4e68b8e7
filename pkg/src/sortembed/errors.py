"""Exception hierarchy shared by all sortembed modules."""


class SortEmbedError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(SortEmbedError, ValueError):
    pass


class ShapeMismatch(DimensionMismatch):
    pass


class NonOrthogonalGenerator(SortEmbedError, ValueError):
    pass


class ClosureCapExceeded(SortEmbedError, RuntimeError):
    pass


class EnumerationCapExceeded(SortEmbedError, RuntimeError):
    pass


class MTooSmall(SortEmbedError, ValueError):
    pass


class ConstantVector(SortEmbedError, ValueError):
    pass


class DegenerateDraw(SortEmbedError, RuntimeError):
    pass


class HypothesisViolated(SortEmbedError, ValueError):
    """A lemma scenario does not satisfy the lemma's hypotheses."""


class AllPairsDegenerate(SortEmbedError, RuntimeError):
    """Every sampled pair had (numerically) zero quotient distance."""


class ConfigError(SortEmbedError, ValueError):
    pass
