"""Exception types shared across the package."""


class Error(Exception):
    """Base class for all domain errors raised by this package."""


class DatasetError(Error):
    """Malformed, incomplete, or inconsistent input data."""


class UnknownCategoryError(Error):
    """A category noun that does not occur in the typicality table."""

    def __init__(self, category, suggestions=()):
        self.category = category
        self.suggestions = tuple(suggestions)
        message = f"unknown category {category!r}"
        if self.suggestions:
            message += "; did you mean: " + ", ".join(self.suggestions)
        super().__init__(message)


class DegenerateTypicalityError(Error):
    """A typicality of exactly 0 or 1 would send a logarithm to -inf.

    The speaker utility takes log of the listener mass on (or off) a
    feature; a hard 0/1 typicality makes that mass vanish and the model
    undefined.  Degenerate tables are rejected rather than clamped.
    """


class ZeroVarianceError(Error):
    """Pearson correlation is undefined when either vector is constant."""


class ZeroMassError(Error):
    """A distribution could not be normalized because its total mass is 0."""
