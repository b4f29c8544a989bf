"""Exception types shared across the package."""


class CommCostError(ValueError):
    """Base class for all input, schema, and fitting errors raised here."""


class SchemaError(CommCostError):
    """Parameter document violates the model schema."""


class LayoutError(CommCostError):
    """Rank layout is inconsistent or a rank is out of range."""


class PatternError(CommCostError):
    """Communication pattern or sparse matrix input is invalid."""


class TraceError(CommCostError):
    """Queue trace or schedule is malformed."""


class FitError(CommCostError):
    """Parameter estimation cannot proceed on the given samples."""
