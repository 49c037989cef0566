"""Exception types shared across the package."""


class WoldlabError(Exception):
    """Base class for all errors raised by this package."""


class UnknownVertexError(WoldlabError):
    """A vertex is outside the tree, or the query crosses a declared boundary."""


class MalformedTreeError(WoldlabError):
    """An adjacency description violates the tree contract."""


class ResourceCapError(WoldlabError):
    """An enumeration touched more vertices than the configured cap allows."""


class DegenerateNormError(WoldlabError):
    """A one-step shift norm fell below the left-invertibility floor."""


class MissingWeightError(WoldlabError):
    """A file-backed weight system has no entry for a requested vertex."""


class DivergentSeriesError(WoldlabError):
    """An operation that requires a convergent branch-ratio series was asked
    to run on a divergent one."""


class UndecidedSeriesError(WoldlabError):
    """A series verdict came back inconclusive where a definite answer was
    required to proceed."""


class PreconditionError(WoldlabError):
    """A report was requested whose defining hypothesis does not hold."""
