"""Exception hierarchy.

Everything raised on purpose by this package derives from PcauseError so
callers (and the CLI) can distinguish analysis failures from genuine bugs.
"""


class PcauseError(Exception):
    """Base class for all errors raised by pcause."""


class ParseError(PcauseError):
    """Malformed input file (CSV counts, JSON scenario or experimental data)."""


class ValidationError(PcauseError):
    """Inputs are well formed but violate a structural requirement,

    for example unknown covariate names or mismatched stratum sets.
    """


class PositivityError(ValidationError):
    """An operation needs a strictly positive cell or margin that is zero."""


class IncompatibilityError(PcauseError):
    """Observational and experimental inputs cannot coexist.

    Raised when the consistency inequalities linking the joint distribution
    to the interventional marginals fail, or when a bound inverts.
    """


class MissingSampleSizeError(PcauseError):
    """A variance was requested but no sample size is available."""


class DegenerateScenarioError(PcauseError):
    """Sampling keeps producing tables with empty cells.

    Raised by the replication driver when the discard rate is too high for
    variance summaries to be trustworthy.
    """
