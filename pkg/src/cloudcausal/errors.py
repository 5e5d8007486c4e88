"""Exception hierarchy.

Two families matter to callers (and to the CLI exit codes):
:class:`ValidationError` for malformed models, tables and files, and
:class:`PreconditionError` for well-formed inputs an operation refuses to
work on.
"""


class CausalError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(CausalError, ValueError):
    """A model, table or file violates a structural invariant."""


class NormalizationError(ValidationError):
    pass


class ConsistencyError(ValidationError):
    """Graph, CPT and variable declarations disagree."""


class CycleError(ValidationError):
    def __init__(self, cycle):
        self.cycle = tuple(cycle)
        super().__init__("directed cycle through " + " -> ".join(map(str, self.cycle)))


class PreconditionError(CausalError, ValueError):
    """Inputs are valid but the requested operation is not licensed on them."""


class ZeroProbabilityError(PreconditionError):
    """Conditioning on an event of probability zero."""


class AbsoluteContinuityError(PreconditionError):
    """KL divergence requested where p(w) > 0 but q(w) = 0."""


class StateSpaceError(PreconditionError):
    """Exact enumeration would exceed the configured cell cap."""
