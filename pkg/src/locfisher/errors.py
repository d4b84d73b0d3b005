"""Exception hierarchy.

Configuration problems derive from :class:`ConfigurationError` (a
``ValueError``); failures of a numerical method on valid input derive from
:class:`NumericalFailure`.  The CLI maps the two families onto distinct exit
codes.
"""


class LocFisherError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(LocFisherError, ValueError):
    """Input that can never be evaluated, whatever the numerics."""


class EmptyConfig(ConfigurationError):
    pass


class NonpositiveWeight(ConfigurationError):
    pass


class NonFiniteInput(ConfigurationError):
    pass


class CoincidentSources(ConfigurationError):
    """Two source positions coincide, so the coherent-state basis is singular."""


class NumericalFailure(LocFisherError, ArithmeticError):
    """A method cannot deliver a trustworthy result at the working precision."""


class ConditioningFailure(NumericalFailure):
    pass


class TruncationInsufficient(NumericalFailure):
    pass


class QuadratureNonConvergence(NumericalFailure):
    pass


class DegenerateQubitState(NumericalFailure):
    pass


class DegenerateFit(NumericalFailure):
    pass


class SingularTransform(NumericalFailure):
    pass


class ConvergenceFailure(LocFisherError):
    """An iterative refinement ran out of doublings."""
