"""Semantic exception hierarchy for the toolkit.

Public functions raise these instead of bare ValueError so callers (and the
CLI exit-code mapping) can distinguish usage problems from cost-control
problems.
"""


class PlantedBipartiteError(Exception):
    """Base error for this package."""


class ParameterError(PlantedBipartiteError, ValueError):
    """An argument violates its contract (domain, range, shape)."""


class FormatError(PlantedBipartiteError, ValueError):
    """A matrix file or config document is malformed."""


class BudgetError(PlantedBipartiteError):
    """An exact enumeration would exceed its configured budget."""


class EmptyConditionError(PlantedBipartiteError):
    """A conditional expectation was requested on a probability-zero event."""


class BracketError(PlantedBipartiteError):
    """A root-finding bracket does not contain a sign change."""


class ConfigError(PlantedBipartiteError, ValueError):
    """An experiment configuration failed validation.

    ``field`` holds the dotted path of the offending entry.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
