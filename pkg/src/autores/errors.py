"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes, so every raised error should be one of
the classes below rather than a bare ValueError.
"""


class AutoresError(Exception):
    """Base class for package errors."""


class DomainError(AutoresError, ValueError):
    """Argument outside the domain of a formula (e.g. tau <= 0)."""


class SingularityError(AutoresError):
    """Right-hand side evaluated at a singular state (amplitude below floor)."""


class BudgetError(AutoresError):
    """Integration exceeded its step budget."""


class PreconditionError(AutoresError):
    """Caller violated an operation contract (too-short trajectory, degenerate root...)."""


class ConfigError(AutoresError, ValueError):
    """Malformed or physically invalid experiment configuration."""
