"""Exception types raised by pqslab."""


class PqslabError(Exception):
    """Base class for all package errors."""


class ConfigError(PqslabError):
    """Invalid sweep/CLI configuration. Carries an optional source line."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class UndefinedCriterionError(PqslabError, ValueError):
    """A criterion is undefined for the given moments (zero mean spin, vacuum, ...)."""


class FixedNumberRequiredError(UndefinedCriterionError):
    """The unnormalized spin-squeezing parameter only exists for a fixed total number."""


class UndeterminedPhaseError(PqslabError, ValueError):
    """Both interferometer readings vanish, so the phase cannot be located."""


class NonConvergenceError(PqslabError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""


class StateFactoryError(PqslabError):
    """A state factory failed for a particular sector."""

    def __init__(self, n, cause):
        self.n = n
        self.cause = cause
        super().__init__(f"state factory failed for n={n}: {cause}")
