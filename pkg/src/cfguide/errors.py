"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An operation was called with inputs that break its documented contract."""


class UndefinedMetricError(ValueError):
    """A metric is mathematically undefined for the given inputs (e.g. single-class AUC)."""


class ConfigurationError(ValueError):
    """A component is missing required configuration (vocab entries, endpoints, paths)."""


class ConflictError(RuntimeError):
    """An operation is not legal in the item's current state."""


class NotFoundError(KeyError):
    """A referenced model, corpus or item id does not exist."""


class LlmTransportError(RuntimeError):
    """The external LLM endpoint could not be reached; the request may be retried."""


class LlmParseError(RuntimeError):
    """The external LLM replied, but the reply could not be parsed; retrying won't help."""
