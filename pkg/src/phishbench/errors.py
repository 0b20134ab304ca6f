"""Exception types shared across the pipeline."""


class PhishbenchError(Exception):
    """Base class for pipeline errors."""


class MalformedUrlError(PhishbenchError, ValueError):
    """Input string could not be decomposed as an absolute URL."""


class EmptyCorpusError(PhishbenchError, ValueError):
    """An operation that requires records received none."""


class DimensionMismatchError(PhishbenchError, ValueError):
    """Sparse vectors with differing dimensionality were combined."""


class PoolExhaustedError(PhishbenchError, ValueError):
    """Sampling without replacement asked for more points than exist."""


class ProviderError(PhishbenchError, RuntimeError):
    """Decision provider failed mid-triage; the run is incomplete."""
