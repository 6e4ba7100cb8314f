"""Exception hierarchy shared across the toolkit.

Three broad families map onto the CLI exit codes: configuration problems
(exit 1), data problems (exit 2), and provider problems (exit 3).  Modules
define their specific exceptions as subclasses of one of these families so
the CLI can translate any library error into the right exit code without
knowing every concrete type.
"""

from __future__ import annotations


class TriplekitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(TriplekitError):
    """A usage or configuration problem (CLI exit code 1)."""


class DataError(TriplekitError):
    """Malformed or missing data (CLI exit code 2)."""


class ProviderFault(TriplekitError):
    """A model-provider problem (CLI exit code 3)."""


# --- configuration family ---------------------------------------------------

class ConfigInvalid(ConfigError):
    """A run configuration is incomplete or references missing files."""


class ConfigViolation(ConfigError):
    """A request violates strict decoding requirements."""


class MissingCredentials(ConfigError):
    """Live or record mode was requested without provider credentials."""


# --- data family ------------------------------------------------------------

class MalformedFile(DataError):
    """An ontology file does not follow the sectioned text format."""


class DuplicateName(DataError):
    """An ontology file lists the same name twice in one section."""


class EmptyOntology(DataError):
    """An ontology has an empty entity or relation set."""


class EmptyInput(DataError):
    """An operation that needs at least one input got none."""


class NoEligibleDemonstration(DataError):
    """No demonstration satisfies the ontology/granularity/leakage filters."""


class EmptyReference(DataError):
    """A reference text for a similarity metric is empty."""


class MalformedVerdict(DataError):
    """A judge response has no parseable ranking bracket."""


class MismatchedModels(DataError):
    """Two rankings cover different model sets."""


class EmptyHistogram(DataError):
    """A rank histogram has no mass to take an expectation over."""


class AllVerdictsMalformed(DataError):
    """Every judge verdict in a round failed to parse."""


class MissingVerdict(DataError):
    """A prompt has no verdict during best-answer aggregation."""


class KTooLarge(DataError):
    """A sample size exceeds the population size."""


class SessionCorrupt(DataError):
    """An annotation session log cannot be replayed."""


class MissingRun(DataError):
    """A run directory or its manifest does not exist."""


class MissingReference(DataError):
    """A reference triple file does not exist or is empty."""


# --- provider family --------------------------------------------------------

class ProviderError(ProviderFault):
    """A provider call failed after all retry attempts."""


class ProviderTransportError(ProviderFault):
    """A transient transport failure; the gateway may retry these."""


class CassetteMiss(ProviderFault):
    """Replay mode found no cassette record for a request digest."""


class ProviderFailure(ProviderFault):
    """An embedding provider failed to produce a vector."""
