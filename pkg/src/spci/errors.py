"""Exception hierarchy for the spci package.

Every error raised by the library derives from :class:`SpciError`, so callers
can catch one base class at API boundaries (the CLI maps subclasses to exit
codes).
"""


class SpciError(Exception):
    """Base class for all spci errors."""


# --- spectral pipeline ---

class AllZeroInBand(SpciError):
    """No strictly positive magnitude inside the normalization band."""


class BandOutOfRange(SpciError):
    """Frequency band exceeds Nyquist or contains no spectrum bins."""


# --- signal synthesis ---

class DurationTooShort(SpciError):
    """Requested record is shorter than one carrier period of the pulse."""


# --- file ingestion ---

class ParseError(SpciError):
    """File content could not be parsed as waveform data."""


class EmptyFile(SpciError):
    """File contains no samples."""


class NonUniformSampling(SpciError):
    """Time column deviates from a uniform sampling grid."""


class TruncatedFile(SpciError):
    """Binary file ends before the declared sample count."""


class UnknownLayout(SpciError):
    """Binary layout descriptor is invalid or unsupported."""


class MissingFile(SpciError):
    """Manifest references a file that does not exist."""


class DuplicateKey(SpciError):
    """Two manifest records share the same identifying key."""


class InvalidPairing(SpciError):
    """Excitation/gain combination violates the enforced pairing table."""


# --- study runner ---

class MissingRecord(SpciError):
    """A study selector matched no record for some required group."""


class UnpairedRecord(SpciError):
    """A reciprocity cell is present in only one propagation direction."""


class InsufficientRepetitions(SpciError):
    """A repeatability group holds fewer than two measurements."""


class IoError(SpciError):
    """Report file could not be written."""
