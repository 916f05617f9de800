"""Exception taxonomy for the whole package.

Grouping them here keeps the CLI's exit-code mapping in one place:
anything raised before work starts (bad paths, bad config, malformed
input) maps to exit 2, processing failures to exit 1.
"""


class SrlkitError(Exception):
    """Base class for all package-specific errors."""


# --- domain types ---------------------------------------------------------

class EmptySentence(SrlkitError, ValueError):
    """An operation that needs at least one token got an empty sentence."""


# --- corpus I/O -----------------------------------------------------------

class CorpusFormatError(SrlkitError, ValueError):
    """Base class for parse-time format violations."""


class ColumnCountMismatch(CorpusFormatError):
    """A column-format row has the wrong arity for its sentence block."""


class DanglingApred(CorpusFormatError):
    """Number of role columns disagrees with the number of marked predicates."""


class BadIndex(CorpusFormatError):
    """A token/head index column is non-numeric or out of range."""


class MalformedRecord(CorpusFormatError):
    """A record is not valid JSON or is missing/abusing required fields."""


class IndexOutOfRange(CorpusFormatError):
    """A tuple references token positions outside the sentence."""


class EpsilonRoleInGold(CorpusFormatError):
    """The reserved null role appeared in gold annotations."""


class EmptyCorpus(SrlkitError, ValueError):
    """Vocabulary construction got zero sentences."""


class DimensionDrift(CorpusFormatError):
    """An embedding file mixes vector dimensions."""


class UnreadableFile(SrlkitError, OSError):
    """A required input file could not be opened or read."""


# --- autodiff -------------------------------------------------------------

class ShapeMismatch(SrlkitError, ValueError):
    """Operands have shapes the operation does not accept."""


class NotScalar(SrlkitError, ValueError):
    """backward() was asked to differentiate a non-scalar value."""


class NoTape(SrlkitError, RuntimeError):
    """backward() was called on a value that was never tape-recorded."""


class TapeConsumed(SrlkitError, RuntimeError):
    """backward() ran twice on one tape; gradients would double-accumulate."""


# --- decoding -------------------------------------------------------------

class CoreMaskOverflow(SrlkitError, ValueError):
    """More core roles than the decoder's bitmask supports."""


# --- evaluation / conversion ----------------------------------------------

class LengthMismatch(SrlkitError, ValueError):
    """Predicted and gold corpora have different sentence counts."""


class MissingSyntax(SrlkitError, ValueError):
    """Head-based conversion needs gold syntactic heads and none are present."""


class CyclicHeads(SrlkitError, ValueError):
    """The head annotation contains a cycle (no path to the root)."""


# --- checkpoints / CLI ------------------------------------------------------

class IncompatibleCheckpoint(SrlkitError, ValueError):
    """Checkpoint and requested input disagree on annotation style or shape."""
