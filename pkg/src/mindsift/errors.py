"""Exception types shared across the pipeline."""


class MindsiftError(Exception):
    """Base class for every library error."""


# corpus
class UnreadableFile(MindsiftError):
    """Input file missing, unreadable, or not decodable as UTF-8."""


class MissingColumn(MindsiftError):
    """The column mapping names a column the file does not have."""


class UnmappedLabel(MindsiftError):
    """A (source, raw_label) pair has no defined mapping for the task."""


class MissingDataset(MindsiftError):
    """A source dataset required by the task was not provided."""


class DegenerateClassWarning(UserWarning):
    """A label group with a single example went entirely to train."""


# lexicon
class MalformedHeader(MindsiftError):
    """Dictionary content violates the %-delimited header format."""


class UnknownCategoryId(MindsiftError):
    """An entry references a category id the header never declared."""


class EmptyLexicon(MindsiftError):
    """Parsed dictionary has no categories or no entries."""


class InsufficientRows(MindsiftError):
    """Standardizer fitting needs at least two rows."""


class DimensionMismatch(MindsiftError):
    """Vector or matrix width differs from the expected dimension."""


# providers
class ProviderUnavailable(MindsiftError):
    """Remote provider failed after the bounded retry policy."""


class EmptyText(MindsiftError):
    """A text submitted for embedding was empty."""


class CorruptCacheEntry(MindsiftError):
    """A cache record failed checksum or structural validation."""


# models
class NonFiniteInput(MindsiftError):
    """Feature data contains NaN or infinite entries."""


class SingleClass(MindsiftError):
    """Linear trainers need at least two distinct labels."""


# evaluation
class LengthMismatch(MindsiftError):
    """y_true and y_pred have different lengths."""


class UnknownTrueLabel(MindsiftError):
    """A true label is outside the declared class list."""


class EmptyMatrix(MindsiftError):
    """Metric computation over a confusion matrix with no examples."""


class InconsistentClassLists(MindsiftError):
    """Reports being combined do not share one class list."""


# pipeline
class ConfigError(MindsiftError):
    """Run configuration is invalid or incomplete."""


class SplitMismatch(MindsiftError):
    """Reports being compared come from different test splits."""


class UnwritableOutput(MindsiftError):
    """Output directory or file could not be written."""
