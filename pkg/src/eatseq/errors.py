"""Exception hierarchy shared by all eatseq modules."""


class EatSeqError(Exception):
    """Base class for all errors raised by this package."""


# --- dependency graph reading ---

class MalformedLine(EatSeqError):
    """A CoNLL-U token line has the wrong column count or a non-numeric field."""


class InvalidGraph(EatSeqError):
    """A dependency graph violates structural invariants (root count, cycles)."""


class IndexOutOfRange(EatSeqError):
    """A token or tuple index does not exist."""


# --- EAT extraction ---

class NoMainVerb(EatSeqError):
    """The sentence has no verbal root to build the main tuple from."""


class EmptySequence(EatSeqError):
    """An operation requiring a non-empty EAT sequence received an empty one."""


class NotAVerb(EatSeqError):
    """Clause-feature detection was pointed at a non-verbal token."""


class InvalidTuple(EatSeqError):
    """An EAT tuple violates its structural invariants."""


# --- vectorization ---

class InconsistentDimension(EatSeqError):
    """Embedding rows disagree on vector length."""


class EmptyFile(EatSeqError):
    """An embedding file contains no usable rows."""


# --- transformations ---

class InvalidCombination(EatSeqError):
    """A requested grammatical edit cannot apply to this clause."""


class SlotEmpty(EatSeqError):
    """A lexical edit targeted an empty slot."""


class NotRemovable(EatSeqError):
    """Removing the argument would leave the tuple without any argument."""


# --- model / training ---

class DimensionMismatch(EatSeqError):
    """Input vectors do not match the model's configured input size."""


class EmptyCorpus(EatSeqError):
    """Training was started with no examples."""


class NonFiniteLoss(EatSeqError):
    """The training loss became NaN or infinite."""


class BadMagic(EatSeqError):
    """The checkpoint file does not start with the expected magic string."""


class VersionMismatch(EatSeqError):
    """The checkpoint container version is not supported."""


class CorruptTensor(EatSeqError):
    """A checkpoint tensor or vocabulary entry is truncated or inconsistent."""


# --- placeholders ---

class PlaceholderExhausted(EatSeqError):
    """More maskable chunks of one class than available placeholder words."""


# --- evaluation / generation ---

class LengthMismatch(EatSeqError):
    """Candidate and reference corpora differ in length."""


class EmptyInput(EatSeqError):
    """An evaluation or parsing run received no usable input."""


class BadTemplate(EatSeqError):
    """The synthetic grammar configuration is unusable."""
