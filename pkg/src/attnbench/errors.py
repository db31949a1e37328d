"""Exception types shared across the workbench modules."""


class WorkbenchError(Exception):
    """Base class for every error raised by this package."""


class BadParams(WorkbenchError):
    """A caller-supplied parameter violates an operation's precondition."""


class EmptyTrainSet(WorkbenchError):
    pass


class NonFiniteValue(WorkbenchError):
    pass


class OddDimension(WorkbenchError):
    pass


class DimensionMismatch(WorkbenchError):
    pass


class LengthMismatch(WorkbenchError):
    pass


class NonStochasticRows(WorkbenchError):
    """An attention matrix row does not sum to one within tolerance."""


class BadBundle(WorkbenchError):
    """Attention bundle manifest and payload disagree or are corrupt."""


class ZeroDivisor(WorkbenchError):
    pass


class EmptyBatch(WorkbenchError):
    pass


class EmptyResults(WorkbenchError):
    pass


class TooShort(WorkbenchError):
    """Input sequence is shorter than the metric requires."""


class UndefinedSampEn(WorkbenchError):
    """Sample entropy has no matching templates and is undefined."""


class EmptyTrain(WorkbenchError):
    pass


class UnknownClass(WorkbenchError):
    pass


class EntropyDegenerate(WorkbenchError):
    """Entropy penalty weight is zero and no epsilon guard is active."""


class UnfinalizedModel(WorkbenchError):
    pass


class VocabularyMismatch(WorkbenchError):
    pass


class InsufficientSamples(WorkbenchError):
    pass
