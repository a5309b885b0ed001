"""Exception hierarchy shared by every stage of the pipeline."""


class RenewcastError(Exception):
    """Base class for all package errors."""


# ingest
class MissingColumn(RenewcastError):
    def __init__(self, name):
        super().__init__(f"column {name!r} missing from input")
        self.name = name


class DuplicateTimestamp(RenewcastError):
    pass


class EmptyFile(RenewcastError):
    pass


class NoOverlap(RenewcastError):
    pass


class FrequencyMismatch(RenewcastError):
    pass


class AllMissingColumn(RenewcastError):
    def __init__(self, name):
        super().__init__(f"column {name!r} has no observed values")
        self.name = name


class AllColumnsDropped(RenewcastError):
    pass


class InvalidSyntheticSpec(RenewcastError):
    pass


# features
class EmptyTrainRange(RenewcastError):
    pass


class UnfittedColumn(RenewcastError):
    pass


class TargetMissingInTrain(RenewcastError):
    pass


class NoTimestamp(RenewcastError):
    pass


class StillNonStationary(RenewcastError):
    pass


class ZeroVarianceTarget(RenewcastError):
    pass


# stats
class TooFewSamples(RenewcastError):
    pass


class TooShort(RenewcastError):
    pass


class SingularDesign(RenewcastError):
    pass


class DegenerateSeries(RenewcastError):
    pass


class LengthMismatch(RenewcastError):
    pass


class DimensionMismatch(RenewcastError):
    pass


# nn / models
class ShapeMismatch(RenewcastError):
    pass


class SequenceTooShort(RenewcastError):
    pass


class DivergenceDetected(RenewcastError):
    pass


class InvalidSpec(RenewcastError):
    pass


class NonConvergence(RenewcastError):
    pass


class InvalidOrders(RenewcastError):
    pass


# hpo / eval / cli
class AllTrialsDiverged(RenewcastError):
    pass


class SplitTooSmall(RenewcastError):
    pass


class TooFewFolds(RenewcastError):
    pass


class ConfigInvalid(RenewcastError):
    def __init__(self, field, reason=""):
        msg = f"invalid config field {field!r}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)
        self.field = field


class DatasetMissing(RenewcastError):
    pass
