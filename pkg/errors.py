# errors.py


class ScribeFlowError(Exception):
    """Base error; exit_code is what the CLI returns when it surfaces."""
    exit_code = 1


# --- Configuration errors (exit 2) ---

class ConfigError(ScribeFlowError):
    exit_code = 2


class BadHyperparameter(ConfigError):
    pass


class InvalidInventory(ConfigError):
    pass


class InvalidProfile(ConfigError):
    pass


# --- Data errors (exit 3) ---

class DataError(ScribeFlowError):
    exit_code = 3


class MalformedManifest(DataError):
    pass


class DuplicateUnit(DataError):
    pass


class MissingFile(DataError):
    pass


class InvalidEncoding(DataError):
    pass


class EmptyDocument(DataError):
    pass


class EmptyGroup(DataError):
    pass


class EmptyLexicon(DataError):
    pass


class NonFiniteInput(DataError):
    pass


class DimensionMismatch(DataError):
    pass


# --- Analysis errors (exit 4) ---

class AnalysisError(ScribeFlowError):
    exit_code = 4


class DegenerateInput(AnalysisError):
    pass


class InsufficientScribes(AnalysisError):
    pass


class DuplicateLabel(AnalysisError):
    pass


class NotEnoughSegments(AnalysisError):
    def __init__(self, label, available, requested):
        super().__init__(f"label '{label}' has {available} segments, {requested} requested")
        self.label = label
        self.available = available
        self.requested = requested


class SingleUnit(AnalysisError):
    pass


class EmptyClass(AnalysisError):
    pass


class SingleClassInput(AnalysisError):
    pass


class EmptyTrainingSet(AnalysisError):
    pass


class EmptyQuery(AnalysisError):
    pass


class EmptyReference(AnalysisError):
    pass


class EmptyVocabulary(AnalysisError):
    pass
