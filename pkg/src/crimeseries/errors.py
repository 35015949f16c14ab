"""Exception types shared across the pipeline."""


class CrimeSeriesError(Exception):
    pass


class ParseError(CrimeSeriesError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateIdError(CrimeSeriesError, ValueError):
    def __init__(self, record_id):
        self.record_id = record_id
        super().__init__(f"duplicate record id {record_id!r}")


class EmptyVocabularyError(CrimeSeriesError, ValueError):
    pass


class FormatError(CrimeSeriesError, ValueError):
    """File exists but does not have the expected layout (bad magic, truncation, corruption)."""


class VersionMismatchError(FormatError):
    pass


class DimensionMismatchError(CrimeSeriesError, ValueError):
    pass


class InvalidConfigError(CrimeSeriesError, ValueError):
    pass


class TrainingDivergedError(CrimeSeriesError, ArithmeticError):
    pass


class MissingArtifactError(CrimeSeriesError, FileNotFoundError):
    pass
