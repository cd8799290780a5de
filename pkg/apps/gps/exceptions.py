class GPSError(Exception):
    """Base class for every error raised by the acceptance-region library"""


class InputError(GPSError, ValueError):
    """Malformed input: dimension mismatch, empty point sets, bad weights"""


class UnsupportedOperationError(GPSError):
    pass


class DegenerateBandwidthError(GPSError):
    pass


class DomainError(GPSError, ValueError):
    pass


class ConfigurationError(GPSError):
    pass


class ModelFormatError(GPSError):
    pass


class DataParseError(GPSError):
    """Raised while reading a data file; carries the offending line number"""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)


class SolverError(GPSError):
    """A solver could not produce a usable point; the report says why"""

    def __init__(self, message, report=None):
        self.report = report
        if report is not None:
            message = f'{message} (status={report.status}, iterations={report.iterations})'
        super().__init__(message)


class TrainingError(SolverError):
    pass


class ClassTrainingError(TrainingError):
    """Aggregate of per-class training failures, keyed by class label"""

    def __init__(self, failures):
        self.failures = dict(failures)
        labels = ', '.join(str(label) for label in self.failures)
        details = '; '.join(f'{label}: {error}' for label, error in self.failures.items())
        super().__init__(f'training failed for classes [{labels}]: {details}')

    def __reduce__(self):
        return (self.__class__, (self.failures,))


class DescentViolationError(GPSError):
    """The alternating optimisation increased its objective"""

    def __init__(self, message, iterates=()):
        self.iterates = list(iterates)
        super().__init__(message)
