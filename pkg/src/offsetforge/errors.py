"""Exception hierarchy shared by every offsetforge module."""


class OffsetForgeError(Exception):
    """Base class for operational errors (mapped to exit code 1 by the CLI)."""


class MalformedRecord(OffsetForgeError):
    def __init__(self, message, offset=None, source=None):
        super().__init__(message)
        self.offset = offset
        self.source = source


class SeekOutOfRange(OffsetForgeError):
    def __init__(self, offset, size, source=None):
        super().__init__(f"offset {offset} is outside file {source or '<stream>'} of size {size}")
        self.offset = offset
        self.size = size
        self.source = source


class UnreadableFile(OffsetForgeError):
    def __init__(self, path, reason=""):
        super().__init__(f"cannot read {path}: {reason}" if reason else f"cannot read {path}")
        self.path = path


class InvalidFilename(OffsetForgeError):
    pass


class FormatError(OffsetForgeError):
    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class WriteFailure(OffsetForgeError):
    pass


class FingerprintMismatch(OffsetForgeError):
    def __init__(self, drifted):
        names = ", ".join(d.source_file for d in drifted)
        super().__init__(f"corpus changed since indexing: {names}")
        self.drifted = drifted


class DomainError(OffsetForgeError, ValueError):
    pass


class NoCrossover(OffsetForgeError):
    pass


class OutputDirNotEmpty(OffsetForgeError):
    pass


class CorpusMissing(OffsetForgeError):
    pass


class IndexMissing(OffsetForgeError):
    pass
