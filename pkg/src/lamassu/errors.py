"""Exception hierarchy shared by every layer of the package."""


class LamassuError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class InvalidArgumentError(LamassuError, ValueError):
    pass


class NotFoundError(LamassuError, KeyError):
    exit_code = 2

    def __str__(self) -> str:
        # KeyError quotes its argument; keep messages readable.
        return str(self.args[0]) if self.args else ""


class AlreadyExistsError(LamassuError):
    pass


class MetadataIntegrityError(LamassuError):
    """A metadata block failed GCM authentication (corruption or wrong outer key)."""

    exit_code = 3

    def __init__(self, message: str, segment: int | None = None):
        super().__init__(message)
        self.segment = segment


class FormatError(MetadataIntegrityError):
    """Authenticated metadata decoded to field values that violate the format."""


class DataIntegrityError(LamassuError):
    """A decrypted data block did not re-derive the key it was decrypted with."""

    exit_code = 4

    def __init__(self, message: str, logical_block: int):
        super().__init__(message)
        self.logical_block = logical_block


class CrashDetectedError(LamassuError):
    """A segment is still marked midupdate; run recovery before reading it."""

    exit_code = 5

    def __init__(self, message: str, segment: int):
        super().__init__(message)
        self.segment = segment


class SimulatedCrash(LamassuError):
    """Raised by a block store whose fault hook has fired."""

    exit_code = 5


class KeyStoreAuthError(LamassuError):
    exit_code = 3
