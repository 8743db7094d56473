"""Exception types. Each carries the CLI exit code it maps to."""


class ECQEDError(Exception):
    exit_code = 1


class ParseError(ECQEDError):
    """A source record could not be turned into a dialog."""

    def __init__(self, dialog_id, field, message):
        self.dialog_id = dialog_id
        self.field = field
        super().__init__(f"dialog {dialog_id!r}, field {field!r}: {message}")


class InputError(ECQEDError):
    pass


class InvariantError(ECQEDError):
    pass


class DecodeError(ECQEDError):
    pass


class EncodingError(ECQEDError):
    pass


class ParameterError(ECQEDError):
    pass


class ConfigError(ECQEDError):
    exit_code = 2


class NumericError(ECQEDError):
    exit_code = 3


class ArtifactError(ECQEDError):
    exit_code = 4
