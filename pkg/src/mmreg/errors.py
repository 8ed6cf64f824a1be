"""Exception hierarchy shared by every stage."""


class RegistrationError(Exception):
    """Base class for all errors raised by mmreg."""


class DimensionMismatch(RegistrationError, ValueError):
    pass


class InvalidSigma(RegistrationError, ValueError):
    pass


class TooSmall(RegistrationError, ValueError):
    pass


class BadTargetDims(RegistrationError, ValueError):
    pass


class BadBinCount(RegistrationError, ValueError):
    pass


class TooFewSamples(RegistrationError, ValueError):
    """Too few sample pairs survived the transform (grossly divergent params)."""


class OutOfBounds(RegistrationError, ValueError):
    pass


class OutOfField(RegistrationError, ValueError):
    pass


class LengthMismatch(RegistrationError, ValueError):
    pass


class EmptySets(RegistrationError, ValueError):
    pass


class BadOptions(RegistrationError, ValueError):
    pass


class ConfigError(RegistrationError, ValueError):
    pass


class MalformedHeader(RegistrationError, ValueError):
    pass


class UnsupportedFormat(RegistrationError, ValueError):
    pass


class BadMagic(RegistrationError, ValueError):
    pass


class SizeMismatch(RegistrationError, ValueError):
    pass


class ParseError(RegistrationError, ValueError):
    def __init__(self, line, message="cannot parse landmark row"):
        self.line = line
        super().__init__(f"line {line}: {message}")


class IoFailure(RegistrationError, OSError):
    pass
