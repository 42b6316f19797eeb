"""Exception hierarchy shared by every module.

Each class carries the CLI exit code it maps to.
"""


class WiltscanError(Exception):
    exit_code = 1


class ConfigError(WiltscanError, ValueError):
    exit_code = 2


class ParseError(ConfigError):
    pass


class IOFailure(WiltscanError, OSError):
    exit_code = 3


class DataError(WiltscanError, ValueError):
    """Input data violates a documented invariant."""

    exit_code = 4


class FormatError(DataError):
    pass


class TruncationError(FormatError):
    pass


class SchemaError(DataError):
    pass


class RangeError(DataError):
    pass


class DuplicateError(DataError):
    pass


class ProfileError(DataError):
    pass


class ShapeError(DataError):
    pass


class EmptyMaskError(DataError):
    pass


class DegenerateInputError(DataError):
    pass


class UnresolvableWavelengthError(DataError):
    def __init__(self, wavelength, profile, tolerance):
        self.wavelength = wavelength
        self.profile = profile
        super().__init__(
            f"{wavelength} nm has no band within {tolerance} nm on profile {profile!r}"
        )


class NumericDomainError(DataError):
    def __init__(self, index_id, message="zero denominator"):
        self.index_id = index_id
        super().__init__(f"{index_id}: {message}")


class AggregateIndexError(DataError):
    def __init__(self, failures):
        self.failures = dict(failures)
        names = ", ".join(sorted(self.failures))
        super().__init__(f"indices could not be computed: {names}")


class MissingModalityError(DataError):
    pass


class ProvenanceError(DataError):
    pass


class DegenerateClassError(DataError):
    pass


class StratificationError(DataError):
    pass


class EmptyInputError(DataError):
    pass


class DegenerateVarianceError(DataError):
    pass


class InsufficientDataError(DataError):
    pass
