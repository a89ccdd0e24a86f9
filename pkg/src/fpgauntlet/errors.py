"""Exception hierarchy shared by every fpgauntlet module."""

from __future__ import annotations


class FpGauntletError(Exception):
    """Base class for all laboratory errors."""


class FloatOverflowError(FpGauntletError, OverflowError):
    """A rounded result left the finite range of its format."""


class FormatMismatchError(FpGauntletError, ValueError):
    pass


class RepresentationError(FpGauntletError, ValueError):
    """A value is not exactly representable where exactness is required."""


class EmptyInputError(FpGauntletError, ValueError):
    pass


class ArityError(FpGauntletError, ValueError):
    """Tree leaf count and summand count disagree."""


class SizeLimitError(FpGauntletError, ValueError):
    """Input too large for an exhaustive method."""


class ParameterError(FpGauntletError, ValueError):
    pass


class DimensionError(FpGauntletError, ValueError):
    pass


class BoundError(FpGauntletError, ValueError):
    """A host logit reached the backdoor saturation bound."""


class ConfigError(FpGauntletError, ValueError):
    pass
