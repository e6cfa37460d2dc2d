class DegenerateRestriction(ValueError):
    """Restriction to an interval carrying no probability mass."""


class DensityVanishes(ValueError):
    """Virtual value requested where the density is zero."""


class ThresholdInversionError(ValueError):
    """No acceptance threshold maps to the requested first-round price."""


class CorruptBeliefState(ValueError):
    """Belief state that no sequence of play can produce."""


class InvalidPrice(ValueError):
    """A strategy posted a negative or non-finite price."""


class UnsupportedDiscount(ValueError):
    """Discount parameter outside the range where an equilibrium is defined."""
