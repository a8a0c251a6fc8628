"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end:
2 for usage or configuration problems, 1 for runs that completed but could
not certify what was asked, 3 for internal invariant breaches (bugs).
"""


class CantorWinError(Exception):
    exit_code = 3


class ConfigError(CantorWinError):
    exit_code = 2


class UnsupportedScale(ConfigError):
    pass


class TrivialStructure(ConfigError):
    pass


class MultiplicativeDependence(ConfigError):
    pass


class NotCertified(CantorWinError):
    """Base for outcomes that mean "ran, but the claim does not hold"."""
    exit_code = 1


class BudgetExceeded(NotCertified):
    pass


class EmptyLevel(NotCertified):
    pass


class DivisionByZeroT(NotCertified):
    pass


class TrimCollapse(NotCertified):
    pass


class DivergentCell(NotCertified):
    pass


class PreconditionREps(NotCertified):
    pass


class NoValidC(NotCertified):
    pass


class WindowOverflow(NotCertified):
    pass


class LegalityBreach(NotCertified):
    pass


class Stuck(NotCertified):
    pass


class IllegalMove(NotCertified):
    rule = "legality"


class IllegalRadius(IllegalMove):
    rule = "radius"


class NotContained(IllegalMove):
    rule = "containment"


class IntersectsRemoved(IllegalMove):
    rule = "avoidance"


class IndeterminateComparison(CantorWinError):
    pass


class InvariantBreach(CantorWinError):
    exit_code = 3
