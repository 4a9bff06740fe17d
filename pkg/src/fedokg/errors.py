"""Exception taxonomy shared by the core, the service and the CLI.

The CLI maps these onto its exit codes: ConfigError -> 2,
BudgetError -> 3, StabilityError -> 4, and a failed check -> 1.
"""


class FedokgError(Exception):
    pass


class ConfigError(FedokgError):
    """Malformed or out-of-range configuration input."""


class BudgetError(FedokgError):
    """A jet was asked for more derivative orders than it can certify."""


class StabilityError(FedokgError):
    """Lattice time step violates the leapfrog stability bound."""


class DimensionMismatch(FedokgError):
    pass
