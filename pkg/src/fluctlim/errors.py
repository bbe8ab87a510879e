"""Exception types raised by fluctlim.

Each class carries a short machine-readable ``code`` used by the CLI
manifest.
"""


class FluctlimError(Exception):
    code = "error"


class NotHermitian(FluctlimError, ValueError):
    code = "not_hermitian"


class NotDensity(FluctlimError, ValueError):
    code = "not_density"


class ProjectionAnnihilates(FluctlimError):
    """The truncation projector removes all of the state's weight."""

    code = "projection_annihilates"


class NotPermutationInvariant(FluctlimError, ValueError):
    code = "not_permutation_invariant"


class PaddingDiverged(FluctlimError):
    code = "padding_diverged"


class TruncationDiverged(FluctlimError):
    code = "truncation_diverged"


class TimeOutOfRange(FluctlimError, ValueError):
    code = "time_out_of_range"


class LeakageError(FluctlimError):
    code = "leakage"
