"""Shared numerical tolerances.

TIGHT  -- exact algebraic identities
EIG    -- anything that goes through an eigendecomposition
LOOSE  -- iterated products
"""
import os

TIGHT = 1e-12
EIG = 1e-10
LOOSE = 1e-8

# inequality checks of analytic bounds
SLACK = -1e-15

DEFAULT_DMAX = 4097


def default_dmax():
    """Block dimension cap, overridable through ``FLUCTLIM_DMAX``."""
    value = os.environ.get("FLUCTLIM_DMAX")
    if value is None or value.strip() == "":
        return DEFAULT_DMAX
    dmax = int(value)
    if dmax < 1:
        raise ValueError(f"FLUCTLIM_DMAX must be positive, got {value!r}")
    return dmax
