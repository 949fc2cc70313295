"""Runtime limits shared across modules."""

import os

DEFAULT_DIMENSION_CAP = 32
CAP_ENV_VAR = "BROADCASTLAB_CAP"


class DimensionCapError(ValueError):
    """A requested analysis exceeds the configured dimension cap."""


def dimension_cap() -> int:
    """Dimension cap, overridable through the BROADCASTLAB_CAP env var."""
    raw = os.environ.get(CAP_ENV_VAR)
    if raw is None:
        return DEFAULT_DIMENSION_CAP
    try:
        cap = int(raw)
    except ValueError as exc:
        raise DimensionCapError(f"{CAP_ENV_VAR} must be an integer, got {raw!r}") from exc
    if cap < 1:
        raise DimensionCapError(f"{CAP_ENV_VAR} must be positive, got {cap}")
    return cap
