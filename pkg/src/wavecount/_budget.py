import os


def budget(default: int) -> int:
    """Enumeration budget, overridable through WAVECOUNT_BUDGET."""
    raw = os.environ.get("WAVECOUNT_BUDGET")
    if raw:
        return int(float(raw))
    return default
