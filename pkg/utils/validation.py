# qcloud-lab/utils/validation.py - Field Validators

import math
import re
from typing import Optional, Tuple

EDGE_KEY_PATTERN = re.compile(r'^(\d+)-(\d+)$')


def is_probability(value) -> bool:
    """Return True for a finite real number in [0, 1)."""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return False
    if not math.isfinite(value):
        return False
    return 0.0 <= value < 1.0


def parse_edge_key(key: str) -> Optional[Tuple[int, int]]:
    """Parse a fleet-file edge key such as ``"3-7"``.

    Args:
        key: Edge key in "min-max" qubit order

    Returns:
        The (min, max) qubit pair, or None if the key is malformed or
        not in ascending order
    """
    if not key or not isinstance(key, str):
        return None

    match = EDGE_KEY_PATTERN.match(key.strip())
    if not match:
        return None

    low, high = int(match.group(1)), int(match.group(2))
    if low >= high:
        return None
    return low, high


def edge_key(edge: Tuple[int, int]) -> str:
    """Format an edge as its canonical "min-max" key."""
    a, b = edge
    return f"{min(a, b)}-{max(a, b)}"


def normalize_edge(a: int, b: int) -> Tuple[int, int]:
    return (a, b) if a < b else (b, a)


def is_non_negative_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and value >= 0


def is_positive_int(value) -> bool:
    return is_non_negative_int(value) and value > 0


def is_seed(value) -> bool:
    """Seeds are explicit 64-bit non-negative integers."""
    return is_non_negative_int(value) and value < 2 ** 64

