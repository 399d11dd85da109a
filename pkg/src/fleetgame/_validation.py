"""Small input-validation helpers in the spirit of ``sklearn.utils.validation``."""
from __future__ import annotations

import math
from collections.abc import Iterable

import numpy as np

from .errors import DomainError

N_STRATEGIES = 10
FULL_MASK = (1 << N_STRATEGIES) - 1


def check_strategy_index(index) -> int:
    if isinstance(index, bool) or not isinstance(index, (int, np.integer)):
        raise DomainError(f"strategy index must be an integer, got {index!r}")
    if not 1 <= index <= N_STRATEGIES:
        raise DomainError(f"strategy index must lie in 1..{N_STRATEGIES}, got {index}")
    return int(index)


def check_nonnegative(value, name: str = "value") -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise DomainError(f"{name} must be finite and >= 0, got {value!r}")
    return value


def check_mask(mask, name: str = "mask", allow_empty: bool = False) -> int:
    """Accept an int bitmask (bit 0 = strategy 1), a 0/1 string or a bool vector."""
    if isinstance(mask, str):
        mask = mask_from_string(mask)
    elif not isinstance(mask, (int, np.integer)):
        arr = np.asarray(mask, dtype=bool).ravel()
        if arr.shape != (N_STRATEGIES,):
            raise DomainError(f"{name} must have {N_STRATEGIES} entries")
        mask = int(sum(1 << i for i in np.flatnonzero(arr)))
    mask = int(mask)
    if mask < 0 or mask > FULL_MASK:
        raise DomainError(f"{name} out of range: {mask}")
    if not allow_empty and mask == 0:
        raise DomainError(f"{name} has no available strategy")
    return mask


def mask_from_indices(indices: Iterable[int]) -> int:
    mask = 0
    for i in indices:
        mask |= 1 << (check_strategy_index(i) - 1)
    return mask


def mask_to_indices(mask: int) -> list[int]:
    return [i + 1 for i in range(N_STRATEGIES) if mask >> i & 1]


def mask_to_bool(mask: int) -> np.ndarray:
    return np.array([bool(mask >> i & 1) for i in range(N_STRATEGIES)])


def mask_to_string(mask: int) -> str:
    """Strategy 1 is the leftmost character."""
    return "".join("1" if mask >> i & 1 else "0" for i in range(N_STRATEGIES))


def mask_from_string(text: str) -> int:
    if len(text) != N_STRATEGIES or set(text) - {"0", "1"}:
        raise DomainError(f"mask string must be {N_STRATEGIES} characters of 0/1, got {text!r}")
    return sum(1 << i for i, ch in enumerate(text) if ch == "1")


def check_square_payoffs(A, name: str = "A") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise DomainError(f"{name} must be a 2-d array")
    if not np.all(np.isfinite(A)):
        raise DomainError(f"{name} contains non-finite entries")
    return A
