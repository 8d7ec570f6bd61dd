"""Neumaier-compensated running sums."""

from __future__ import annotations


def two_sum(s: float, c: float, x: float) -> tuple[float, float]:
    """Add ``x`` to the compensated pair ``(s, c)`` and return the new pair."""
    u = s + x
    if abs(s) >= abs(x):
        c += (s - u) + x
    else:
        c += (x - u) + s
    return u, c


class CompensatedSum:
    """Running sum whose rounding error is carried in a separate term.

    >>> acc = CompensatedSum()
    >>> for v in (1e16, 1.0, -1e16):
    ...     acc.add(v)
    >>> acc.value
    1.0
    """

    __slots__ = ("s", "c")

    def __init__(self, value: float = 0.0):
        self.s = float(value)
        self.c = 0.0

    def add(self, x: float) -> None:
        self.s, self.c = two_sum(self.s, self.c, x)

    @property
    def value(self) -> float:
        return self.s + self.c
