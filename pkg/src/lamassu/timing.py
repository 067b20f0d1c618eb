"""Per-category latency accounting for the read and write paths."""

from __future__ import annotations

import time
from contextlib import contextmanager, nullcontext

CATEGORIES = ("Encrypt", "Decrypt", "GetCEKey", "IO", "Misc")


class LatencyBreakdown:
    """Accumulates wall time per category.

    ``Misc`` is whatever part of the measured total the other categories do
    not account for; call :meth:`path` around a whole operation to record it.
    """

    def __init__(self):
        self.seconds = {c: 0.0 for c in CATEGORIES}
        self.total = 0.0
        self._depth = 0

    @contextmanager
    def section(self, category: str):
        # Nested sections are attributed to the outermost one only.
        if self._depth:
            yield
            return
        self._depth += 1
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.seconds[category] += time.perf_counter() - t0
            self._depth -= 1

    @contextmanager
    def path(self):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.total += time.perf_counter() - t0
            self.seconds["Misc"] = max(0.0, self.total - sum(
                v for k, v in self.seconds.items() if k != "Misc"))

    def percentages(self) -> dict[str, float]:
        total = sum(self.seconds.values())
        return {c: (100.0 * v / total if total else 0.0) for c, v in self.seconds.items()}

    def dominant(self) -> str:
        return max(self.seconds, key=self.seconds.get)

    def merge(self, other: "LatencyBreakdown") -> None:
        for c in CATEGORIES:
            self.seconds[c] += other.seconds[c]
        self.total += other.total


_NULL = nullcontext()


def null_section(category: str):
    return _NULL
