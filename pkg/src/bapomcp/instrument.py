"""Copy-cost instrumentation.

A process-wide meter counting how many count-table entries get copied.
Copying one entry moves one float64 (8 bytes), so ``copy_meter.total * 8``
is the number of bytes copied. The meter exists to make copy-elision
claims measurable: root sampling should keep per-simulation copy cost
independent of the table size, and linking-state copies should cost
``O(|delta|)`` instead of ``O(|table|)``.

The meter is not synchronised; parallel experiment runs use separate
processes, and measurement code is expected to run single-threaded.
"""

from __future__ import annotations


class CopyMeter:
    __slots__ = ("total",)

    def __init__(self) -> None:
        self.total = 0

    def add(self, elements: int) -> None:
        self.total += elements

    def reset(self) -> None:
        self.total = 0


copy_meter = CopyMeter()
