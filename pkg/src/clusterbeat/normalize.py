"""Moving-window max scaler: raw procs and interconnect traffic -> [0, 1].

memusage is already a fraction and passes through untouched. The window
holds the last n raw values including the newest; the newest value is
rescaled by the window maximum, so a constant positive stream reads as 1.0
and an all-idle stream as 0. Window updates happen once per batch.
"""

from __future__ import annotations

from collections import deque


class MovingWindow:
    """Last-n value buffer with amortized O(1) sliding max (and min).

    `max` is maintained with a monotonic deque; tests check it against a
    full-scan reference. With zoom enabled the value is rescaled from
    [window min, window max] instead of [0, window max], magnifying
    differences in an otherwise monotonous stream.
    """

    def __init__(self, capacity: int, zoom: bool = False):
        if capacity < 1:
            raise ValueError("window capacity must be >= 1")
        self.capacity = capacity
        self.zoom = zoom
        self._buf: deque[float] = deque()
        self._maxq: deque[float] = deque()  # decreasing front -> back
        self._minq: deque[float] = deque()  # increasing front -> back

    def __len__(self) -> int:
        return len(self._buf)

    @property
    def values(self) -> list[float]:
        return list(self._buf)

    @property
    def max(self) -> float:
        return self._maxq[0] if self._maxq else 0.0

    @property
    def min(self) -> float:
        return self._minq[0] if self._minq else 0.0

    def push(self, v: float) -> float:
        """Append v (evicting the oldest if full) and return it scaled to [0, 1]."""
        if v < 0:
            raise ValueError("window values must be >= 0")
        if len(self._buf) == self.capacity:
            old = self._buf.popleft()
            if self._maxq and self._maxq[0] == old:
                self._maxq.popleft()
            if self._minq and self._minq[0] == old:
                self._minq.popleft()
        self._buf.append(v)
        while self._maxq and self._maxq[-1] < v:
            self._maxq.pop()
        self._maxq.append(v)
        while self._minq and self._minq[-1] > v:
            self._minq.pop()
        self._minq.append(v)

        m = self._maxq[0]
        if self.zoom:
            lo = self._minq[0]
            if m <= lo:
                return 0.0
            return (v - lo) / (m - lo)
        if m <= 0.0:
            return 0.0
        return v / m

    def resize(self, capacity: int) -> None:
        """Change the window size, keeping the newest values."""
        if capacity < 1:
            raise ValueError("window capacity must be >= 1")
        kept = list(self._buf)[-capacity:]
        self.capacity = capacity
        self._buf.clear()
        self._maxq.clear()
        self._minq.clear()
        for v in kept:
            self._buf.append(v)
            while self._maxq and self._maxq[-1] < v:
                self._maxq.pop()
            self._maxq.append(v)
            while self._minq and self._minq[-1] > v:
                self._minq.pop()
            self._minq.append(v)


def mem_passthrough(memusage: float) -> float:
    """memusage is already in [0, 1]; identity."""
    return memusage


SCALED_METRICS = ("procs", "ibtx")


class ScalerBank:
    """One MovingWindow per (partition, scaled metric), fed by partition aggregates."""

    def __init__(self, partition_ids: list[str], window_n: dict[str, int], zoom: bool = False):
        self.partition_ids = list(partition_ids)
        self.window_n = {m: int(window_n[m]) for m in SCALED_METRICS}
        self._windows: dict[tuple[str, str], MovingWindow] = {}
        for pid in self.partition_ids:
            for metric in SCALED_METRICS:
                self._windows[(pid, metric)] = MovingWindow(self.window_n[metric], zoom=zoom)

    def window(self, partition_id: str, metric: str) -> MovingWindow:
        return self._windows[(partition_id, metric)]

    def scale(self, partition_id: str, procs_raw: float, ibtx_raw: float) -> tuple[float, float]:
        scaled_procs = self._windows[(partition_id, "procs")].push(procs_raw)
        scaled_ibtx = self._windows[(partition_id, "ibtx")].push(ibtx_raw)
        return scaled_procs, scaled_ibtx

    def set_window_n(self, metric: str, n: int) -> None:
        if metric not in SCALED_METRICS:
            raise ValueError(f"unknown metric {metric!r}")
        if n < 1:
            raise ValueError("window size must be >= 1")
        self.window_n[metric] = n
        for pid in self.partition_ids:
            self._windows[(pid, metric)].resize(n)
