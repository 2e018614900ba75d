"""Effect buses: a single-tap feedback delay (echo) and an 8-line feedback
delay network reverb. Both process one block at a time with no allocation
in the hot path; all line lengths are >= one block so block-wise feedback
is exact.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

FDN_LINES = 8
# mutually prime line lengths at 48 kHz, scaled for other rates
_FDN_DELAYS_48K = (1433, 1601, 1867, 2053, 2251, 2399, 2689, 2837)


class DelayLine:
    """Mono circular buffer with block read/write."""

    def __init__(self, capacity: int):
        self.buf = np.zeros(capacity)
        self.pos = 0  # next write index

    def read_into(self, delay: int, out: np.ndarray) -> None:
        """Copy the signal `delay` samples back into out (len(out) samples)."""
        n = len(out)
        cap = len(self.buf)
        start = (self.pos - delay) % cap
        end = start + n
        if end <= cap:
            out[:] = self.buf[start:end]
        else:
            k = cap - start
            out[:k] = self.buf[start:]
            out[k:] = self.buf[: end - cap]

    def write_block(self, x: np.ndarray) -> None:
        n = len(x)
        cap = len(self.buf)
        start = self.pos
        end = start + n
        if end <= cap:
            self.buf[start:end] = x
        else:
            k = cap - start
            self.buf[start:] = x[:k]
            self.buf[: end - cap] = x[k:]
        self.pos = end % cap

    def reset(self) -> None:
        self.buf[:] = 0.0
        self.pos = 0


class FeedbackDelay:
    """Echo bus: out = wet * delayed; line feeds back with gain < 1.

    An impulse produces echoes spaced by the delay time with amplitudes
    feedback**k — this is also what gives the idle hit its trailing echo.
    """

    def __init__(self, delay_samples: int, feedback: float, wet: float, block_size: int):
        if not 0.0 <= feedback < 1.0:
            raise ValueError("feedback must be in [0, 1) for stability")
        self.delay = max(int(delay_samples), block_size)
        self.feedback = feedback
        self.wet = wet
        self.line = DelayLine(self.delay + block_size)
        self._d = np.zeros(block_size)

    def process(self, x: np.ndarray, out: np.ndarray) -> None:
        """Add the wet signal for one block into out (accumulating); the
        final block of a render may be shorter than block_size."""
        d = self._d[: len(x)]
        self.line.read_into(self.delay, d)
        self.line.write_block(x + self.feedback * d)
        out += self.wet * d

    def reset(self) -> None:
        self.line.reset()
        self._d[:] = 0.0


class FdnReverb:
    """8-line FDN with Householder feedback, per-line one-pole damping, and
    decay gains set from a target T60. The operative "width" control is the
    wet gain."""

    def __init__(
        self,
        sample_rate: int,
        block_size: int,
        decay_t60: float = 2.0,
        damping: float = 0.35,
        wet: float = 0.5,
    ):
        scale = sample_rate / 48000.0
        self.delays = [max(int(round(d * scale)), block_size) for d in _FDN_DELAYS_48K]
        self.lines = [DelayLine(d + block_size) for d in self.delays]
        # per-line gain for ~60 dB decay over decay_t60 seconds of round trips
        self.gains = np.array([10.0 ** (-3.0 * d / (decay_t60 * sample_rate)) for d in self.delays])
        self.damping = damping
        self.wet = wet
        self._b = np.array([1.0 - damping])
        self._a = np.array([1.0, -damping])
        self._zi = np.zeros((FDN_LINES, 1))
        self._reads = np.zeros((FDN_LINES, block_size))
        self._in_gain = 1.0 / np.sqrt(FDN_LINES)
        self._out_taps = np.array([1.0 if i % 2 == 0 else -1.0 for i in range(FDN_LINES)]) / FDN_LINES

    def process(self, x: np.ndarray, out: np.ndarray) -> None:
        """Add the wet reverb for one block into out (accumulating)."""
        n = len(x)
        reads = self._reads[:, :n]
        for i, line in enumerate(self.lines):
            line.read_into(self.delays[i], reads[i])
        out += self.wet * (self._out_taps @ reads)
        damped, self._zi = lfilter(self._b, self._a, reads, axis=1, zi=self._zi)
        # Householder: H v = v - (2/N) * sum(v)
        mixed = damped - (2.0 / FDN_LINES) * damped.sum(axis=0)
        mixed *= self.gains[:, None]
        feed = self._in_gain * x
        for i, line in enumerate(self.lines):
            line.write_block(mixed[i] + feed)

    def reset(self) -> None:
        for line in self.lines:
            line.reset()
        self._zi[:] = 0.0
