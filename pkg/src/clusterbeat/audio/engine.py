"""Block renderer: sample playback with variable rate, synth notes, the two
fx buses, mixing, and a hard limiter.

The render path works on preallocated block buffers and pulls due events
from an ordered queue; notes are fully resampled once at trigger time so
per-block work is slice arithmetic only. Offline rendering and the live
sink share this engine, so both paths emit identical event streams.
"""

from __future__ import annotations

import wave
from collections import OrderedDict, deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..sequencer import LayerEvent
from .fx import FdnReverb, FeedbackDelay
from .voices import Voice, default_voices, render_synth_note, resample_linear


@dataclass
class RenderStats:
    blocks: int = 0
    events: int = 0
    notes_stolen: int = 0
    limited_samples: int = 0
    peak: float = 0.0
    underruns: int = 0


class ActiveNote:
    __slots__ = ("layer_id", "start", "end", "buf", "gain", "rev", "dly")

    def __init__(self, layer_id: str, start: int, buf: np.ndarray, gain: float, rev: float, dly: float):
        self.layer_id = layer_id
        self.start = start
        self.end = start + len(buf)
        self.buf = buf
        self.gain = gain
        self.rev = rev
        self.dly = dly


class AudioEngine:
    """Renders LayerEvents to mono audio blocks.

    Events are queued with absolute sample positions (non-decreasing); each
    render_block() call triggers the events that fall inside the block and
    mixes all active notes plus the delay and reverb buses, hard-limited to
    [-1, 1].
    """

    def __init__(
        self,
        sample_rate: int = 48000,
        block_size: int = 256,
        step_duration: float = 0.1171875,
        delay_steps: float = 3.0,
        delay_feedback: float = 0.6,
        reverb_decay: float = 2.0,
        voices: dict[str, Voice] | None = None,
        sample_dir: str | None = None,
        layer_ids=None,
    ):
        self.sample_rate = sample_rate
        self.block_size = block_size
        self.voices = voices if voices is not None else default_voices(sample_rate, sample_dir, layer_ids)
        delay_samples = int(round(delay_steps * step_duration * sample_rate))
        self.delay_bus = FeedbackDelay(delay_samples, delay_feedback, wet=0.9, block_size=block_size)
        self.reverb_bus = FdnReverb(sample_rate, block_size, decay_t60=reverb_decay, wet=0.5)
        self.stats = RenderStats()
        self._pending: deque[tuple[int, LayerEvent]] = deque()
        self._active: list[ActiveNote] = []
        self._per_layer: dict[str, int] = {}
        # resampled-note LRU: rate curves repeat every cycle, so most
        # triggers reuse a buffer instead of re-interpolating
        self._note_cache: OrderedDict[tuple[str, float], np.ndarray] = OrderedDict()
        self._note_cache_max = 256
        # preallocated block scratch
        self._rev_in = np.zeros(block_size)
        self._dly_in = np.zeros(block_size)

    # ---- event intake -------------------------------------------------

    def add_event(self, time_s: float, event: LayerEvent) -> None:
        """Queue one event at an absolute time; onsets quantize to the
        nearest output sample. Events must arrive in non-decreasing order."""
        sample = int(round(time_s * self.sample_rate))
        if self._pending and sample < self._pending[-1][0]:
            raise ValueError("events must be queued in non-decreasing time order")
        self._pending.append((sample, event))

    def add_batch_events(self, batch_start_s: float, events: list[LayerEvent]) -> None:
        for ev in events:
            self.add_event(batch_start_s + ev.onset, ev)

    # ---- rendering ----------------------------------------------------

    def trigger(self, event: LayerEvent, start_sample: int) -> None:
        """Start a note for an event. Gain 0 starts nothing; a full layer
        steals its oldest note."""
        if event.gain <= 0.0:
            return
        voice = self.voices[event.layer_id]
        key = (event.layer_id, event.rate)
        buf = self._note_cache.get(key)
        if buf is None:
            if voice.kind == "synth":
                buf = render_synth_note(event.layer_id, event.rate, self.sample_rate)
            else:
                buf = resample_linear(voice.buffer, event.rate)
            self._note_cache[key] = buf
            if len(self._note_cache) > self._note_cache_max:
                self._note_cache.popitem(last=False)
        else:
            self._note_cache.move_to_end(key)
        count = self._per_layer.get(event.layer_id, 0)
        if count >= voice.polyphony:
            for i, note in enumerate(self._active):
                if note.layer_id == event.layer_id:
                    del self._active[i]
                    count -= 1
                    self.stats.notes_stolen += 1
                    break
        self._per_layer[event.layer_id] = count + 1
        self._active.append(
            ActiveNote(
                layer_id=event.layer_id,
                start=start_sample,
                buf=buf,
                gain=event.gain * voice.base_gain,
                rev=event.reverb_mix,
                dly=event.delay_amp,
            )
        )
        self.stats.events += 1

    def render_block(self, out: np.ndarray, block_start: int) -> None:
        """Fill one block starting at the given absolute sample position."""
        n = len(out)
        block_end = block_start + n
        out[:] = 0.0
        rev_in = self._rev_in[:n]
        dly_in = self._dly_in[:n]
        rev_in[:] = 0.0
        dly_in[:] = 0.0

        while self._pending and self._pending[0][0] < block_end:
            sample, event = self._pending.popleft()
            self.trigger(event, max(sample, block_start))

        finished = None
        for note in self._active:
            a = max(note.start, block_start)
            b = min(note.end, block_end)
            if a >= b:
                continue
            seg = note.buf[a - note.start : b - note.start] * note.gain
            sl = slice(a - block_start, b - block_start)
            out[sl] += seg
            if note.rev > 0.0:
                rev_in[sl] += seg * note.rev
            if note.dly > 0.0:
                dly_in[sl] += seg * note.dly
            if note.end <= block_end:
                if finished is None:
                    finished = []
                finished.append(note)
        if finished:
            for note in finished:
                self._active.remove(note)
                self._per_layer[note.layer_id] -= 1

        self.delay_bus.process(dly_in, out)
        self.reverb_bus.process(rev_in, out)

        peak = float(np.max(np.abs(out))) if n else 0.0
        if peak > self.stats.peak:
            self.stats.peak = peak
        if peak > 1.0:
            self.stats.limited_samples += int(np.count_nonzero(np.abs(out) > 1.0))
            np.clip(out, -1.0, 1.0, out=out)
        self.stats.blocks += 1

    def render_range(self, start_sample: int, end_sample: int):
        """Yield (block_start, block) covering [start, end); the final block
        may be short."""
        block = np.zeros(self.block_size)
        pos = start_sample
        while pos < end_sample:
            n = min(self.block_size, end_sample - pos)
            view = block[:n]
            self.render_block(view, pos)
            yield pos, view
            pos += n

    def active_note_count(self) -> int:
        return len(self._active)

    def pending_count(self) -> int:
        return len(self._pending)


# ---- WAV I/O -----------------------------------------------------------


def _encode_pcm(x: np.ndarray, bit_depth: int) -> bytes:
    clipped = np.clip(x, -1.0, 1.0)
    if bit_depth == 16:
        return (np.rint(clipped * 32767.0).astype("<i2")).tobytes()
    if bit_depth == 24:
        ints = np.rint(clipped * float((1 << 23) - 1)).astype(np.int32)
        b = np.empty((len(ints), 3), dtype=np.uint8)
        b[:, 0] = ints & 0xFF
        b[:, 1] = (ints >> 8) & 0xFF
        b[:, 2] = (ints >> 16) & 0xFF
        return b.tobytes()
    raise ValueError(f"unsupported bit depth {bit_depth}")


class WavWriter:
    """Streaming mono linear-PCM RIFF writer."""

    def __init__(self, path: str | Path, sample_rate: int, bit_depth: int = 16):
        self.bit_depth = bit_depth
        self._w = wave.open(str(path), "wb")
        self._w.setnchannels(1)
        self._w.setsampwidth(bit_depth // 8)
        self._w.setframerate(sample_rate)

    def write(self, block: np.ndarray) -> None:
        # raw variant skips the per-call header patch; close() fixes it up
        self._w.writeframesraw(_encode_pcm(block, self.bit_depth))

    def close(self) -> None:
        self._w.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
