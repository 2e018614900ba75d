"""Placeholder voices: synthesized drum/percussion/vocal-ish samples plus the
two synthetic layers (bass, chords) rendered per note.

The sample set bundled here is generated deterministically at startup, so
renders are reproducible without shipping binary assets. Drop replacement
WAV files named <layer>.wav into a sample directory to use real sounds.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.signal import butter, lfilter

SAMPLE_LAYERS = ("kick", "snare", "hihats", "clap", "shaker", "subbass", "female_voice", "male_voice")
SYNTH_LAYERS = ("bass", "chords")

DEFAULT_GAINS = {
    "kick": 0.95,
    "snare": 0.80,
    "hihats": 0.40,
    "clap": 0.60,
    "shaker": 0.35,
    "subbass": 0.90,
    "female_voice": 0.65,
    "male_voice": 0.65,
    "bass": 0.75,
    "chords": 0.55,
}

DEFAULT_POLYPHONY = 8


@dataclass
class Voice:
    layer_id: str
    kind: str  # "sample" | "synth"
    buffer: np.ndarray | None  # mono float64 at the engine rate; rate 1.0 = original pitch
    base_gain: float
    polyphony: int = DEFAULT_POLYPHONY


def _t(n: int, sr: int) -> np.ndarray:
    return np.arange(n) / sr


def _decay(n: int, sr: int, t60: float) -> np.ndarray:
    return np.exp(-6.9078 * _t(n, sr) / t60)  # -60 dB at t60


def _attack(x: np.ndarray, sr: int, seconds: float) -> np.ndarray:
    n = max(int(sr * seconds), 1)
    if n < len(x):
        x[:n] *= np.linspace(0.0, 1.0, n)
    return x


def _normalize(x: np.ndarray, peak: float = 0.9) -> np.ndarray:
    m = np.max(np.abs(x))
    return x * (peak / m) if m > 0 else x


def _bandpass(x: np.ndarray, sr: int, lo: float, hi: float, order: int = 2) -> np.ndarray:
    b, a = butter(order, [lo / (sr / 2), hi / (sr / 2)], btype="band")
    return lfilter(b, a, x)


def _highpass(x: np.ndarray, sr: int, cutoff: float, order: int = 2) -> np.ndarray:
    b, a = butter(order, cutoff / (sr / 2), btype="high")
    return lfilter(b, a, x)


def _noise(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng([7741, seed]).uniform(-1.0, 1.0, n)


def make_kick(sr: int) -> np.ndarray:
    n = int(0.28 * sr)
    freq = 48.0 + 110.0 * np.exp(-_t(n, sr) / 0.035)  # fast downward sweep
    phase = 2 * np.pi * np.cumsum(freq) / sr
    body = np.sin(phase) * _decay(n, sr, 0.22)
    click = _noise(int(0.004 * sr), 1) * 0.4
    body[: len(click)] += click * _decay(len(click), sr, 0.004)
    return _normalize(_attack(body, sr, 0.0005))


def make_snare(sr: int) -> np.ndarray:
    n = int(0.22 * sr)
    tone = np.sin(2 * np.pi * 190.0 * _t(n, sr)) * _decay(n, sr, 0.08) * 0.6
    rattle = _bandpass(_noise(n, 2), sr, 1200, 7500) * _decay(n, sr, 0.13)
    return _normalize(_attack(tone + rattle, sr, 0.0005))


def make_hihats(sr: int) -> np.ndarray:
    n = int(0.09 * sr)
    x = _highpass(_noise(n, 3), sr, 6500, order=4) * _decay(n, sr, 0.05)
    return _normalize(_attack(x, sr, 0.0005))


def make_clap(sr: int) -> np.ndarray:
    n = int(0.26 * sr)
    noise = _bandpass(_noise(n, 4), sr, 900, 2600)
    out = np.zeros(n)
    for i, burst_ms in enumerate((0.0, 0.011, 0.022)):
        start = int(burst_ms * sr)
        seg = n - start
        out[start:] += noise[:seg] * _decay(seg, sr, 0.02) * (0.8 + 0.1 * i)
    out += noise * _decay(n, sr, 0.15) * 0.5  # tail
    return _normalize(_attack(out, sr, 0.001))


def make_shaker(sr: int) -> np.ndarray:
    n = int(0.12 * sr)
    x = _bandpass(_noise(n, 5), sr, 3200, 9000) * _decay(n, sr, 0.07)
    return _normalize(_attack(x, sr, 0.012))


def make_subbass(sr: int) -> np.ndarray:
    n = int(0.45 * sr)
    t = _t(n, sr)
    x = np.sin(2 * np.pi * 45.0 * t) + 0.18 * np.sin(2 * np.pi * 90.0 * t)
    x *= _decay(n, sr, 0.42)
    return _normalize(_attack(x, sr, 0.006))


def _vowel(sr: int, f0: float, formants: tuple, dur: float, seed: int) -> np.ndarray:
    n = int(dur * sr)
    t = _t(n, sr)
    vibrato = 1.0 + 0.025 * np.sin(2 * np.pi * 5.2 * t)
    phase = 2 * np.pi * np.cumsum(f0 * vibrato) / sr
    # pulse-ish source: summed harmonics with 1/k rolloff
    source = sum(np.sin(k * phase) / k for k in range(1, 13))
    source += 0.02 * _noise(n, seed)  # breath
    out = np.zeros(n)
    for fc, gain in zip(formants, (1.0, 0.63, 0.32)):
        out += gain * _bandpass(source, sr, fc * 0.82, fc * 1.22)
    env = _decay(n, sr, dur * 1.4)
    return _normalize(_attack(out * env, sr, 0.03))


def make_female_voice(sr: int) -> np.ndarray:
    return _vowel(sr, f0=220.0, formants=(820, 1180, 2900), dur=0.9, seed=6)


def make_male_voice(sr: int) -> np.ndarray:
    return _vowel(sr, f0=112.0, formants=(460, 980, 2600), dur=1.0, seed=7)


_SAMPLE_MAKERS = {
    "kick": make_kick,
    "snare": make_snare,
    "hihats": make_hihats,
    "clap": make_clap,
    "shaker": make_shaker,
    "subbass": make_subbass,
    "female_voice": make_female_voice,
    "male_voice": make_male_voice,
}

# synth note definitions: (base frequency, chord intervals in semitones, duration, decay)
_SYNTH_NOTES = {
    "bass": (55.0, (0,), 0.50, 0.45),
    "chords": (220.0, (0, 3, 7, 10), 1.00, 0.90),
}


@lru_cache(maxsize=256)
def render_synth_note(layer_id: str, rate: float, sr: int) -> np.ndarray:
    """Oscillator-bank note; the playback rate transposes the pitch by
    12*log2(rate) semitones (frequency scaled by rate) with the envelope
    duration unchanged. Cached per (layer, rate): a pattern repeats its rate
    curve on every cycle, so hits mostly come from here."""
    f_base, intervals, dur, t60 = _SYNTH_NOTES[layer_id]
    n = int(dur * sr)
    t = _t(n, sr)
    freqs, amps, phases = [], [], []
    for semis in intervals:
        f = f_base * rate * 2.0 ** (semis / 12.0)
        for k, amp in ((1, 1.0), (2, 0.4)):
            freqs.append(f * k)
            amps.append(amp)
            phases.append(0.1 * semis)
    bank = np.sin(2 * np.pi * np.outer(freqs, t) + np.array(phases)[:, None])
    out = np.asarray(amps) @ bank
    out *= _decay(n, sr, t60)
    out = _normalize(_attack(out, sr, 0.008), peak=0.8 / max(len(intervals), 1))
    out.setflags(write=False)  # shared across notes
    return out


def resample_linear(buf: np.ndarray, rate: float) -> np.ndarray:
    """Variable-rate playback by linear interpolation: rate 2.0 halves the
    duration and shifts pitch one octave up."""
    if rate == 1.0:
        return buf
    if rate <= 0:
        raise ValueError("rate must be positive")
    out_len = max(int(np.floor((len(buf) - 1) / rate)) + 1, 1)
    idx = np.arange(out_len) * rate
    return np.interp(idx, np.arange(len(buf)), buf)


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Mono float64 in [-1, 1] plus the file's sample rate (16/24/32-bit PCM)."""
    with wave.open(str(path), "rb") as w:
        sr = w.getframerate()
        width = w.getsampwidth()
        channels = w.getnchannels()
        raw = w.readframes(w.getnframes())
    if width == 2:
        data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32767.0
    elif width == 3:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3)
        ints = (b[:, 0].astype(np.int32) | (b[:, 1].astype(np.int32) << 8) | (b[:, 2].astype(np.int32) << 16))
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        data = ints.astype(np.float64) / float((1 << 23) - 1)
    elif width == 4:
        data = np.frombuffer(raw, dtype="<i4").astype(np.float64) / float((1 << 31) - 1)
    else:
        raise ValueError(f"unsupported sample width {width}")
    if channels > 1:
        data = data.reshape(-1, channels).mean(axis=1)
    return data, sr


def default_voices(sample_rate: int, sample_dir: str | None = None, layer_ids=None) -> dict[str, Voice]:
    """Build the voice bank: user WAVs from sample_dir when present, else the
    synthesized placeholders; bass and chords are always synthetic."""
    layer_ids = list(layer_ids) if layer_ids is not None else list(SAMPLE_LAYERS) + list(SYNTH_LAYERS)
    voices: dict[str, Voice] = {}
    for layer in layer_ids:
        gain = DEFAULT_GAINS.get(layer, 0.6)
        if layer in _SYNTH_NOTES:
            voices[layer] = Voice(layer_id=layer, kind="synth", buffer=None, base_gain=gain)
            continue
        buf = None
        if sample_dir is not None:
            candidate = Path(sample_dir) / f"{layer}.wav"
            if candidate.exists():
                data, sr = read_wav(candidate)
                buf = resample_linear(data, sr / sample_rate) if sr != sample_rate else data
        if buf is None:
            maker = _SAMPLE_MAKERS.get(layer)
            if maker is None:
                raise ValueError(f"no builtin sample for layer {layer!r}; provide {layer}.wav in sample_dir")
            buf = maker(sample_rate)
        voices[layer] = Voice(layer_id=layer, kind="sample", buffer=buf, base_gain=gain)
    return voices
