from .engine import AudioEngine, RenderStats, WavWriter
from .fx import DelayLine, FdnReverb, FeedbackDelay
from .voices import Voice, default_voices, read_wav, render_synth_note, resample_linear

__all__ = [
    "AudioEngine",
    "RenderStats",
    "WavWriter",
    "DelayLine",
    "FeedbackDelay",
    "FdnReverb",
    "Voice",
    "default_voices",
    "read_wav",
    "render_synth_note",
    "resample_linear",
]
