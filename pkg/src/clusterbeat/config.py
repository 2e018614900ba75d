"""Engine configuration: built-in defaults, JSON config files, validation.

Every tunable named elsewhere in the package (tempo, window sizes, basic
patterns, ports, ...) lives here so that a config file plus a seed fully
determines a run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

# Default partition layout of the monitored cluster: (partition, nodes, layer).
DEFAULT_PARTITIONS = [
    ("cpu_largemem", 8, "bass"),
    ("cpu_sky", 48, "female_voice"),
    ("cpu_zen3", 1, "male_voice"),
    ("cpu_zen4", 8, "chords"),
    ("gpu+cpu_sky", 10, "kick"),
    ("gpu+cpu_zen3", 3, "subbass"),
    ("gpu+cpu_zen4", 13, "snare"),
    ("gpu_2xh100+cpu_zen4", 1, "shaker"),
    ("gpu_6xl40s+cpu_zen4", 2, "hihats"),
    ("gpu_8xa40+cpu_zen4", 1, "clap"),
]

# Foreground rotation order for the round-robin presentation.
LAYER_ORDER = (
    "kick",
    "snare",
    "hihats",
    "clap",
    "shaker",
    "subbass",
    "female_voice",
    "bass",
    "chords",
    "male_voice",
)

# Minimal onset set each layer plays at the lowest non-idle activity.
DEFAULT_BASIC_PATTERNS = {
    "kick": [0, 8, 16, 24],
    "snare": [4, 12, 20, 28],
    "hihats": [2, 6, 10, 14, 18, 22, 26, 30],
    "clap": [12, 28],
    "shaker": [0, 4, 8, 12, 16, 20, 24, 28],
    "subbass": [0, 16],
    "bass": [0, 8, 16, 24],
    "chords": [0, 16],
    "female_voice": [0],
    "male_voice": [0],
}

PATTERN_STEPS = 32  # two 4/4 bars at 16th-note resolution


class ConfigError(ValueError):
    """Raised when a config file fails validation; message names the key."""


@dataclass
class Config:
    # cluster layout
    partitions: list = field(default_factory=lambda: [list(p) for p in DEFAULT_PARTITIONS])
    # musical clock
    bpm: float = 128.0
    batch_interval: float = 15.0
    # moving-window scaler (sizes are in batches; 4 batches per minute)
    window_n: dict = field(default_factory=lambda: {"procs": 8, "ibtx": 8})
    window_zoom: bool = False  # rescale from the window minimum instead of 0
    idle_threshold: float = 0.1
    # onset patterns
    basic_patterns: dict = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_BASIC_PATTERNS.items()})
    # playback-rate ramp ceiling: 1.0 means the last hit is at most one octave up
    rate_ramp_max: float = 1.0
    # presentation
    background_gain: float = 0.25
    background_prob: float = 0.5
    # rng
    seed: int = 0
    # network
    listen_addr: str = "127.0.0.1"
    listen_port: int = 48820
    control_addr: str = "127.0.0.1"
    control_port: int = 48821
    # audio
    sample_rate: int = 48000
    block_size: int = 256
    bit_depth: int = 16
    delay_steps: float = 3.0  # echo/delay bus time, in 16th steps
    delay_feedback: float = 0.6
    reverb_decay: float = 2.0  # T60 seconds
    sample_dir: str | None = None  # optional directory of per-layer WAV files
    # stale telemetry: a node missing for more than this many batches reads as zeros
    missing_zero_after: int = 4
    # default output paths (CLI flags override)
    out_audio: str | None = None
    out_events: str | None = None

    def layer_ids(self) -> list[str]:
        return [layer for _, _, layer in self.partitions]

    def basic_mask(self, layer_id: str) -> frozenset[int]:
        return frozenset(self.basic_patterns[layer_id])

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def validate(self) -> None:
        if self.bpm <= 0:
            raise ConfigError("bpm: must be positive")
        if self.batch_interval <= 0:
            raise ConfigError("batch_interval: must be positive")
        for metric, n in self.window_n.items():
            if metric not in ("procs", "ibtx"):
                raise ConfigError(f"window_n.{metric}: unknown metric")
            if not isinstance(n, int) or n < 1:
                raise ConfigError(f"window_n.{metric}: must be an integer >= 1")
        if not 0.0 <= self.idle_threshold < 1.0:
            raise ConfigError("idle_threshold: must be in [0, 1)")
        if not 0.0 <= self.background_prob <= 1.0:
            raise ConfigError("background_prob: must be in [0, 1]")
        if not 0.0 <= self.background_gain <= 1.0:
            raise ConfigError("background_gain: must be in [0, 1]")
        if self.rate_ramp_max < 0:
            raise ConfigError("rate_ramp_max: must be >= 0")
        if not 0.0 <= self.delay_feedback < 1.0:
            raise ConfigError("delay_feedback: must be in [0, 1)")
        if self.sample_rate not in (44100, 48000, 96000):
            raise ConfigError("sample_rate: must be one of 44100, 48000, 96000")
        if self.bit_depth not in (16, 24):
            raise ConfigError("bit_depth: must be 16 or 24")
        if self.block_size < 16:
            raise ConfigError("block_size: must be >= 16")
        if self.seed < 0:
            raise ConfigError("seed: must be >= 0")
        if self.missing_zero_after < 0:
            raise ConfigError("missing_zero_after: must be >= 0")

        if not self.partitions:
            raise ConfigError("partitions: must not be empty")
        seen_parts, seen_layers = set(), set()
        for entry in self.partitions:
            if len(entry) != 3:
                raise ConfigError(f"partitions: entry {entry!r} is not (id, nodes, layer)")
            pid, nodes, layer = entry
            if not isinstance(pid, str) or not pid:
                raise ConfigError(f"partitions: bad partition id {pid!r}")
            if not isinstance(nodes, int) or nodes < 0:
                raise ConfigError(f"partitions.{pid}: node count must be an integer >= 0")
            if pid in seen_parts:
                raise ConfigError(f"partitions.{pid}: duplicate partition id")
            if layer in seen_layers:
                raise ConfigError(f"partitions.{pid}: layer {layer!r} already assigned")
            seen_parts.add(pid)
            seen_layers.add(layer)

        for layer in self.layer_ids():
            if layer not in self.basic_patterns:
                raise ConfigError(f"basic_patterns.{layer}: missing")
        for layer, steps in self.basic_patterns.items():
            for s in steps:
                if not isinstance(s, int) or not 0 <= s < PATTERN_STEPS:
                    raise ConfigError(f"basic_patterns.{layer}: step {s!r} out of range 0..{PATTERN_STEPS - 1}")
            if len(set(steps)) != len(steps):
                raise ConfigError(f"basic_patterns.{layer}: duplicate steps")


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> Config:
    """Load a JSON config file merged over built-in defaults.

    Unknown keys and invariant violations raise ConfigError naming the key.
    """
    cfg = Config()
    merged: dict = {}
    if path is not None:
        text = Path(path).read_text()
        if text.strip():
            try:
                merged = json.loads(text)
            except json.JSONDecodeError as e:
                raise ConfigError(f"config file {path}: {e}") from e
            if not isinstance(merged, dict):
                raise ConfigError(f"config file {path}: top level must be an object")
    if overrides:
        merged.update(overrides)

    known = {f.name for f in fields(Config)}
    for key, value in merged.items():
        if key not in known:
            raise ConfigError(f"{key}: unknown config key")
        if key == "window_n":
            if not isinstance(value, dict):
                raise ConfigError("window_n: must be an object")
            base = dict(cfg.window_n)
            base.update(value)
            value = base
        if key == "partitions":
            if not isinstance(value, list):
                raise ConfigError("partitions: must be a list")
            value = [list(entry) for entry in value]
        setattr(cfg, key, value)

    cfg.validate()
    return cfg


def save_config(cfg: Config, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
