"""Per-layer musical parameter mapping.

Scaled partition activity drives three independent controls:

  * scaled procs  -> onset density on the 32-step grid (below the idle
    threshold: a single hit through an echo, then silence for the batch)
  * memusage      -> playback-rate ramp across the pattern's hits
  * scaled ibtx   -> reverb and delay send levels, uniform over the batch

All functions are pure; randomness comes from an rng derived per
(master seed, batch seq, layer), so replays are exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import PATTERN_STEPS

IDLE_THRESHOLD = 0.1
RATE_RAMP_MAX = 1.0  # last hit at most one octave up


@dataclass(frozen=True)
class PartitionParams:
    """Per-partition musical control values for one batch."""

    partition_id: str
    scaled_procs: float
    memusage: float
    scaled_ibtx: float
    seq: int


@dataclass(frozen=True)
class Pattern:
    """Onset grid over two 4/4 bars at 16th resolution (steps 0..31)."""

    onsets: frozenset
    basic: frozenset

    def __post_init__(self):
        assert all(0 <= s < PATTERN_STEPS for s in self.onsets)
        assert self.basic <= self.onsets

    def steps(self) -> list[int]:
        return sorted(self.onsets)

    def as_bools(self) -> list[bool]:
        return [s in self.onsets for s in range(PATTERN_STEPS)]


@dataclass(frozen=True)
class IdleEvent:
    """Single hit at step 0 routed through the echo bus; silence after."""

    layer_id: str


@dataclass(frozen=True)
class LayerParams:
    layer_id: str
    pattern: object  # Pattern | IdleEvent
    rate_curve: tuple  # one playback rate per onset, in step order
    reverb_mix: float
    delay_amp: float

    @property
    def is_idle(self) -> bool:
        return isinstance(self.pattern, IdleEvent)


def layer_rng(seed: int, batch_seq: int, layer_index: int) -> np.random.Generator:
    """Independent substream per (batch, layer); replays are bit-exact."""
    return np.random.default_rng([seed, batch_seq, layer_index])


def extra_onset_count(scaled_procs: float, basic_size: int, threshold: float = IDLE_THRESHOLD) -> int:
    """Number of random extra onsets: linear from 0 at the idle threshold to
    all free slots at 1.0, rounded half-up."""
    free = PATTERN_STEPS - basic_size
    x = (scaled_procs - threshold) / (1.0 - threshold)
    return int(np.floor(x * free + 0.5))


def map_procs_to_pattern(
    scaled_procs: float,
    layer_id: str,
    basic_mask: frozenset,
    rng: np.random.Generator,
    threshold: float = IDLE_THRESHOLD,
):
    """Onset pattern for one layer and one batch.

    Below the threshold the layer goes idle. Otherwise the basic pattern
    always plays, plus a uniformly random subset of the free slots whose
    size grows linearly with scaled_procs; the subset is redrawn every
    batch.
    """
    if scaled_procs < threshold:
        return IdleEvent(layer_id=layer_id)
    basic = frozenset(basic_mask)
    free = sorted(set(range(PATTERN_STEPS)) - basic)
    k = min(extra_onset_count(scaled_procs, len(basic), threshold), len(free))
    extra = rng.choice(free, size=k, replace=False) if k > 0 else ()
    return Pattern(onsets=basic | frozenset(int(s) for s in extra), basic=basic)


def map_mem_to_rate_curve(memusage: float, onset_count: int, ramp_max: float = RATE_RAMP_MAX) -> tuple:
    """Playback rates per hit: first hit at original speed, then a linear
    ramp up to 1 + memusage * ramp_max on the last hit."""
    if onset_count <= 0:
        return ()
    if onset_count == 1:
        return (1.0,)
    top = memusage * ramp_max
    return tuple(1.0 + top * k / (onset_count - 1) for k in range(onset_count))


def map_ibtx_to_fx(scaled_ibtx: float) -> tuple[float, float]:
    """(reverb mix, delay amplitude), both linear in scaled ibtx and applied
    uniformly to every hit in the batch."""
    return (scaled_ibtx, scaled_ibtx)


def layer_params_for_batch(
    params: PartitionParams,
    layer_id: str,
    layer_index: int,
    basic_mask: frozenset,
    seed: int,
    threshold: float = IDLE_THRESHOLD,
    ramp_max: float = RATE_RAMP_MAX,
) -> LayerParams:
    """Combine the three mappings into one layer's parameters for one batch."""
    rng = layer_rng(seed, params.seq, layer_index)
    pattern = map_procs_to_pattern(params.scaled_procs, layer_id, basic_mask, rng, threshold)
    onset_count = 1 if isinstance(pattern, IdleEvent) else len(pattern.onsets)
    rate_curve = map_mem_to_rate_curve(params.memusage, onset_count, ramp_max)
    reverb_mix, delay_amp = map_ibtx_to_fx(params.scaled_ibtx)
    return LayerParams(
        layer_id=layer_id,
        pattern=pattern,
        rate_curve=rate_curve,
        reverb_mix=reverb_mix,
        delay_amp=delay_amp,
    )
