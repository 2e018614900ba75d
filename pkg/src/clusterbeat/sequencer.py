"""Musical clock, pattern expansion, and the round-robin presentation schedule.

At 128 BPM a 16th step lasts 0.1171875 s, a two-bar pattern 3.75 s, and a
15 s batch holds exactly four pattern cycles. Events carry times relative
to the batch start, so the event stream is a pure function of the batch
stream plus the seed regardless of wall-clock pacing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .config import LAYER_ORDER, PATTERN_STEPS
from .mapping import IdleEvent, LayerParams

FOREGROUND_GAIN = 1.0
BACKGROUND = "background"
SILENT = "silent"
FOREGROUND = "foreground"

BATCHES_PER_PHASE = 2


@dataclass(frozen=True)
class Transport:
    bpm: float = 128.0
    steps_per_beat: int = 4  # 16th notes
    pattern_steps: int = PATTERN_STEPS  # two 4/4 bars
    batch_interval: float = 15.0

    @property
    def step_duration(self) -> float:
        return 60.0 / self.bpm / self.steps_per_beat

    @property
    def pattern_duration(self) -> float:
        return self.pattern_steps * self.step_duration

    @property
    def cycles_per_batch(self) -> int:
        """Full pattern cycles fitting in one batch (4 at the defaults)."""
        return int(math.floor(self.batch_interval / self.pattern_duration + 1e-9))


@dataclass(frozen=True)
class LayerEvent:
    """One timed sonic trigger; the sequencer -> audio contract."""

    layer_id: str
    onset: float  # seconds from batch start
    step: int
    rate: float
    gain: float
    reverb_mix: float
    delay_amp: float
    idle_echo: bool = False


@dataclass(frozen=True)
class RoundRobinState:
    """Foreground rotation: each layer for two batches in fixed order, then
    a two-batch tutti, then the cycle restarts. Non-foreground layers are
    redrawn background-or-silent at every phase change."""

    order: tuple = LAYER_ORDER
    phase: int = 0  # 0..len(order)-1 foreground phases; len(order) = tutti
    batches_in_phase: int = 0
    phase_changes: int = 0
    roles: dict = field(default_factory=dict)  # layer -> BACKGROUND | SILENT

    @property
    def is_tutti(self) -> bool:
        return self.phase == len(self.order)

    @property
    def foreground(self) -> str | None:
        return None if self.is_tutti else self.order[self.phase]

    def role_of(self, layer_id: str) -> str:
        if self.is_tutti or layer_id == self.foreground:
            return FOREGROUND
        return self.roles.get(layer_id, SILENT)

    def cycle_length_batches(self) -> int:
        return (len(self.order) + 1) * BATCHES_PER_PHASE


def _draw_roles(order: tuple, foreground: str | None, rng: np.random.Generator, background_prob: float) -> dict:
    roles = {}
    for layer in order:
        if layer == foreground:
            continue
        roles[layer] = BACKGROUND if rng.random() < background_prob else SILENT
    return roles


def initial_round_robin(seed: int, order: tuple = LAYER_ORDER, background_prob: float = 0.5) -> RoundRobinState:
    rng = np.random.default_rng([seed, 1, 0])
    state = RoundRobinState(order=tuple(order))
    return replace(state, roles=_draw_roles(state.order, state.foreground, rng, background_prob))


def advance_round_robin(state: RoundRobinState, seed: int, background_prob: float = 0.5) -> RoundRobinState:
    """Advance by one batch. After two batches in a phase the next layer
    moves to the foreground (tutti after the last), and the background /
    silent assignment of the other layers is redrawn."""
    batches = state.batches_in_phase + 1
    if batches < BATCHES_PER_PHASE:
        return replace(state, batches_in_phase=batches)
    phase = (state.phase + 1) % (len(state.order) + 1)
    changes = state.phase_changes + 1
    nxt = replace(state, phase=phase, batches_in_phase=0, phase_changes=changes)
    rng = np.random.default_rng([seed, 1, changes])
    return replace(nxt, roles=_draw_roles(nxt.order, nxt.foreground, rng, background_prob))


def presentation_gains(
    mode: str,
    paused: set,
    selected: set,
    rr: RoundRobinState,
    background_gain: float = 0.25,
) -> dict[str, float | None]:
    """Per-layer presentation gain; None suppresses the layer's events."""
    gains: dict[str, float | None] = {}
    for layer in rr.order:
        if layer in paused:
            gains[layer] = None
        elif mode == "full_display":
            gains[layer] = FOREGROUND_GAIN if layer in selected else None
        else:
            role = rr.role_of(layer)
            if role == FOREGROUND:
                gains[layer] = FOREGROUND_GAIN
            elif role == BACKGROUND:
                gains[layer] = background_gain
            else:
                gains[layer] = None
    return gains


def pattern_to_events(layer: LayerParams, transport: Transport, gain: float) -> list[LayerEvent]:
    """Expand one layer's parameters into timed events for one batch.

    Each onset step repeats once per full pattern cycle in the batch; the
    rate curve is indexed by the onset's position within the pattern. An
    idle layer yields exactly one echo-flagged event at t = 0.
    """
    if isinstance(layer.pattern, IdleEvent):
        return [
            LayerEvent(
                layer_id=layer.layer_id,
                onset=0.0,
                step=0,
                rate=layer.rate_curve[0] if layer.rate_curve else 1.0,
                gain=gain,
                reverb_mix=layer.reverb_mix,
                delay_amp=1.0,  # echo bus at full send
                idle_echo=True,
            )
        ]
    events = []
    steps = layer.pattern.steps()
    for cycle in range(transport.cycles_per_batch):
        base = cycle * transport.pattern_duration
        for k, step in enumerate(steps):
            events.append(
                LayerEvent(
                    layer_id=layer.layer_id,
                    onset=base + step * transport.step_duration,
                    step=step,
                    rate=layer.rate_curve[k],
                    gain=gain,
                    reverb_mix=layer.reverb_mix,
                    delay_amp=layer.delay_amp,
                )
            )
    return events


def schedule_batch(
    layer_params: dict[str, LayerParams],
    gains: dict[str, float | None],
    transport: Transport,
    order: tuple = LAYER_ORDER,
) -> list[LayerEvent]:
    """Apply presentation gains and merge all layers' events, sorted by time.

    Layers with gain None (silent, paused, unselected) emit nothing. An
    empty params dict (no batch yet) yields an empty list.
    """
    events: list[LayerEvent] = []
    layer_index = {layer: i for i, layer in enumerate(order)}
    for layer_id, params in layer_params.items():
        gain = gains.get(layer_id)
        if gain is None or gain <= 0.0:
            continue
        events.extend(pattern_to_events(params, transport, gain))
    events.sort(key=lambda e: (e.onset, layer_index.get(e.layer_id, len(order)), e.step))
    return events
