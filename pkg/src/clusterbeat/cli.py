"""Entry point: config loading and the run modes.

  live    listen for metric batches on a socket, serve the control protocol,
          play audio (device when available, else a paced null sink)
  replay  feed a metrics log at real or accelerated pace (audio offline)
  render  offline: metrics log -> WAV + event log, faster than real time
  report  offline: metrics log -> delimited tables + matplotlib figures
"""

from __future__ import annotations

import argparse
import logging
import queue
import socket
import sys
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio.engine import AudioEngine, WavWriter
from .config import Config, ConfigError, load_config
from .control import ControlServer
from .eventlog import EventLogWriter
from .pipeline import BatchResult, SonificationEngine
from .protocol import ParseError

log = logging.getLogger(__name__)


class CliError(Exception):
    """Fatal CLI problem; message printed, nonzero exit."""


def build_audio_engine(cfg: Config, engine: SonificationEngine) -> AudioEngine:
    return AudioEngine(
        sample_rate=cfg.sample_rate,
        block_size=cfg.block_size,
        step_duration=engine.transport.step_duration,
        delay_steps=cfg.delay_steps,
        delay_feedback=cfg.delay_feedback,
        reverb_decay=cfg.reverb_decay,
        sample_dir=cfg.sample_dir,
        layer_ids=list(engine.order),
    )


@dataclass
class RunSummary:
    batches: int = 0
    events: int = 0
    parse_errors: int = 0
    duration_s: float = 0.0
    wav_path: str | None = None
    events_path: str | None = None


# ---- render ---------------------------------------------------------------


def cmd_render(
    cfg: Config,
    log_path: str,
    out_audio: str | None,
    out_events: str | None,
    figures_dir: str | None = None,
    collect: list | None = None,
) -> RunSummary:
    """Offline render: the whole pipeline at faster than real time.

    A malformed log line aborts with its line number (render is strict
    where live ingestion is tolerant)."""
    if not Path(log_path).exists():
        raise CliError(f"metrics log not found: {log_path}")
    engine = SonificationEngine(cfg)
    sr = cfg.sample_rate
    interval = cfg.batch_interval
    audio = build_audio_engine(cfg, engine) if out_audio else None
    wav = WavWriter(out_audio, sr, cfg.bit_depth) if out_audio else None
    elog = EventLogWriter(out_events) if out_events else None

    summary = RunSummary(wav_path=out_audio, events_path=out_events)
    block = np.zeros(cfg.block_size)
    pos = 0

    def render_full_blocks(target: int) -> None:
        nonlocal pos
        while pos + cfg.block_size <= target:
            audio.render_block(block, pos)
            wav.write(block)
            pos += cfg.block_size

    def render_to(target: int) -> None:
        nonlocal pos
        while pos < target:
            n = min(cfg.block_size, target - pos)
            view = block[:n]
            audio.render_block(view, pos)
            wav.write(view)
            pos += n

    results = collect if collect is not None else ([] if figures_dir else None)
    try:
        with open(log_path) as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    res = engine.process_line(line, strict=True)
                except ParseError as e:
                    raise CliError(f"{log_path}:{lineno}: {e}")
                batch_start = res.ordinal * interval
                if elog:
                    elog.write_batch(batch_start, res.events)
                if results is not None:
                    results.append(res)
                summary.batches += 1
                summary.events += len(res.events)
                if audio:
                    audio.add_batch_events(batch_start, res.events)
                    render_full_blocks(int(round((res.ordinal + 1) * interval * sr)))
        if audio:
            render_to(int(round(summary.batches * interval * sr)))
    finally:
        if wav:
            wav.close()
        if elog:
            elog.close()

    summary.duration_s = summary.batches * interval
    summary.parse_errors = engine.parse_stats.parse_errors
    if figures_dir and results is not None:
        from . import report

        rows = report.params_rows(results, engine.table)
        events = [
            {
                "time_s": r.ordinal * interval + ev.onset,
                "layer": ev.layer_id,
                "gain": ev.gain,
                "flags": "idle" if ev.idle_echo else "-",
            }
            for r in results
            for ev in r.events
        ]
        report.render_figures(figures_dir, rows, events, engine.order)
    return summary


# ---- report ----------------------------------------------------------------


def cmd_report(cfg: Config, log_path: str, out_dir: str) -> RunSummary:
    """Process a metrics log without audio; write params.tsv, events.tsv,
    and figures into out_dir."""
    if not Path(log_path).exists():
        raise CliError(f"metrics log not found: {log_path}")
    from . import report

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    engine = SonificationEngine(cfg)
    interval = cfg.batch_interval
    results: list[BatchResult] = []
    summary = RunSummary()
    with EventLogWriter(out / "events.tsv") as elog:
        with open(log_path) as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    res = engine.process_line(line, strict=True)
                except ParseError as e:
                    raise CliError(f"{log_path}:{lineno}: {e}")
                elog.write_batch(res.ordinal * interval, res.events)
                results.append(res)
                summary.batches += 1
                summary.events += len(res.events)

    rows = report.params_rows(results, engine.table)
    report.write_params_tsv(out / "params.tsv", rows)
    events = [
        {
            "time_s": r.ordinal * interval + ev.onset,
            "layer": ev.layer_id,
            "gain": ev.gain,
            "flags": "idle" if ev.idle_echo else "-",
        }
        for r in results
        for ev in r.events
    ]
    report.render_figures(out, rows, events, engine.order)
    summary.events_path = str(out / "events.tsv")
    summary.duration_s = summary.batches * interval
    return summary


# ---- replay -----------------------------------------------------------------


def cmd_replay(
    cfg: Config,
    log_path: str,
    speed: float = 1.0,
    out_events: str | None = None,
    out_audio: str | None = None,
    on_batch=None,
) -> RunSummary:
    """Feed a metrics log at real (speed=1) or accelerated pace.

    Event logs are identical to render's for the same stream and seed:
    event times are musical, not wall-clock. Audio, when requested, is
    rendered offline per batch so acceleration never distorts it."""
    if not Path(log_path).exists():
        raise CliError(f"metrics log not found: {log_path}")
    if speed <= 0:
        raise CliError("--speed must be positive")
    engine = SonificationEngine(cfg)
    interval = cfg.batch_interval
    sr = cfg.sample_rate
    audio = build_audio_engine(cfg, engine) if out_audio else None
    wav = WavWriter(out_audio, sr, cfg.bit_depth) if out_audio else None
    elog = EventLogWriter(out_events) if out_events else None
    summary = RunSummary(wav_path=out_audio, events_path=out_events)
    block = np.zeros(cfg.block_size)
    pos = 0
    pace = interval / speed
    next_deadline = None
    try:
        with open(log_path) as f:
            for line in f:
                if not line.strip():
                    continue
                if next_deadline is not None:
                    delay = next_deadline - time.monotonic()
                    if delay > 0:
                        time.sleep(delay)
                else:
                    next_deadline = time.monotonic()
                next_deadline += pace
                res = engine.process_line(line)
                if res is None:
                    continue
                batch_start = res.ordinal * interval
                if elog:
                    elog.write_batch(batch_start, res.events)
                    elog.flush()
                if audio:
                    audio.add_batch_events(batch_start, res.events)
                    boundary = int(round((res.ordinal + 1) * interval * sr))
                    while pos + cfg.block_size <= boundary:
                        audio.render_block(block, pos)
                        wav.write(block)
                        pos += cfg.block_size
                summary.batches += 1
                summary.events += len(res.events)
                if on_batch is not None:
                    on_batch(res)
        if audio:
            target = int(round(summary.batches * interval * sr))
            while pos < target:
                n = min(cfg.block_size, target - pos)
                view = block[:n]
                audio.render_block(view, pos)
                wav.write(view)
                pos += n
    finally:
        if wav:
            wav.close()
        if elog:
            elog.close()
    summary.duration_s = summary.batches * interval
    summary.parse_errors = engine.parse_stats.parse_errors
    return summary


# ---- live -------------------------------------------------------------------


class NullSink:
    """Consumes blocks at the real-time rate without a device; counts
    underruns against a 4-block prime buffer."""

    def __init__(self, sample_rate: int, block_size: int, prime_blocks: int = 4):
        self.period = block_size / sample_rate
        self.prime = prime_blocks
        self._start = None
        self._blocks = 0
        self.underruns = 0

    def write(self, block: np.ndarray) -> None:
        now = time.monotonic()
        if self._start is None:
            self._start = now
        self._blocks += 1
        deadline = self._start + (self._blocks + self.prime) * self.period
        if now > deadline:
            self.underruns += 1
            self._start = now - self._blocks * self.period  # resync
        sleep_until = self._start + self._blocks * self.period
        delta = sleep_until - now
        if delta > 0:
            time.sleep(delta)

    def close(self) -> None:
        pass


class DeviceSink:
    def __init__(self, sample_rate: int, block_size: int):
        try:
            import sounddevice
        except ImportError as e:
            raise CliError("audio device output requires the sounddevice package (pip install clusterbeat[audio])") from e
        try:
            self._stream = sounddevice.OutputStream(
                samplerate=sample_rate, blocksize=block_size, channels=1, dtype="float32"
            )
            self._stream.start()
        except Exception as e:
            raise CliError(f"cannot open audio device: {e}") from e
        self.underruns = 0

    def write(self, block: np.ndarray) -> None:
        self._stream.write(block.astype(np.float32))

    def close(self) -> None:
        self._stream.stop()
        self._stream.close()


def make_sink(cfg: Config, audio_mode: str):
    """auto: device if available, else the paced null sink. Explicit
    'device' failures are fatal per the run contract."""
    if audio_mode == "none":
        return None
    if audio_mode == "device":
        return DeviceSink(cfg.sample_rate, cfg.block_size)
    if audio_mode == "null":
        return NullSink(cfg.sample_rate, cfg.block_size)
    try:
        return DeviceSink(cfg.sample_rate, cfg.block_size)
    except CliError as e:
        log.warning("%s; falling back to silent paced output", e)
        return NullSink(cfg.sample_rate, cfg.block_size)


class LiveAudioRunner(threading.Thread):
    """Renders queued batch events against a wall-clock-paced sink.

    The first batch latches the mapping from musical time to the sample
    clock; if the producer stalls past a batch slot the timeline re-latches
    forward (never backward) so late events are not dropped."""

    def __init__(self, cfg: Config, engine: SonificationEngine, sink):
        super().__init__(name="audio-render", daemon=True)
        self.cfg = cfg
        self.audio = build_audio_engine(cfg, engine)
        self.sink = sink
        self.queue: queue.Queue = queue.Queue()
        self._stop = threading.Event()
        self._offset: int | None = None
        self._interval_samples = int(round(cfg.batch_interval * cfg.sample_rate))
        self._block = np.zeros(cfg.block_size)
        self._pos = 0

    def submit(self, result: BatchResult) -> None:
        self.queue.put(result)

    def stop(self) -> None:
        self._stop.set()

    def run(self) -> None:
        while not self._stop.is_set():
            try:
                while True:
                    res = self.queue.get_nowait()
                    base = (self._offset or 0) + res.ordinal * self._interval_samples
                    if self._offset is None or base < self._pos:
                        self._offset = self._pos - res.ordinal * self._interval_samples
                        base = self._pos
                    self.audio.add_batch_events(base / self.cfg.sample_rate, res.events)
            except queue.Empty:
                pass
            self.audio.render_block(self._block, self._pos)
            self._pos += len(self._block)
            self.sink.write(self._block)
        self.sink.close()


def _parse_addr(value: str, default_host: str, default_port: int) -> tuple[str, int]:
    if not value:
        return default_host, default_port
    if ":" in value:
        host, port = value.rsplit(":", 1)
        return host or default_host, int(port)
    return value, default_port


def cmd_live(
    cfg: Config,
    listen: str | None,
    control: str | None,
    audio_mode: str = "auto",
    out_events: str | None = None,
    duration: float | None = None,
    serve_ui: int | None = None,
    ui_dir: str | None = None,
    ready_event: threading.Event | None = None,
    engine_out: list | None = None,
    ports_out: dict | None = None,
) -> RunSummary:
    """Bind the ingestion and control sockets, start audio, run until
    signal (or `duration` seconds, used by tests)."""
    engine = SonificationEngine(cfg)
    if engine_out is not None:
        engine_out.append(engine)
    summary = RunSummary(events_path=out_events)

    sink = make_sink(cfg, audio_mode)
    audio_runner = LiveAudioRunner(cfg, engine, sink) if sink is not None else None

    listen_host, listen_port = _parse_addr(listen or "", cfg.listen_addr, cfg.listen_port)
    control_host, control_port = _parse_addr(control or "", cfg.control_addr, cfg.control_port)

    try:
        server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        server.bind((listen_host, listen_port))
        server.listen(1)
        server.settimeout(0.2)
    except OSError as e:
        raise CliError(f"cannot bind ingestion socket {listen_host}:{listen_port}: {e}")

    control_server = ControlServer(engine, control_host, control_port)
    elog = EventLogWriter(out_events) if out_events else None
    stop = threading.Event()

    def ingest_loop():
        while not stop.is_set():
            try:
                conn, peer = server.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            log.info("producer connected from %s", peer)
            try:
                f = conn.makefile("rb")
                for line in f:
                    if stop.is_set():
                        break
                    if not line.strip():
                        continue
                    res = engine.process_line(line)
                    if res is None:
                        continue
                    summary.batches += 1
                    summary.events += len(res.events)
                    if elog:
                        elog.write_batch(res.ordinal * cfg.batch_interval, res.events)
                        elog.flush()
                    if audio_runner is not None:
                        audio_runner.submit(res)
            except OSError:
                pass
            finally:
                try:
                    conn.close()
                except OSError:
                    pass
                log.info("producer disconnected")

    # startup order: audio, ingestion, control last
    if audio_runner is not None:
        audio_runner.start()
    ingest = threading.Thread(target=ingest_loop, name="ingest", daemon=True)
    ingest.start()
    try:
        control_server.start()
    except OSError as e:
        stop.set()
        server.close()
        raise CliError(f"cannot bind control socket {control_host}:{control_port}: {e}")

    ui_server = None
    if serve_ui is not None:
        from .uiserver import start_ui_server

        ui_server = start_ui_server(serve_ui, ui_dir, control_host, control_server.port)

    if ports_out is not None:
        ports_out["listen"] = server.getsockname()[1]
        ports_out["control"] = control_server.port
    if ready_event is not None:
        ready_event.set()
    log.info("live: metrics on %s:%d, control on %s:%d", listen_host, listen_port, control_host, control_server.port)
    try:
        if duration is not None:
            stop.wait(duration)
        else:
            while not stop.is_set():
                time.sleep(0.5)
    except KeyboardInterrupt:
        pass
    finally:
        # shutdown order: control first, audio last
        if ui_server is not None:
            ui_server.stop()
        control_server.stop()
        stop.set()
        server.close()
        ingest.join(timeout=2.0)
        if audio_runner is not None:
            audio_runner.stop()
            audio_runner.join(timeout=2.0)
        if elog:
            elog.close()

    summary.parse_errors = engine.parse_stats.parse_errors
    return summary


# ---- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clusterbeat", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", metavar="PATH", help="JSON config file merged over defaults")
    p.add_argument("--mode", choices=["live", "replay", "render", "report"], default="live")
    p.add_argument("--log", metavar="PATH", help="metrics log (replay/render/report input)")
    p.add_argument("--seed", type=int, metavar="N", help="override the config rng seed")
    p.add_argument("--speed", type=float, default=1.0, metavar="X", help="replay pace multiplier")
    p.add_argument("--out", metavar="PATH", help="render/replay: output WAV; report: output directory")
    p.add_argument("--events", metavar="PATH", help="event log output (TSV)")
    p.add_argument("--figures", metavar="DIR", help="render: also write report figures here")
    p.add_argument("--listen", metavar="ADDR:PORT", help="live: metrics ingestion bind address")
    p.add_argument("--control", metavar="ADDR:PORT", help="live: control protocol bind address")
    p.add_argument("--audio", choices=["auto", "device", "null", "none"], default="auto", help="live audio output")
    p.add_argument("--duration", type=float, metavar="SEC", help="live: exit after SEC seconds")
    p.add_argument("--serve-ui", type=int, metavar="PORT", help="live: serve the web control panel on PORT")
    p.add_argument("--ui-dir", metavar="DIR", help="static assets for --serve-ui (default: frontend/dist)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
            cfg.validate()
    except (ConfigError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2

    try:
        if args.mode == "render":
            if not args.log:
                raise CliError("render needs --log")
            out_audio = args.out or cfg.out_audio
            out_events = args.events or cfg.out_events or (str(Path(out_audio).with_suffix(".events.tsv")) if out_audio else None)
            if not out_audio and not out_events:
                raise CliError("render needs --out and/or --events")
            s = cmd_render(cfg, args.log, out_audio, out_events, figures_dir=args.figures)
            print(f"rendered {s.batches} batches ({s.duration_s:.0f} s, {s.events} events) -> {s.wav_path or s.events_path}")
        elif args.mode == "replay":
            if not args.log:
                raise CliError("replay needs --log")
            s = cmd_replay(cfg, args.log, speed=args.speed, out_events=args.events, out_audio=args.out)
            print(f"replayed {s.batches} batches at {args.speed:g}x ({s.events} events)")
        elif args.mode == "report":
            if not args.log:
                raise CliError("report needs --log")
            s = cmd_report(cfg, args.log, args.out or "report")
            print(f"report for {s.batches} batches written to {args.out or 'report'}")
        else:
            s = cmd_live(
                cfg,
                listen=args.listen,
                control=args.control,
                audio_mode=args.audio,
                out_events=args.events,
                duration=args.duration,
                serve_ui=args.serve_ui,
                ui_dir=args.ui_dir,
            )
            print(f"live session ended: {s.batches} batches, {s.parse_errors} parse errors")
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
