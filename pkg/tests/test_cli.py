import json
import socket
import threading
import time
import wave

import pytest

from clusterbeat.cli import CliError, cmd_live, cmd_render, cmd_replay, cmd_report, main
from clusterbeat.clustersim import write_log
from clusterbeat.config import Config, ConfigError, load_config, save_config
from clusterbeat.eventlog import read_event_log


@pytest.fixture
def metrics_log(tmp_path):
    path = tmp_path / "metrics.log"
    write_log(str(path), seed=11, batches=4)
    return path


# ---- config ------------------------------------------------------------------


def test_empty_config_file_gives_full_defaults(tmp_path):
    p = tmp_path / "empty.json"
    p.write_text("")
    cfg = load_config(p)
    assert len(cfg.partitions) == 10
    assert sum(n for _, n, _ in cfg.partitions) == 95
    assert cfg.bpm == 128.0
    assert cfg.window_n == {"procs": 8, "ibtx": 8}
    assert cfg.idle_threshold == 0.1
    assert cfg.batch_interval == 15.0


def test_single_key_override(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"bpm": 140}')
    cfg = load_config(p)
    assert cfg.bpm == 140
    defaults = Config()
    assert cfg.window_n == defaults.window_n
    assert cfg.partitions == defaults.partitions


def test_zero_window_rejected_naming_key(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"window_n": {"procs": 0}}')
    with pytest.raises(ConfigError, match="window_n.procs"):
        load_config(p)


def test_unknown_key_rejected(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"tempo": 120}')
    with pytest.raises(ConfigError, match="tempo"):
        load_config(p)


def test_config_round_trips(tmp_path):
    cfg = Config()
    cfg.bpm = 126.0
    cfg.window_n = {"procs": 16, "ibtx": 4}
    path = tmp_path / "out.json"
    save_config(cfg, path)
    again = load_config(path)
    assert again.to_dict() == cfg.to_dict()


def test_bad_basic_pattern_rejected(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"basic_patterns": {**Config().basic_patterns, "kick": [0, 99]}}))
    with pytest.raises(ConfigError, match="basic_patterns.kick"):
        load_config(p)


# ---- render -------------------------------------------------------------------


def test_render_four_batches_yields_sixty_seconds(tmp_path, metrics_log):
    out = tmp_path / "out.wav"
    summary = cmd_render(Config(), str(metrics_log), str(out), str(tmp_path / "ev.tsv"))
    assert summary.batches == 4
    assert summary.duration_s == 60.0
    with wave.open(str(out), "rb") as w:
        assert w.getnframes() == 60 * 48000
        assert w.getframerate() == 48000
        assert w.getnchannels() == 1
    events = read_event_log(tmp_path / "ev.tsv")
    assert len(events) == summary.events
    assert all(0.0 <= e["time_s"] < 60.0 for e in events)


def test_render_missing_log_fails(tmp_path):
    with pytest.raises(CliError, match="not found"):
        cmd_render(Config(), str(tmp_path / "nope.log"), None, str(tmp_path / "e.tsv"))


def test_render_aborts_on_malformed_line_with_lineno(tmp_path, metrics_log):
    lines = metrics_log.read_text().splitlines()
    lines.insert(2, "{broken")
    bad = tmp_path / "bad.log"
    bad.write_text("\n".join(lines) + "\n")
    with pytest.raises(CliError, match=r"bad\.log:3"):
        cmd_render(Config(), str(bad), None, str(tmp_path / "e.tsv"))


def test_render_events_only_skips_audio(tmp_path, metrics_log):
    summary = cmd_render(Config(), str(metrics_log), None, str(tmp_path / "e.tsv"))
    assert summary.wav_path is None
    assert (tmp_path / "e.tsv").exists()


def test_render_writes_figures(tmp_path, metrics_log):
    figs = tmp_path / "figs"
    cmd_render(Config(), str(metrics_log), None, str(tmp_path / "e.tsv"), figures_dir=str(figs))
    assert (figs / "activity.png").exists()
    assert (figs / "density.png").exists()
    assert (figs / "timeline.png").exists()


# ---- replay -------------------------------------------------------------------


def test_replay_event_log_matches_render(tmp_path, metrics_log):
    render_events = tmp_path / "render.tsv"
    replay_events = tmp_path / "replay.tsv"
    cmd_render(Config(), str(metrics_log), None, str(render_events))
    summary = cmd_replay(Config(), str(metrics_log), speed=1000.0, out_events=str(replay_events))
    assert summary.batches == 4
    assert replay_events.read_bytes() == render_events.read_bytes()


def test_replay_speed_compresses_wall_time(tmp_path, metrics_log):
    t0 = time.monotonic()
    cmd_replay(Config(), str(metrics_log), speed=100.0, out_events=str(tmp_path / "e.tsv"))
    elapsed = time.monotonic() - t0
    # 4 batches at 15s/100 pacing ~ 0.45s (first batch unpaced)
    assert elapsed < 5.0


def test_replay_rejects_bad_speed(metrics_log):
    with pytest.raises(CliError):
        cmd_replay(Config(), str(metrics_log), speed=0.0)


# ---- report -------------------------------------------------------------------


def test_report_writes_tables_and_figures(tmp_path, metrics_log):
    out = tmp_path / "report"
    summary = cmd_report(Config(), str(metrics_log), str(out))
    assert summary.batches == 4
    assert (out / "params.tsv").exists()
    assert (out / "events.tsv").exists()
    assert (out / "activity.png").exists()
    lines = (out / "params.tsv").read_text().splitlines()
    assert lines[0] == "batch\tseq\tpartition\tlayer\tscaled_procs\tmem\tscaled_ibtx"
    assert len(lines) == 1 + 4 * 10  # header + batches x partitions


# ---- live ---------------------------------------------------------------------


def run_live_in_thread(cfg, duration=3.0, **kw):
    ready = threading.Event()
    ports: dict = {}
    engines: list = []
    result: dict = {}

    def target():
        result["summary"] = cmd_live(
            cfg,
            listen="127.0.0.1:0",
            control="127.0.0.1:0",
            audio_mode="none",
            duration=duration,
            ready_event=ready,
            engine_out=engines,
            ports_out=ports,
            **kw,
        )

    t = threading.Thread(target=target, daemon=True)
    t.start()
    assert ready.wait(5.0)
    return t, ports, engines[0], result


def test_live_ingests_stream_and_serves_control(tmp_path, metrics_log):
    cfg = Config()
    events_path = tmp_path / "live.tsv"
    t, ports, engine, result = run_live_in_thread(cfg, duration=4.0, out_events=str(events_path))

    # control round trip while live
    ctl = socket.create_connection(("127.0.0.1", ports["control"]), timeout=5.0)
    cf = ctl.makefile("rwb")
    cf.write(b'{"cmd":"get_state"}\n')
    cf.flush()
    state = json.loads(cf.readline())
    assert state["type"] == "state" and state["mode"] == "round_robin"

    # feed the metrics log over the ingestion socket
    prod = socket.create_connection(("127.0.0.1", ports["listen"]), timeout=5.0)
    payload = metrics_log.read_bytes()
    prod.sendall(payload)
    prod.close()
    deadline = time.time() + 3.0
    while engine.batches_accepted < 4 and time.time() < deadline:
        time.sleep(0.05)
    assert engine.batches_accepted == 4
    ctl.close()
    t.join(timeout=8.0)
    assert result["summary"].batches == 4
    assert result["summary"].parse_errors == 0
    assert events_path.exists()


def test_live_event_log_matches_replay(tmp_path, metrics_log):
    cfg = Config()
    live_events = tmp_path / "live.tsv"
    t, ports, engine, result = run_live_in_thread(cfg, duration=4.0, out_events=str(live_events))
    prod = socket.create_connection(("127.0.0.1", ports["listen"]), timeout=5.0)
    prod.sendall(metrics_log.read_bytes())
    prod.close()
    deadline = time.time() + 3.0
    while engine.batches_accepted < 4 and time.time() < deadline:
        time.sleep(0.05)
    t.join(timeout=8.0)

    replay_events = tmp_path / "replay.tsv"
    cmd_replay(cfg, str(metrics_log), speed=1000.0, out_events=str(replay_events))
    assert live_events.read_bytes() == replay_events.read_bytes()


def test_live_port_conflict_is_diagnosed():
    blocker = socket.socket()
    blocker.bind(("127.0.0.1", 0))
    port = blocker.getsockname()[1]
    blocker.listen(1)
    cfg = Config()
    with pytest.raises(CliError, match="ingestion socket"):
        cmd_live(cfg, listen=f"127.0.0.1:{port}", control="127.0.0.1:0", audio_mode="none", duration=0.1)
    blocker.close()


# ---- argparse surface ------------------------------------------------------------


def test_main_render_requires_log(capsys):
    assert main(["--mode", "render"]) == 1
    assert "render needs --log" in capsys.readouterr().err


def test_main_rejects_bad_config(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text('{"bpm": -3}')
    assert main(["--config", str(p), "--mode", "render", "--log", "x"]) == 2
    assert "bpm" in capsys.readouterr().err


def test_main_render_end_to_end(tmp_path, metrics_log, capsys):
    out = tmp_path / "o.wav"
    code = main(["--mode", "render", "--log", str(metrics_log), "--out", str(out), "--seed", "5"])
    assert code == 0
    assert out.exists()
    assert out.with_suffix(".events.tsv").exists()
    assert "rendered 4 batches" in capsys.readouterr().out
