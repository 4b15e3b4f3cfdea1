"""Shared fixtures: three locally synthesized short media clips, plus the
per-criterion pass/fail reporting used by the conformance test.

The clips cover the decode paths and edge policies: a normal 3-second video
file, a directory of pre-cropped frames with a context-overflowing
transcript, and a 7-frame video (shorter than one window) with an empty
transcript. Audio spans mono/stereo and three sample rates.
"""
import json
import wave
from pathlib import Path

import cv2
import numpy as np
import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(label): acceptance criterion; reported as one pass/fail line",
    )
    config._criterion_results = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not marker.args:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        item.config._criterion_results.append((str(marker.args[0]), report.outcome))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_criterion_results", [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome in results:
        tag = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{tag}] {label}")


def write_wav(path, data: np.ndarray, rate: int) -> None:
    """data: float in [-1, 1], shape (n,) mono or (n, 2) stereo; 16-bit PCM."""
    channels = 1 if data.ndim == 1 else data.shape[1]
    pcm = (np.clip(data, -1.0, 1.0) * 32767).astype("<i2")
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(channels)
        wav.setsampwidth(2)
        wav.setframerate(rate)
        wav.writeframes(pcm.tobytes())


def write_video(path, frames: np.ndarray, fps: float = 25.0) -> None:
    """frames: (N, H, W, 3) uint8 RGB, written as an mp4 file."""
    height, width = frames.shape[1:3]
    writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*"mp4v"),
                             fps, (width, height))
    assert writer.isOpened(), "mp4 writer unavailable"
    for frame in frames:
        writer.write(frame[:, :, ::-1])  # RGB -> BGR
    writer.release()


def make_frames(rng, count, height=64, width=80) -> np.ndarray:
    """Smooth moving-gradient frames so adjacent frames differ predictably."""
    ys = np.linspace(0.0, 1.0, height)[:, None]
    xs = np.linspace(0.0, 1.0, width)[None, :]
    frames = np.empty((count, height, width, 3), dtype=np.uint8)
    phase = rng.uniform(0.0, 1.0)
    for t in range(count):
        base = 0.5 + 0.5 * np.sin(2 * np.pi * (xs + ys + phase + t / max(count, 1)))
        noise = rng.uniform(0.0, 0.15, size=(height, width))
        gray = np.clip(base * 0.85 + noise, 0.0, 1.0)
        for c, gain in enumerate((1.0, 0.8, 0.6)):
            frames[t, :, :, c] = (gray * gain * 255).astype(np.uint8)
    return frames


@pytest.fixture(scope="session")
def clips(tmp_path_factory):
    """Three raw clips + the input manifest describing them."""
    root = tmp_path_factory.mktemp("raw_clips")
    media = root / "media"
    media.mkdir()
    rng = np.random.default_rng(2024)

    # clip-a: 75-frame (3 s @ 25 fps) mp4, 1.0 s 16 kHz mono tone, short text
    write_video(media / "clip-a.mp4", make_frames(rng, 75))
    tone = 0.4 * np.sin(2 * np.pi * 440.0 * np.arange(16000) / 16000.0)
    write_wav(media / "clip-a.wav", tone, 16000)

    # clip-b: directory of 20 pre-cropped frames, 0.5 s 44.1 kHz stereo,
    # transcript overflowing the 512-token context
    frame_dir = media / "clip-b-frames"
    frame_dir.mkdir()
    for i, frame in enumerate(make_frames(rng, 20, height=96, width=96)):
        cv2.imwrite(str(frame_dir / f"frame_{i:03d}.png"), frame[:, :, ::-1])
    n = int(44100 * 0.5)
    stereo = np.stack([0.3 * np.sin(2 * np.pi * 330.0 * np.arange(n) / 44100.0),
                       0.3 * np.sin(2 * np.pi * 550.0 * np.arange(n) / 44100.0)], axis=1)
    write_wav(media / "clip-b.wav", stereo, 44100)
    long_text = " ".join(f"word{i}" for i in range(600))

    # clip-c: 7-frame mp4 (shorter than one 16-frame window), 0.25 s 8 kHz
    # mono, empty transcript
    write_video(media / "clip-c.mp4", make_frames(rng, 7))
    quiet = 0.2 * np.sin(2 * np.pi * 220.0 * np.arange(2000) / 8000.0)
    write_wav(media / "clip-c.wav", quiet, 8000)

    manifest = root / "raw.jsonl"
    rows = [
        {"id": "clip-a", "video": "media/clip-a.mp4", "audio": "media/clip-a.wav",
         "transcript": "I guess so, sure, whatever you think is best",
         "split": "train", "label": 1},
        {"id": "clip-b", "video": "media/clip-b-frames", "audio": "media/clip-b.wav",
         "transcript": long_text, "split": "val", "label": 0},
        {"id": "clip-c", "video": "media/clip-c.mp4", "audio": "media/clip-c.wav",
         "transcript": "", "split": "test", "label": 1},
    ]
    manifest.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return {"root": root, "manifest": manifest, "media": media}


@pytest.fixture(scope="session")
def dataset(clips, tmp_path_factory):
    """One shared stub-backend extraction of the three clips (K=5, seed 0)."""
    from caahextract import ExtractionSpec, extract

    out = tmp_path_factory.mktemp("dataset")
    spec = ExtractionSpec(manifest=clips["manifest"], out_dir=out,
                          windows=5, window_frames=16, seed=0, backend="stub")
    report = extract(spec)
    return {"out": out, "spec": spec, "report": report}
