"""Raw-media decoding and preprocessing.

Video inputs are either a decodable video file or a directory of image
frames (pre-cropped faces, e.g. PNG/JPEG), loaded to RGB uint8. Audio is
PCM WAV of any rate/channel count, converted to 16 kHz mono float32.
Everything undecodable raises DecodeError with the reason; callers skip
the sample and log it.
"""

from __future__ import annotations

import wave
from math import gcd
from pathlib import Path

import cv2
import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy.signal import resample_poly

TARGET_SIZE = 224
TARGET_SR = 16000
IMAGENET_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
IMAGENET_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)
_FRAME_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


class DecodeError(ValueError):
    """Raised when a media file cannot be decoded."""


def _frames_from_dir(path: Path) -> np.ndarray:
    files = sorted(p for p in path.iterdir()
                   if p.is_file() and p.suffix.lower() in _FRAME_SUFFIXES)
    if not files:
        raise DecodeError(f"{path}: frame directory contains no image files")
    frames = []
    for file in files:
        try:
            with Image.open(file) as img:
                frames.append(np.asarray(img.convert("RGB"), dtype=np.uint8))
        except (UnidentifiedImageError, OSError) as exc:
            raise DecodeError(f"{file}: unreadable frame ({exc})") from None
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise DecodeError(f"{path}: frames disagree on dimensions {sorted(shapes)}")
    return np.stack(frames)


def _frames_from_file(path: Path) -> np.ndarray:
    capture = cv2.VideoCapture(str(path))
    try:
        if not capture.isOpened():
            raise DecodeError(f"{path}: video cannot be opened")
        frames = []
        while True:
            ok, frame = capture.read()
            if not ok:
                break
            frames.append(frame[:, :, ::-1].copy())  # BGR -> RGB
    finally:
        capture.release()
    if not frames:
        raise DecodeError(f"{path}: no decodable frames")
    return np.stack(frames)


def load_video_frames(path) -> np.ndarray:
    """Load a video file or frame directory to (N, H, W, 3) RGB uint8."""
    path = Path(path)
    if path.is_dir():
        return _frames_from_dir(path)
    if not path.is_file():
        raise DecodeError(f"{path}: no such file or directory")
    return _frames_from_file(path)


def preprocess_window(frames: np.ndarray, plain_frames: bool = False) -> np.ndarray:
    """(T, H, W, 3) uint8 RGB -> (T, 3, 224, 224) float32, ImageNet-normalised.

    With plain_frames the largest centered square is cropped first, so full
    scenes are not distorted; pre-cropped face frames resize directly.
    """
    out = np.empty((frames.shape[0], 3, TARGET_SIZE, TARGET_SIZE), dtype=np.float32)
    for i, frame in enumerate(frames):
        if plain_frames:
            h, w = frame.shape[:2]
            side = min(h, w)
            top, left = (h - side) // 2, (w - side) // 2
            frame = frame[top:top + side, left:left + side]
        if frame.shape[:2] != (TARGET_SIZE, TARGET_SIZE):
            frame = cv2.resize(frame, (TARGET_SIZE, TARGET_SIZE),
                               interpolation=cv2.INTER_AREA)
        scaled = frame.astype(np.float32) / 255.0
        out[i] = ((scaled - IMAGENET_MEAN) / IMAGENET_STD).transpose(2, 0, 1)
    return out


def _pcm_to_float(raw: bytes, sampwidth: int, n_channels: int) -> np.ndarray:
    if sampwidth == 1:  # unsigned 8-bit
        data = np.frombuffer(raw, dtype=np.uint8).astype(np.float32)
        data = (data - 128.0) / 128.0
    elif sampwidth == 2:
        data = np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32768.0
    elif sampwidth == 3:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        x = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        x = (x ^ 0x800000) - 0x800000
        data = x.astype(np.float32) / 8388608.0
    elif sampwidth == 4:
        data = np.frombuffer(raw, dtype="<i4").astype(np.float32) / 2147483648.0
    else:
        raise DecodeError(f"unsupported PCM sample width {sampwidth}")
    if n_channels > 1:
        data = data.reshape(-1, n_channels).mean(axis=1)
    return data


def load_audio(path, target_sr: int = TARGET_SR) -> np.ndarray:
    """Load a PCM WAV file as mono float32 at target_sr (default 16 kHz)."""
    path = Path(path)
    if not path.is_file():
        raise DecodeError(f"{path}: no such file")
    try:
        with wave.open(str(path), "rb") as wav:
            n_channels = wav.getnchannels()
            sampwidth = wav.getsampwidth()
            rate = wav.getframerate()
            n_frames = wav.getnframes()
            raw = wav.readframes(n_frames)
    except (wave.Error, EOFError) as exc:
        raise DecodeError(f"{path}: not a readable PCM WAV ({exc})") from None
    if n_frames == 0:
        raise DecodeError(f"{path}: audio stream is empty")
    try:
        data = _pcm_to_float(raw, sampwidth, n_channels)
    except DecodeError as exc:
        raise DecodeError(f"{path}: {exc}") from None
    if rate != target_sr:
        g = gcd(rate, target_sr)
        data = resample_poly(data, target_sr // g, rate // g)
    return np.ascontiguousarray(data, dtype=np.float32)
