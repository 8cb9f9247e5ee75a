"""MFCC front end: 13-dimensional frames (12 cepstra + log energy) from 16 kHz PCM."""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np
import scipy.fft

from .errors import EmptyInputError, ParseError

N_FEATURES = 13
LOG_FLOOR = 1e-10
# scale making the window's mean square equal to 1
WINDOW_GAIN = 46.0 / np.sqrt(1691.0 / 2.0)


@dataclass(frozen=True)
class AudioSignal:
    samples: np.ndarray
    rate: int = 16000

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError(f"sample rate must be positive, got {self.rate}")
        object.__setattr__(self, "samples", np.asarray(self.samples))

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class FrameConfig:
    frame_len: float = 0.025
    hop: float = 0.020
    fft_size: int = 512
    n_mels: int = 26
    n_ceps: int = 12

    def validate(self, rate: int = 16000) -> "FrameConfig":
        if not (self.frame_len >= self.hop > 0):
            raise ValueError("frame config requires frame_len >= hop > 0")
        if self.fft_size < 2 or self.fft_size & (self.fft_size - 1):
            raise ValueError(f"fft_size must be a power of two, got {self.fft_size}")
        if self.fft_size < self.frame_samples(rate):
            raise ValueError("fft_size must cover one frame")
        if not (0 < self.n_ceps < self.n_mels):
            raise ValueError("frame config requires 0 < n_ceps < n_mels")
        return self

    def frame_samples(self, rate: int) -> int:
        return int(round(self.frame_len * rate))

    def hop_samples(self, rate: int) -> int:
        return int(round(self.hop * rate))

    @property
    def n_features(self) -> int:
        return self.n_ceps + 1


@dataclass
class FeatureSequence:
    frames: np.ndarray
    label: str
    source: str = ""

    def __post_init__(self):
        self.frames = np.atleast_2d(np.asarray(self.frames, dtype=float))
        if self.frames.shape[0] == 0:
            raise EmptyInputError("feature sequence has no frames")

    def __len__(self):
        return self.frames.shape[0]


def hamming_window(K: int) -> np.ndarray:
    """Hamming window scaled to unit mean square, sampled at t = k/(K-1)."""
    if K < 2:
        raise ValueError(f"window length must be >= 2, got {K}")
    t = np.arange(K) / (K - 1)
    return WINDOW_GAIN * (25.0 / 46.0 - 21.0 / 46.0 * np.cos(2.0 * np.pi * t))


def frame_signal(signal: AudioSignal, cfg: FrameConfig = FrameConfig()) -> np.ndarray:
    """Cut ``signal`` into windowed frames, shape (n_frames, frame_samples)."""
    size = cfg.frame_samples(signal.rate)
    hop = cfg.hop_samples(signal.rate)
    x = np.asarray(signal.samples, dtype=float)
    if x.size < size:
        raise EmptyInputError(f"signal has {x.size} samples, one frame needs {size}")
    n_frames = (x.size - size) // hop + 1
    idx = np.arange(size)[None, :] + hop * np.arange(n_frames)[:, None]
    return x[idx] * hamming_window(size)


def power_spectrum(frame: np.ndarray, fft_size: int) -> np.ndarray:
    """|DFT|^2 of the zero-padded frame for bins 0..fft_size/2."""
    frame = np.asarray(frame, dtype=float)
    if frame.shape[-1] > fft_size:
        raise ValueError(f"frame of {frame.shape[-1]} samples exceeds fft_size {fft_size}")
    spec = np.fft.rfft(frame, n=fft_size)
    return spec.real**2 + spec.imag**2


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


def mel_filterbank(cfg: FrameConfig = FrameConfig(), rate: int = 16000) -> np.ndarray:
    """Triangular filters equally spaced in mel between 0 Hz and Nyquist.

    Returns an ``(n_mels, fft_size // 2 + 1)`` matrix. Each row is rescaled
    so its largest weight is exactly 1.
    """
    if rate <= 0:
        raise ValueError(f"sample rate must be positive, got {rate}")
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(rate / 2.0), cfg.n_mels + 2))
    freqs = np.arange(cfg.fft_size // 2 + 1) * rate / cfg.fft_size
    bank = np.zeros((cfg.n_mels, freqs.size))
    for i in range(cfg.n_mels):
        lo, mid, hi = edges[i], edges[i + 1], edges[i + 2]
        rise = (freqs - lo) / (mid - lo)
        fall = (hi - freqs) / (hi - mid)
        bank[i] = np.maximum(0.0, np.minimum(rise, fall))
        peak = bank[i].max()
        if peak <= 0.0:
            raise ValueError(f"mel filter {i} covers no FFT bin; raise fft_size or lower n_mels")
        bank[i] /= peak
    return bank


def mfcc(frame: np.ndarray, bank: np.ndarray, cfg: FrameConfig = FrameConfig()) -> np.ndarray:
    """Feature vector(s) for windowed frame(s).

    Works on a single frame or a stack of frames along the leading axis.
    The first ``n_ceps`` entries skip the DC cepstral term; the last entry
    is the log energy of the windowed frame.
    """
    frame = np.asarray(frame, dtype=float)
    spec = power_spectrum(frame, cfg.fft_size)
    log_mel = np.log(spec @ bank.T + LOG_FLOOR)
    ceps = scipy.fft.dct(log_mel, type=2, norm="ortho", axis=-1)[..., 1 : cfg.n_ceps + 1]
    energy = np.log(np.sum(frame**2, axis=-1) + LOG_FLOOR)
    return np.concatenate([ceps, np.asarray(energy)[..., None]], axis=-1)


def signal_features(signal: AudioSignal, cfg: FrameConfig = FrameConfig(), bank=None) -> np.ndarray:
    """MFCC matrix of shape (n_frames, n_ceps + 1) for a whole signal."""
    if bank is None:
        bank = mel_filterbank(cfg, signal.rate)
    return mfcc(frame_signal(signal, cfg), bank, cfg)


def extract_sequence(
    signal: AudioSignal,
    segments: Sequence[Tuple[int, int, str]],
    cfg: FrameConfig = FrameConfig(),
    source: str = "",
) -> Tuple[List[FeatureSequence], int]:
    """One FeatureSequence per labelled segment.

    Frames never cross segment borders. Segments too short for a single
    frame are dropped; the second return value counts them.
    """
    bank = mel_filterbank(cfg, signal.rate)
    out, skipped = [], 0
    n = len(signal)
    for start, end, label in segments:
        if not (0 <= start < end <= n):
            raise IndexError(f"segment [{start}, {end}) outside signal of {n} samples")
        piece = AudioSignal(signal.samples[start:end], signal.rate)
        if end - start < cfg.frame_samples(signal.rate):
            skipped += 1
            continue
        feats = signal_features(piece, cfg, bank)
        out.append(FeatureSequence(feats, label, f"{source}:{start}-{end}"))
    return out, skipped


def read_wav(path) -> AudioSignal:
    """Read a mono 16-bit PCM WAV file sampled at 16 kHz."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as fh:
            channels, width, rate = fh.getnchannels(), fh.getsampwidth(), fh.getframerate()
            raw = fh.readframes(fh.getnframes())
    except (wave.Error, EOFError) as exc:
        raise ParseError(f"not a PCM WAV file ({exc})", path) from exc
    if channels != 1 or width != 2 or rate != 16000:
        raise ParseError(
            f"expected mono 16-bit 16000 Hz, got {channels} ch / {8 * width} bit / {rate} Hz", path
        )
    return AudioSignal(np.frombuffer(raw, dtype="<i2").astype(np.int16), rate)


def write_wav(path, signal: AudioSignal) -> None:
    samples = np.asarray(signal.samples)
    if samples.dtype != np.int16:
        samples = np.clip(np.round(samples), -32768, 32767).astype(np.int16)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(signal.rate)
        fh.writeframes(samples.astype("<i2").tobytes())


def read_segments(path) -> List[Tuple[int, int, str]]:
    """Parse a ``start end label`` segment file (TIMIT .phn layout)."""
    segments = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise ParseError(f"expected 'start end label', got {line.strip()!r}", path, lineno)
            try:
                start, end = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"non-integer sample index in {line.strip()!r}", path, lineno) from None
            if start >= end:
                raise ParseError(f"segment start {start} >= end {end}", path, lineno)
            segments.append((start, end, parts[2]))
    return segments


def write_segments(path, segments) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for start, end, label in segments:
            fh.write(f"{start} {end} {label}\n")
