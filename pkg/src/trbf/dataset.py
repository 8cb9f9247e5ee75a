"""Corpus ingestion, fixed-length tokens and a synthetic six-vowel corpus."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import lfilter

from .errors import EmptyInputError
from .features import (
    AudioSignal,
    FeatureSequence,
    FrameConfig,
    extract_sequence,
    mel_filterbank,
    read_segments,
    read_wav,
    signal_features,
)

log = logging.getLogger(__name__)

VOWELS = ("ah", "aw", "ax", "ax-h", "uh", "uw")

# TIMIT vowel subset sizes (train, test); documentation only, the corpus is not shipped.
TIMIT_SUBSET_COUNTS = {
    "ah": (2200, 879),
    "aw": (700, 216),
    "ax": (3352, 1323),
    "ax-h": (281, 95),
    "uh": (502, 221),
    "uw": (536, 170),
}

DEFAULT_FORMANTS = {
    "ah": (850.0, 1250.0),
    "aw": (650.0, 950.0),
    "ax": (550.0, 1600.0),
    "ax-h": (420.0, 2100.0),
    "uh": (450.0, 1150.0),
    "uw": (280.0, 850.0),
}


@dataclass
class CorpusIndex:
    entries: List[Tuple[str, str]] = field(default_factory=list)
    labels: Optional[Sequence[str]] = None


def load_corpus(index: CorpusIndex, cfg: FrameConfig = FrameConfig()) -> Tuple[List[FeatureSequence], Counter]:
    """Feature sequences for every kept segment of every (audio, segments) pair.

    The second value counts skipped segments per label, both filtered-out
    labels and segments too short for one frame.
    """
    keep = None if index.labels is None else set(index.labels)
    sequences: List[FeatureSequence] = []
    skipped: Counter = Counter()
    for audio_path, seg_path in index.entries:
        try:
            signal = read_wav(audio_path)
        except OSError as exc:
            raise OSError(f"{audio_path}: {exc}") from exc
        segments = read_segments(seg_path)
        wanted = []
        for seg in segments:
            if keep is None or seg[2] in keep:
                wanted.append(seg)
            else:
                skipped[seg[2]] += 1
        seqs, _ = extract_sequence(signal, wanted, cfg, source=str(audio_path))
        got = Counter(s.label for s in seqs)
        for lab, total in Counter(s[2] for s in wanted).items():
            skipped[lab] += total - got[lab]
        sequences.extend(seqs)
    return sequences, skipped


def to_token(seq, nfe: int = 5) -> np.ndarray:
    """Resample a frame sequence to exactly ``nfe`` frames by linear interpolation."""
    frames = seq.frames if isinstance(seq, FeatureSequence) else np.atleast_2d(np.asarray(seq, dtype=float))
    T = frames.shape[0]
    if T == 0 or frames.size == 0:
        raise EmptyInputError("cannot build a token from an empty sequence")
    if nfe < 1:
        raise ValueError("nfe must be >= 1")
    if T == nfe:
        return frames.copy()
    if T == 1:
        return np.repeat(frames, nfe, axis=0)
    pos = np.linspace(0.0, T - 1, nfe)
    lo = np.minimum(np.floor(pos).astype(int), T - 2)
    frac = (pos - lo)[:, None]
    return (1.0 - frac) * frames[lo] + frac * frames[lo + 1]


def sequences_to_tokens(sequences: Iterable[FeatureSequence], nfe: int = 5):
    seqs = list(sequences)
    if not seqs:
        return np.zeros((0, nfe, 0)), np.array([], dtype=str)
    return np.stack([to_token(s, nfe) for s in seqs]), np.array([s.label for s in seqs])


@dataclass(frozen=True)
class SynthConfig:
    formants: Dict[str, Tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_FORMANTS))
    f0_range: Tuple[float, float] = (100.0, 140.0)
    duration_range: Tuple[float, float] = (0.08, 0.16)
    formant_jitter: float = 0.08
    bandwidth: float = 80.0
    noise_floor: float = 30.0
    peak_range: Tuple[float, float] = (6000.0, 12000.0)
    n_train: int = 250
    n_test: int = 125
    rate: int = 16000
    seed: int = 0

    def validate(self, frame_len: float = 0.025) -> "SynthConfig":
        if not self.formants:
            raise ValueError("synthetic corpus needs at least one class")
        for cls, (f1, f2) in self.formants.items():
            if not (0 < f1 < f2 < self.rate / 2):
                raise ValueError(f"class {cls}: formants must satisfy 0 < F1 < F2 < rate/2")
        if self.duration_range[0] < frame_len or self.duration_range[1] < self.duration_range[0]:
            raise ValueError("duration range must start at one analysis frame or more")
        if not (0 < self.f0_range[0] <= self.f0_range[1]):
            raise ValueError("f0 range must be positive and ordered")
        if not (0 < self.peak_range[0] <= self.peak_range[1] <= 32767):
            raise ValueError("peak range must lie within 16-bit amplitude")
        if self.n_train < 0 or self.n_test < 0 or self.noise_floor < 0 or self.formant_jitter < 0:
            raise ValueError("counts, noise floor and jitter must be non-negative")
        return self

    @property
    def classes(self) -> List[str]:
        return list(self.formants)


def _resonator(x, freq, bw, rate):
    r = np.exp(-np.pi * bw / rate)
    a1 = 2.0 * r * np.cos(2.0 * np.pi * freq / rate)
    gain = 1.0 - a1 + r * r  # unit gain at DC
    return lfilter([gain], [1.0, -a1, r * r], x)


def synth_vowel(cls: str, cfg: SynthConfig = SynthConfig(), rng=None) -> AudioSignal:
    """One vowel token: impulse train through two cascaded formant resonators.

    Pitch, duration, formant positions and level vary per call; ``rng``
    fixes all of them.
    """
    if cls not in cfg.formants:
        raise ValueError(f"unknown synthetic class {cls!r}; known: {', '.join(cfg.formants)}")
    rng = np.random.default_rng(rng)
    f1, f2 = cfg.formants[cls]
    f1 *= 1.0 + cfg.formant_jitter * rng.standard_normal()
    f2 *= 1.0 + cfg.formant_jitter * rng.standard_normal()
    f0 = rng.uniform(*cfg.f0_range)
    n = int(round(rng.uniform(*cfg.duration_range) * cfg.rate))

    source = np.zeros(n)
    period = cfg.rate / f0
    source[np.round(np.arange(rng.uniform(0, period), n, period)).astype(int).clip(0, n - 1)] = 1.0
    voiced = _resonator(_resonator(source, f1, cfg.bandwidth, cfg.rate), f2, cfg.bandwidth, cfg.rate)
    peak = np.max(np.abs(voiced))
    if peak > 0:
        voiced *= rng.uniform(*cfg.peak_range) / peak
    voiced += cfg.noise_floor * rng.standard_normal(n)
    samples = np.clip(np.round(voiced), -32767, 32767).astype(np.int16)
    return AudioSignal(samples, cfg.rate)


def synth_utterances(cfg: SynthConfig = SynthConfig(), split: str = "train"):
    """Labelled synthetic signals for one split, classes interleaved."""
    cfg.validate()
    count = {"train": cfg.n_train, "test": cfg.n_test}[split]
    rng = np.random.default_rng([cfg.seed, 0 if split == "train" else 1])
    out = []
    for _ in range(count):
        for cls in cfg.classes:
            out.append((synth_vowel(cls, cfg, rng), cls))
    return out


def concatenate(utterances) -> Tuple[AudioSignal, List[Tuple[int, int, str]]]:
    """Join utterances into one signal plus its segment list."""
    pieces, segments, pos = [], [], 0
    rate = utterances[0][0].rate if utterances else 16000
    for sig, label in utterances:
        pieces.append(np.asarray(sig.samples, dtype=np.int16))
        segments.append((pos, pos + len(sig), label))
        pos += len(sig)
    samples = np.concatenate(pieces) if pieces else np.zeros(0, dtype=np.int16)
    return AudioSignal(samples, rate), segments


def synth_tokens(cfg: SynthConfig = SynthConfig(), nfe: int = 5, frame_cfg: FrameConfig = FrameConfig()):
    """``(X_train, y_train, X_test, y_test)`` tokens of the synthetic corpus."""
    bank = mel_filterbank(frame_cfg, cfg.rate)
    out = []
    for split in ("train", "test"):
        utts = synth_utterances(cfg, split)
        X = np.stack([to_token(signal_features(s, frame_cfg, bank), nfe) for s, _ in utts]) if utts else (
            np.zeros((0, nfe, frame_cfg.n_features))
        )
        out.extend([X, np.array([lab for _, lab in utts])])
    return tuple(out)
