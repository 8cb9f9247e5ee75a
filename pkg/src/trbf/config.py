"""Run configuration: flat ``section.key: value`` files.

Every key defaults to the toolkit default (window of 5 frames, receptive
field 1, error threshold 0.1, 16x16 map, 60 blocks). Bare keys such as
``Nde`` are accepted when they name exactly one known key; matching is
case-insensitive.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Any, Dict

import yaml

from .core import NetConfig
from .dataset import DEFAULT_FORMANTS, SynthConfig
from .errors import ParseError
from .features import FrameConfig
from .ols import TrainConfig
from .quantizer import SomConfig

_NONE = object()


def _defaults() -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for name, obj in (("frame", FrameConfig()), ("som", SomConfig()), ("train", TrainConfig()), ("synth", SynthConfig())):
        for f in fields(obj):
            if name in ("som", "train", "synth") and f.name == "seed":
                continue
            value = getattr(obj, f.name)
            out[f"{name}.{f.name}"] = list(value) if isinstance(value, tuple) else value
    out["synth.formants"] = {k: list(v) for k, v in DEFAULT_FORMANTS.items()}
    out["som.min_hits"] = 1
    out["net.nfe"] = NetConfig().nfe
    out["net.nde"] = NetConfig().nde
    out["net.sigma"] = NetConfig().sigma
    out["sweep.delays"] = [5, 4, 3, 2]
    out["sweep.sigmas"] = [0.01, 0.02, 0.03, 0.035, 0.04, 0.05]
    out["seed"] = 0
    return out


DEFAULTS = _defaults()
_OPTIONAL = {"som.radius0"}


def _canonical_key(key: str) -> str:
    low = str(key).lower()
    exact = [k for k in DEFAULTS if k.lower() == low]
    if exact:
        return exact[0]
    bare = [k for k in DEFAULTS if k.rsplit(".", 1)[-1].lower() == low]
    if len(bare) == 1:
        return bare[0]
    if len(bare) > 1:
        raise ParseError(f"key {key!r} is ambiguous; use one of {', '.join(bare)}")
    raise ParseError(f"unknown config key {key!r}")


def _coerce(key: str, value):
    default = DEFAULTS[key]
    if value is None:
        if key in _OPTIONAL:
            return None
        raise ParseError(f"{key}: a value is required")
    if key in _OPTIONAL and default is None:
        default = 0.0
    if isinstance(default, bool) or isinstance(value, bool):
        raise ParseError(f"{key}: booleans are not accepted")
    if isinstance(default, int):
        if not isinstance(value, int):
            raise ParseError(f"{key}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if not isinstance(value, (int, float)):
            raise ParseError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ParseError(f"{key}: expected a list of numbers, got {value!r}")
        if default and all(isinstance(v, int) for v in default):
            if not all(isinstance(v, int) for v in value):
                raise ParseError(f"{key}: expected a list of integers")
            return list(value)
        if len(default) == 2 and len(value) != 2:
            raise ParseError(f"{key}: expected [low, high]")
        return [float(v) for v in value]
    if isinstance(default, dict):
        if not isinstance(value, dict) or not value:
            raise ParseError(f"{key}: expected a non-empty mapping of label -> [F1, F2]")
        out = {}
        for lab, pair in value.items():
            if not isinstance(pair, list) or len(pair) != 2:
                raise ParseError(f"{key}: {lab} needs [F1, F2]")
            out[str(lab)] = [float(v) for v in pair]
        return out
    raise ParseError(f"{key}: unsupported value {value!r}")


@dataclass
class RunConfig:
    values: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULTS))

    def __getitem__(self, key):
        return self.values[_canonical_key(key)]

    def frame_config(self) -> FrameConfig:
        v = self.values
        return FrameConfig(v["frame.frame_len"], v["frame.hop"], v["frame.fft_size"], v["frame.n_mels"], v["frame.n_ceps"])

    def som_config(self, seed=None) -> SomConfig:
        v = self.values
        return SomConfig(
            v["som.rows"], v["som.cols"], v["som.epochs"], v["som.alpha0"], v["som.radius0"],
            self.values["seed"] if seed is None else seed,
        )

    def net_config(self, n=None) -> NetConfig:
        v = self.values
        if n is None:
            n = v["frame.n_ceps"] + 1
        return NetConfig(n=n, nfe=v["net.nfe"], nde=v["net.nde"], sigma=v["net.sigma"])

    def train_config(self) -> TrainConfig:
        v = self.values
        return TrainConfig(v["train.epsilon"], v["train.max_blocks"], v["train.drop_tol"], v["seed"])

    def synth_config(self, seed=None) -> SynthConfig:
        v = self.values
        return SynthConfig(
            formants={k: tuple(p) for k, p in v["synth.formants"].items()},
            f0_range=tuple(v["synth.f0_range"]),
            duration_range=tuple(v["synth.duration_range"]),
            formant_jitter=v["synth.formant_jitter"],
            bandwidth=v["synth.bandwidth"],
            noise_floor=v["synth.noise_floor"],
            peak_range=tuple(v["synth.peak_range"]),
            n_train=v["synth.n_train"],
            n_test=v["synth.n_test"],
            rate=v["synth.rate"],
            seed=v["seed"] if seed is None else seed,
        )

    def validate(self) -> "RunConfig":
        checks = [
            ("frame", lambda: self.frame_config().validate(self.values["synth.rate"])),
            ("som", lambda: self.som_config().validate()),
            ("net", self.net_config),
            ("train", self.train_config),
            ("synth", lambda: self.synth_config().validate(self.values["frame.frame_len"])),
        ]
        for section, check in checks:
            try:
                check()
            except ValueError as exc:
                raise ParseError(f"{section}: {exc}") from None
        nfe = self.values["net.nfe"]
        for d in self.values["sweep.delays"]:
            if not (1 <= d <= nfe):
                raise ParseError(f"sweep.delays: {d} outside 1..{nfe}")
        if any(s < 0 for s in self.values["sweep.sigmas"]):
            raise ParseError("sweep.sigmas: noise levels must be >= 0")
        if self.values["som.min_hits"] < 0:
            raise ParseError("som.min_hits: must be >= 0")
        return self


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"not a key: value file ({exc})", source) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ParseError("expected one 'key: value' pair per line", source)
    cfg = RunConfig()
    seen = {}
    for key, value in data.items():
        try:
            canon = _canonical_key(key)
            if canon in seen:
                raise ParseError(f"key {key!r} repeats {seen[canon]!r}")
            seen[canon] = key
            cfg.values[canon] = _coerce(canon, value)
        except ParseError as exc:
            raise ParseError(str(exc), source) from None
    try:
        return cfg.validate()
    except ParseError as exc:
        raise ParseError(str(exc), source) from None


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig().validate()
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path))


def dump_config(cfg: RunConfig) -> str:
    """Canonical text form: every key, sorted, one per line."""
    return yaml.safe_dump(dict(sorted(cfg.values.items())), default_flow_style=None, sort_keys=False)
