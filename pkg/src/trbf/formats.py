"""Text formats for token sets (``TRBF-FEATURES v1``) and models (``TRBF-MODEL v1``).

Floats are written with ``repr`` so every value reloads bit-for-bit.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Tuple

import numpy as np

from .core import HiddenBlock, NetConfig, Stats, TrbfEnsemble, TrbfNetwork
from .errors import ParseError, UnsupportedVersionError

TOKENS_MAGIC = "TRBF-FEATURES"
MODEL_MAGIC = "TRBF-MODEL"
VERSION = "v1"


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(values))


def _check_header(first: str, magic: str, path) -> List[str]:
    parts = first.split()
    if not parts or parts[0] != magic:
        raise ParseError(f"missing {magic} header", path, 1)
    if len(parts) < 2 or parts[1] != VERSION:
        found = parts[1] if len(parts) > 1 else "(none)"
        raise UnsupportedVersionError(f"unsupported {magic} version {found}; this build reads {VERSION}", path, 1)
    return parts[2:]


def save_tokens(path, X, labels) -> None:
    """Write tokens ``(N, nfe, n)`` (or frames ``(N, n)``) with one label per row."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[:, None, :]
    N, nfe, n = X.shape
    labels = [str(lab) for lab in labels]
    if len(labels) != N:
        raise ValueError(f"{N} tokens but {len(labels)} labels")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{TOKENS_MAGIC} {VERSION} dim={nfe * n} nfe={nfe} n={n}\n")
        for lab, tok in zip(labels, X):
            if not lab or any(ch.isspace() for ch in lab):
                raise ValueError(f"label {lab!r} must be a non-empty word")
            fh.write(f"{lab} {_fmt(tok)}\n")


def load_tokens(path) -> Tuple[np.ndarray, np.ndarray]:
    """Read a token file; returns ``(X, labels)`` with ``X`` shaped ``(N, nfe, n)``."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty file", path, 1)
    attrs = {}
    for item in _check_header(lines[0], TOKENS_MAGIC, path):
        key, _, value = item.partition("=")
        try:
            attrs[key] = int(value)
        except ValueError:
            raise ParseError(f"bad header field {item!r}", path, 1) from None
    if "dim" not in attrs:
        raise ParseError("header lacks dim=", path, 1)
    dim = attrs["dim"]
    nfe = attrs.get("nfe", 1)
    n = attrs.get("n", dim // nfe)
    if nfe * n != dim:
        raise ParseError(f"header dim={dim} disagrees with nfe={nfe} x n={n}", path, 1)
    rows, labels = [], []
    for lineno, line in enumerate(lines[1:], 2):
        parts = line.split()
        if not parts:
            continue
        if len(parts) - 1 != dim:
            raise ParseError(f"expected {dim} values after the label, found {len(parts) - 1}", path, lineno)
        try:
            rows.append([float(v) for v in parts[1:]])
        except ValueError:
            raise ParseError("non-numeric value", path, lineno) from None
        labels.append(parts[0])
    X = np.array(rows, dtype=float).reshape(len(rows), nfe, n)
    return X, np.array(labels, dtype=str)


def save_model(path, ens: TrbfEnsemble) -> None:
    cfg = ens.cfg
    out = [
        f"{MODEL_MAGIC} {VERSION}",
        f"n {cfg.n}",
        f"nfe {cfg.nfe}",
        f"nde {cfg.nde}",
        f"sigma {cfg.sigma!r}",
        "kernel gaussian exp(-r^2/(2*sigma^2))",
    ]
    for key in sorted(ens.meta):
        value = str(ens.meta[key])
        if "\n" in value:
            raise ValueError(f"meta value for {key} spans lines")
        out.append(f"meta {key} {value}")
    out.append("classes " + " ".join(ens.classes))
    out.append("mean " + _fmt(ens.stats.mean))
    out.append("std " + _fmt(ens.stats.std))
    for net in ens.networks:
        out.append(f"network {net.class_id} {len(net.blocks)}")
        for block in net.blocks:
            out.append(f"block {block.source_id or '-'}")
            out.extend(_fmt(c) for c in block.centers)
        out.append("theta " + _fmt(net.weights))
    out.append("end")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


class _Lines:
    def __init__(self, path):
        self.path = path
        self.lines = Path(path).read_text(encoding="utf-8").splitlines()
        self.pos = 0

    def next(self, what: str) -> str:
        if self.pos >= len(self.lines):
            raise ParseError(f"file truncated, expected {what}", self.path, self.pos + 1)
        self.pos += 1
        return self.lines[self.pos - 1]

    def keyed(self, key: str) -> str:
        line = self.next(f"'{key}'")
        head, _, rest = line.partition(" ")
        if head != key:
            raise ParseError(f"expected '{key}', found {line[:40]!r}", self.path, self.pos)
        return rest

    def floats(self, text: str, count=None) -> np.ndarray:
        try:
            values = np.array([float(v) for v in text.split()])
        except ValueError:
            raise ParseError("non-numeric value", self.path, self.pos) from None
        if count is not None and values.size != count:
            raise ParseError(f"expected {count} values, found {values.size}", self.path, self.pos)
        return values

    def integer(self, text: str) -> int:
        try:
            return int(text)
        except ValueError:
            raise ParseError(f"expected an integer, found {text!r}", self.path, self.pos) from None


def load_model(path) -> TrbfEnsemble:
    src = _Lines(path)
    _check_header(src.next("header"), MODEL_MAGIC, path)
    n = src.integer(src.keyed("n"))
    nfe = src.integer(src.keyed("nfe"))
    nde = src.integer(src.keyed("nde"))
    sigma = float(src.floats(src.keyed("sigma"), 1)[0])
    try:
        cfg = NetConfig(n=n, nfe=nfe, nde=nde, sigma=sigma)
    except ValueError as exc:
        raise ParseError(str(exc), path, src.pos) from None
    kernel = src.keyed("kernel")
    if not kernel.startswith("gaussian"):
        raise ParseError(f"unsupported kernel {kernel!r}", path, src.pos)
    meta = {}
    line = src.next("'classes'")
    while line.startswith("meta "):
        _, key, value = (line.split(" ", 2) + [""])[:3]
        meta[key] = value
        line = src.next("'classes'")
    if not line.startswith("classes "):
        raise ParseError(f"expected 'classes', found {line[:40]!r}", path, src.pos)
    classes = line.split()[1:]
    stats = Stats(src.floats(src.keyed("mean"), n), src.floats(src.keyed("std"), n))
    networks = []
    for cls in classes:
        head = src.keyed("network").split()
        if len(head) != 2 or head[0] != cls:
            raise ParseError(f"expected 'network {cls} <blocks>'", path, src.pos)
        nbc = src.integer(head[1])
        blocks = []
        for _ in range(nbc):
            source = src.keyed("block")
            centers = np.stack([src.floats(src.next("centre values"), cfg.center_dim) for _ in range(cfg.nnc)])
            blocks.append(HiddenBlock(centers, "" if source == "-" else source))
        theta = src.floats(src.keyed("theta"), nbc * cfg.nnc)
        networks.append(TrbfNetwork(cfg, blocks, theta, cls))
    if src.next("'end'").strip() != "end":
        raise ParseError("expected 'end'", path, src.pos)
    return TrbfEnsemble(cfg, networks, stats, classes, meta)
