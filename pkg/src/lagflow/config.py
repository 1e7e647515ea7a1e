"""Strict JSON run configuration."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from .torusmap import Shear, shear_from_dict


class ConfigError(ValueError):
    """Invalid configuration; the message starts with ``path:line:``."""


@dataclass(frozen=True)
class RunConfig:
    n: int
    sigma: float
    t_end: float
    c: int
    initial: Any  # list of shear dicts, or a snapshot path
    out_dir: str
    diag_every: int
    snapshot_every: int
    residual_every: int
    seed: int

    def shears(self) -> list[Shear] | None:
        if isinstance(self.initial, str):
            return None
        return [shear_from_dict(d) for d in self.initial]


FIELDS = [f.name for f in fields(RunConfig)]


def _line_of(text: str, key: str) -> int:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}:{e.lineno}:{e.colno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}:1: top level must be a JSON object")

    def fail(key: str, msg: str):
        raise ConfigError(f"{source}:{_line_of(text, key)}: {key}: {msg}")

    for k in doc:
        if k not in FIELDS:
            fail(k, "unknown key")
    missing = [k for k in FIELDS if k not in doc]
    if missing:
        raise ConfigError(f"{source}:1: missing keys: {', '.join(missing)}")

    def integer(k):
        v = doc[k]
        if isinstance(v, bool) or not isinstance(v, int):
            fail(k, f"expected an integer, got {v!r}")
        return v

    def real(k):
        v = doc[k]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            fail(k, f"expected a number, got {v!r}")
        return float(v)

    n = integer("n")
    if n < 8 or n % 2:
        fail("n", "must be even and >= 8")
    sigma = real("sigma")
    if not 0.0 < sigma <= 0.5:
        fail("sigma", "must lie in (0, 0.5]")
    t_end = real("t_end")
    if t_end < 0:
        fail("t_end", "must be nonnegative")
    c = integer("c")
    if c not in (-1, 0, 1):
        fail("c", "must be -1, 0 or 1")
    diag_every = integer("diag_every")
    if diag_every < 1:
        fail("diag_every", "must be >= 1")
    for k in ("snapshot_every", "residual_every"):
        if integer(k) < 0:
            fail(k, "must be >= 0")
    seed = integer("seed")
    if not isinstance(doc["out_dir"], str):
        fail("out_dir", "expected a string")

    initial = doc["initial"]
    if isinstance(initial, list):
        for item in initial:
            if not isinstance(item, dict):
                fail("initial", "each shear must be an object")
            try:
                shear_from_dict(item)
            except (KeyError, TypeError, ValueError) as e:
                fail("initial", f"bad shear {item!r}: {e}")
    elif not isinstance(initial, str):
        fail("initial", "expected a list of shears or a snapshot path")

    return RunConfig(
        n=n, sigma=sigma, t_end=t_end, c=c, initial=initial, out_dir=doc["out_dir"],
        diag_every=diag_every, snapshot_every=doc["snapshot_every"],
        residual_every=doc["residual_every"], seed=seed,
    )


def load_config(path: str | Path) -> RunConfig:
    """Read and validate a config file.

    Relative ``out_dir`` and snapshot paths are resolved against the
    directory containing the config file.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"{path}:0: cannot read config: {e.strerror}") from None
    cfg = parse_config(text, str(path))
    base = path.resolve().parent
    out_dir = str(base / cfg.out_dir)
    initial = str(base / cfg.initial) if isinstance(cfg.initial, str) else cfg.initial
    return RunConfig(**{**cfg.__dict__, "out_dir": out_dir, "initial": initial})
