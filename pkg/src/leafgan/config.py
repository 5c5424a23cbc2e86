"""Flat key-value pipeline configuration.

One file holds every tunable of the pipeline; CLI flags override file
values. Validation happens before any stage runs: unknown keys are
rejected and every numeric field is checked against its documented
range. The effective config is echoed into the run directory so a run
can be reproduced from its own artifacts.
"""

import hashlib
import math
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError


def _positive_int(v) -> bool:
    return isinstance(v, int) and v >= 1


def _nonneg_int(v) -> bool:
    return isinstance(v, int) and v >= 0


def _open_unit(v) -> bool:
    return 0.0 < v < 1.0


def _positive(v) -> bool:
    return math.isfinite(v) and v > 0.0


def _nonneg(v) -> bool:
    return math.isfinite(v) and v >= 0.0


@dataclass
class PipelineConfig:
    seed: int = 0
    image_side: int = 64
    delta: float = 0.35
    lam: float = 10.0
    split_ratio: float = 0.7
    backbone: str = "small_cnn"
    lflseg_epochs: int = 30
    lflseg_batch: int = 128
    lflseg_lr: float = 1e-3
    lflseg_momentum: float = 0.9
    gan_epochs: int = 200
    gan_batch: int = 1
    gan_lr: float = 2e-4
    gan_ngf: int = 64
    gan_ndf: int = 64
    gan_blocks: int = 0  # 0 = pick by image side
    buffer_size: int = 50
    checkpoint_every: int = 5
    identity_loss: bool = False
    composite: bool = False
    eval_epochs: int = 30
    eval_batch: int = 128
    eval_lr: float = 1e-3
    eval_momentum: float = 0.9
    augment_count: int = 717
    data_root: str = ""
    mask_root: str = ""
    checkpoint_root: str = ""
    output_root: str = ""


# key in the file -> (attribute, range check, documented range)
_CHECKS = {
    "seed": (_nonneg_int, ">= 0"),
    "image_side": (lambda v: isinstance(v, int) and v >= 8, ">= 8"),
    "delta": (_open_unit, "in (0, 1)"),
    "lambda": (_nonneg, ">= 0 and finite"),
    "split_ratio": (_open_unit, "in (0, 1)"),
    "backbone": (lambda v: isinstance(v, str) and bool(v), "non-empty"),
    "lflseg_epochs": (_positive_int, ">= 1"),
    "lflseg_batch": (_positive_int, ">= 1"),
    "lflseg_lr": (_positive, "> 0"),
    "lflseg_momentum": (lambda v: 0.0 <= v < 1.0, "in [0, 1)"),
    "gan_epochs": (_positive_int, ">= 1"),
    "gan_batch": (_positive_int, ">= 1"),
    "gan_lr": (_positive, "> 0"),
    "gan_ngf": (_positive_int, ">= 1"),
    "gan_ndf": (_positive_int, ">= 1"),
    "gan_blocks": (_nonneg_int, ">= 0"),
    "buffer_size": (_nonneg_int, ">= 0"),
    "checkpoint_every": (_positive_int, ">= 1"),
    "identity_loss": (lambda v: isinstance(v, bool), "true/false"),
    "composite": (lambda v: isinstance(v, bool), "true/false"),
    "eval_epochs": (_positive_int, ">= 1"),
    "eval_batch": (_positive_int, ">= 1"),
    "eval_lr": (_positive, "> 0"),
    "eval_momentum": (lambda v: 0.0 <= v < 1.0, "in [0, 1)"),
    "augment_count": (_nonneg_int, ">= 0"),
    "data_root": (lambda v: isinstance(v, str), "path"),
    "mask_root": (lambda v: isinstance(v, str), "path"),
    "checkpoint_root": (lambda v: isinstance(v, str), "path"),
    "output_root": (lambda v: isinstance(v, str), "path"),
}

_KEY_TO_ATTR = {key: ("lam" if key == "lambda" else key) for key in _CHECKS}
_ATTR_TO_KEY = {attr: key for key, attr in _KEY_TO_ATTR.items()}


def _parse_value(key: str, raw: str):
    attr = _KEY_TO_ATTR[key]
    default = getattr(PipelineConfig(), attr)
    if isinstance(default, bool):
        lowered = raw.strip().lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if isinstance(default, float):
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    return raw.strip()


def validate_config(cfg: PipelineConfig) -> PipelineConfig:
    for key, (check, doc) in _CHECKS.items():
        value = getattr(cfg, _KEY_TO_ATTR[key])
        try:
            ok = check(value)
        except TypeError:
            ok = False
        if not ok:
            raise ConfigError(f"{key}: value {value!r} out of range (must be {doc})")
    return cfg


def load_config(path: Path | str | None) -> PipelineConfig:
    """Parse a flat key=value file; an empty (or absent) path gives pure
    defaults. Unknown keys and out-of-range values are fatal."""
    cfg = PipelineConfig()
    if path is None:
        return validate_config(cfg)
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _CHECKS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        setattr(cfg, _KEY_TO_ATTR[key], _parse_value(key, raw))
    return validate_config(cfg)


def apply_overrides(cfg: PipelineConfig, overrides: dict) -> PipelineConfig:
    """Layer CLI flag values (already typed) over a config; flags win."""
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _CHECKS:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, _KEY_TO_ATTR[key], value)
    return validate_config(cfg)


def render_config(cfg: PipelineConfig) -> str:
    """Canonical text form; reloading it reproduces the config exactly."""
    lines = []
    for f in fields(cfg):
        key = _ATTR_TO_KEY[f.name]
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: PipelineConfig) -> str:
    return hashlib.sha256(render_config(cfg).encode()).hexdigest()[:12]


def echo_config(cfg: PipelineConfig, run_dir: Path | str) -> Path:
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    out = run_dir / "config.echo.cfg"
    out.write_text(render_config(cfg))
    return out
