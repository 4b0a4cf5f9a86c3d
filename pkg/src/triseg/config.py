"""key = value run configuration files.

Lines hold one `key = value` pair each; blank lines and `#` comments are
skipped. Unknown keys fail loudly rather than being ignored, since a typo
silently falling back to a default is the worst failure mode a config file
can have. Command-line flags override file values.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ConfigurationError


def parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigurationError(f"expected a boolean, got {text!r}")


def parse_dims(text: str) -> tuple[int, int, int]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 3:
        raise ConfigurationError(f"dims need three integers, got {text!r}")
    return tuple(int(p) for p in parts)


def parse_weights(text: str) -> tuple[float, ...]:
    parts = [p for p in text.replace(",", " ").split() if p]
    return tuple(float(p) for p in parts)


KNOWN_KEYS = {
    "seed": int,
    "n": int,
    "dims": parse_dims,
    "distractors": int,
    "epochs": int,
    "batch_size": int,
    "lr": float,
    "momentum": float,
    "decay_epoch": int,
    "decay_factor": float,
    "patch_size": int,
    "crop_size": int,
    "steps_per_epoch": int,
    "base_width": int,
    "e2d": parse_bool,
    "residual": parse_bool,
    "augment": parse_bool,
    "ths": float,
    "keep": int,
    "weights": parse_weights,
}


def load_config_file(path: str | Path) -> dict:
    """Parse a config file into typed values, rejecting unknown keys."""
    path = Path(path)
    out: dict = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(
                f"{path}:{lineno}: expected 'key = value', got {raw!r}"
            )
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigurationError(
                f"{path}:{lineno}: unknown key {key!r}; known keys: "
                f"{', '.join(sorted(KNOWN_KEYS))}"
            )
        try:
            out[key] = KNOWN_KEYS[key](value)
        except ConfigurationError:
            raise
        except ValueError as exc:
            raise ConfigurationError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


def resolve(flag_value, file_config: dict, key: str, default):
    """Flag beats file beats default; flags use None as 'not given'."""
    if flag_value is not None:
        return flag_value
    if key in file_config:
        return file_config[key]
    return default
