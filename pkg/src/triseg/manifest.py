"""Dataset manifests: one line per case, `volume mask split` columns.

Paths are stored relative to the manifest file so a dataset directory can be
moved wholesale. Blank lines and `#` comments are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class ManifestEntry:
    volume: Path
    mask: Path
    split: str


def write_manifest(path: str | Path, entries) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    base = path.parent
    lines = ["# volume\tmask\tsplit"]
    for e in entries:
        vol = _relativize(Path(e.volume), base)
        mask = _relativize(Path(e.mask), base)
        lines.append(f"{vol}\t{mask}\t{e.split}")
    path.write_text("\n".join(lines) + "\n")
    return path


def _relativize(p: Path, base: Path) -> str:
    try:
        return p.relative_to(base).as_posix()
    except ValueError:
        return p.as_posix()


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    """Parse a manifest, resolving paths against its directory."""
    path = Path(path)
    base = path.parent
    entries = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 3:
            raise ConfigurationError(
                f"{path}:{lineno}: expected 'volume mask split', got {len(fields)} fields"
            )
        vol, mask, split = fields
        if split not in SPLITS:
            raise ConfigurationError(
                f"{path}:{lineno}: unknown split {split!r}; expected one of {SPLITS}"
            )
        entries.append(
            ManifestEntry(volume=base / vol, mask=base / mask, split=split)
        )
    if not entries:
        raise ConfigurationError(f"{path}: manifest holds no entries")
    return entries


def by_split(entries) -> dict[str, list[ManifestEntry]]:
    out: dict[str, list[ManifestEntry]] = {s: [] for s in SPLITS}
    for e in entries:
        out[e.split].append(e)
    return out
