"""Tab-separated lexicon files shipped in ``nerkit/data``."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..errors import GazetteerError


def parse_tsv(lines, source="<memory>"):
    """Yield ``(token, kind)`` pairs; '#' lines and blank lines are skipped."""
    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise GazetteerError(f"{source}:{lineno}: expected 'phrase<TAB>KIND', got {line!r}")
        yield parts[0].strip(), parts[1].strip()


def data_path(name: str) -> Path:
    return Path(str(resources.files("nerkit") / "data" / name))


def read_lexicon(name_or_path) -> list:
    path = Path(name_or_path)
    if not path.exists():
        path = data_path(str(name_or_path))
    with open(path, encoding="utf-8") as fh:
        return list(parse_tsv(fh, str(path)))
