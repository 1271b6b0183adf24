"""Small shared helpers: seeding, number rendering, JSON/JSONL I/O."""

from __future__ import annotations

import hashlib
import json
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Any, Iterable, Iterator

_SEED_MASK = (1 << 63) - 1


def derive_seed(master_seed: int, name: str) -> int:
    """Derive a stable sub-seed from a master seed and a string key.

    Used to give every scene (or any named unit of work) its own RNG stream so
    results do not depend on processing order or worker count.
    """
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return (int(master_seed) ^ int.from_bytes(digest[:8], "big")) & _SEED_MASK


def render_decimal(value: float, places: int = 2) -> str:
    """Render ``value`` with ``places`` decimals, rounding halves up.

    ``Decimal(repr(value))`` keeps the shortest decimal form of the float, so
    1.035 renders as "1.04" rather than falling into binary round-to-even.
    """
    quantum = Decimal(1).scaleb(-places)
    return str(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP))


def render_count(value: float) -> str:
    """Render an integer-valued quantity without a decimal point.

    Counts are integral by construction, so anything else is a logic error
    upstream and must not be silently rounded away.
    """
    from .errors import SceneQaError

    rounded = round(float(value))
    if abs(float(value) - rounded) > 1e-9:
        raise SceneQaError(f"count value {value!r} is not integral")
    return str(int(rounded))


def stable_json_dumps(obj: Any) -> str:
    """Serialize to JSON with a fixed layout so output files are reproducible."""
    return json.dumps(obj, indent=2, sort_keys=False, ensure_ascii=False)


def write_json(obj: Any, path: str | Path) -> None:
    Path(path).write_text(stable_json_dumps(obj) + "\n", encoding="utf-8")


def read_json(path: str | Path):
    from .errors import MalformedFileError

    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedFileError(f"{path}: {exc}") from exc


def write_jsonl(rows: Iterable[dict], path: str | Path) -> int:
    """Write one compact JSON object per line; returns the number of rows."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=False))
            fh.write("\n")
            n += 1
    return n


def read_jsonl(path: str | Path) -> Iterator[dict]:
    from .errors import MalformedFileError

    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedFileError(f"{path}:{lineno}: {exc}") from exc
