"""Helpers for writing reproducible output artifacts.

Every artifact carries the resolved run configuration and the dataset hash. JSON
documents hold them as keys; CSV files hold them as ``#`` comment lines ahead of the
header, which `read_csv` skips.
"""

import csv
import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np

__all__ = (
    "sha256_file",
    "sha256_indices",
    "dumps_json",
    "write_json",
    "read_json",
    "write_csv",
    "read_csv",
)

PathLike = Union[str, Path]

_CHUNK = 1 << 16


def sha256_file(path: PathLike) -> str:
    """Return the hex SHA-256 of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as fp:
        for chunk in iter(lambda: fp.read(_CHUNK), b""):
            digest.update(chunk)
    return digest.hexdigest()


def sha256_indices(indices: Iterable[int]) -> str:
    """Return the hex SHA-256 of a comma-joined, sorted index list."""
    text = ",".join(str(i) for i in sorted(int(i) for i in indices))
    return hashlib.sha256(text.encode("ascii")).hexdigest()


def _default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    msg = f"{type(value).__name__} is not JSON serializable"
    raise TypeError(msg)


def dumps_json(document: Mapping[str, Any]) -> str:
    """Serialize with sorted keys and a trailing newline so equal documents are equal bytes."""
    return json.dumps(document, sort_keys=True, indent=2, default=_default) + "\n"


def write_json(path: PathLike, document: Mapping[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(document), encoding="utf-8")
    return path


def read_json(path: PathLike) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_csv(
    path: PathLike,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    *,
    meta: Optional[Mapping[str, Any]] = None,
) -> Path:
    """Write a CSV file, optionally preceded by ``# key=value`` metadata lines.

    Metadata values that are not strings are written as compact, key-sorted JSON.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fp:
        for key, value in (meta or {}).items():
            text = value if isinstance(value, str) else json.dumps(
                value, sort_keys=True, separators=(",", ":"), default=_default
            )
            fp.write(f"# {key}={text}\n")

        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(value) for value in row])
    return path


def _cell(value: Any) -> Any:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, np.floating):
        return repr(float(value))
    return value


def read_csv(path: PathLike) -> List[List[str]]:
    """Read a CSV written by `write_csv`, skipping the metadata lines.

    Returns
    -------
    List[List[str]]
        The header row followed by the data rows.
    """
    with open(path, encoding="utf-8", newline="") as fp:
        lines = [line for line in fp if not line.startswith("#")]
    return list(csv.reader(lines))
