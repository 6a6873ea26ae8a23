# qcloud-lab/utils/serialization.py - Deterministic File Output

import csv
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from errors import MissingArtifactError

logger = logging.getLogger(__name__)


def dumps_json(data: Any) -> str:
    """Serialize with sorted keys and fixed indentation so equal data gives equal bytes."""
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def write_json(path, data: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(dumps_json(data))
    logger.debug(f"Wrote {path}")
    return path


def read_json(path) -> Any:
    """Read a JSON artifact, raising MissingArtifactError if it is absent."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"Required file not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def write_csv(path, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=list(columns), lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _format_cell(row.get(key)) for key in columns})
    logger.debug(f"Wrote {path}")
    return path


def read_csv(path) -> list:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"Required file not found: {path}")
    with open(path, 'r', encoding='utf-8', newline='') as f:
        return list(csv.DictReader(f))


def _format_cell(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    return str(value)
