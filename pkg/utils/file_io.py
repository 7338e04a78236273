# utils/file_io.py
import hashlib
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Union

import numpy as np

from config.pipeline_defaults import FLOAT_DIGITS

PathLike = Union[str, Path]


def round_number(value: float) -> float:
    """Round to the fixed number of significant digits used in every output."""
    return float(format(value, f".{FLOAT_DIGITS}g"))


def round_outward(value: float, direction: int) -> float:
    """Nearest output-precision value at or beyond ``value`` (direction -1 below, +1 above)."""
    r = round_number(value)
    if (r - value) * direction >= 0:
        return r
    step = 10.0 ** (math.floor(math.log10(abs(r))) - (FLOAT_DIGITS - 1))
    return round_number(r + direction * step)


round_array = np.vectorize(round_number, otypes=[float])


def format_number(value: float) -> str:
    return repr(round_number(value)) if isinstance(value, float) else str(value)


def write_text_atomic(path: PathLike, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with tempfile.NamedTemporaryFile(
        mode="w",
        dir=path.parent,
        delete=False,
        suffix=".tmp",
        encoding="utf-8",
        newline="\n",
    ) as tmp:
        tmp.write(text)
        tmp_path = tmp.name

    # Atomic rename (POSIX guarantee)
    os.replace(tmp_path, path)


def dumps_json(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json_atomic(path: PathLike, data: Any) -> None:
    write_text_atomic(path, dumps_json(data))


def load_json(path: PathLike) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def file_digest(path: PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()
