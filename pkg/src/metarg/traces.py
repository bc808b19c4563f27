"""Line-oriented serialization shared by trace files and the wire protocol.

One JSON object per line, UTF-8.  Floats are rendered with 17 significant
digits (always keeping a decimal point or exponent), which round-trips
IEEE doubles bit-exactly; serialize(parse(line)) reproduces the line
byte-for-byte.
"""

from __future__ import annotations

import json
from typing import Any, Iterable, Iterator

import numpy as np

from .errors import MalformedTraceError

ENGINE_VERSION = "0.1.0"


def format_float(x: float) -> str:
    s = f"{x:.17g}"
    if "e" not in s and "E" not in s and "." not in s and "n" not in s and "i" not in s:
        s += ".0"
    return s


def dumps(obj: Any) -> str:
    """Serialize one message/record to a single JSON line (no newline)."""
    out: list[str] = []
    _write(obj, out)
    return "".join(out)


def _write(obj: Any, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(",")
            out.append(json.dumps(str(k)))
            out.append(":")
            _write(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)) or isinstance(obj, np.ndarray):
        out.append("[")
        items = obj.tolist() if isinstance(obj, np.ndarray) else obj
        for i, v in enumerate(items):
            if i:
                out.append(",")
            _write(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def loads(line: str) -> dict:
    return json.loads(line)


def header_line(config: dict) -> str:
    return dumps({"type": "header", "engine": ENGINE_VERSION, "config": config})


class TraceWriter:
    """Append-only trace sink; one header, then one record per line."""

    def __init__(self, path: str):
        self._fh = open(path, "w", encoding="utf-8", newline="\n")

    def write_header(self, config: dict) -> None:
        self._fh.write(header_line(config) + "\n")

    def write_line(self, line: str) -> None:
        self._fh.write(line + "\n")

    def write_record(self, record: dict) -> None:
        self._fh.write(dumps(record) + "\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "TraceWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_trace(path: str) -> Iterator[tuple[int, dict]]:
    """Yield (line number, parsed object) pairs from a trace file."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as err:
                raise MalformedTraceError(lineno, f"invalid JSON ({err.msg})") from err


def iter_lines(path: str) -> Iterable[str]:
    with open(path, encoding="utf-8") as fh:
        yield from fh
