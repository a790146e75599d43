"""CSV curve tables with a '#'-prefixed key/value header block."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path


def _fmt(v) -> str:
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


@dataclass
class CurveTable:
    headers: list[str]
    rows: list[list] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add_row(self, *values) -> None:
        if len(values) != len(self.headers):
            raise ValueError(f"row has {len(values)} values, table has {len(self.headers)} columns")
        self.rows.append(list(values))

    def column(self, name: str) -> list:
        i = self.headers.index(name)
        return [r[i] for r in self.rows]

    def to_csv(self) -> str:
        lines = [f"# {k} = {json.dumps(v, sort_keys=True)}" for k, v in self.meta.items()]
        lines.append(",".join(self.headers))
        lines.extend(",".join(_fmt(v) for v in row) for row in self.rows)
        return "\n".join(lines) + "\n"

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_csv())
        return path

    @classmethod
    def from_csv(cls, text: str) -> "CurveTable":
        meta = {}
        body = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                meta[key.strip()] = json.loads(value)
            elif line.strip():
                body.append(line)
        if not body:
            raise ValueError("curve table has no header row")
        headers = body[0].split(",")
        rows = []
        for line in body[1:]:
            rows.append([float(c) for c in line.split(",")])
        return cls(headers, rows, meta)

    @classmethod
    def read(cls, path) -> "CurveTable":
        return cls.from_csv(Path(path).read_text())
