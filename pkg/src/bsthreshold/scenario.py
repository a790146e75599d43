"""JSON scenario files: an AdvantageScenario plus photon range, sources and
output directory. Unknown keys are rejected so typos never pass silently."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .advantage import AdvantageScenario
from .distinguishability import DecayModel

_EXTRA_KEYS = ("n_min", "n_max", "sources", "out_dir")
_SOURCE_KEYS = {"name", "kind", "V0", "rate"}
META_PREFIX = "scenario."


def _default_sources():
    return [DecayModel("uniform", 0.96, 0.0, "present")]


@dataclass
class ScenarioFile:
    scenario: AdvantageScenario = field(default_factory=AdvantageScenario)
    n_min: int = 2
    n_max: int = 120
    sources: list[DecayModel] = field(default_factory=_default_sources)
    out_dir: str | None = None

    def __post_init__(self):
        if not (isinstance(self.n_min, int) and isinstance(self.n_max, int)):
            raise ValueError("n_min and n_max must be integers")
        if self.n_min < 2 or self.n_max < self.n_min:
            raise ValueError(f"invalid photon range [{self.n_min}, {self.n_max}]")
        if not self.sources:
            raise ValueError("at least one photon source is required")

    @property
    def n_values(self) -> list[int]:
        return list(range(self.n_min, self.n_max + 1))

    def to_dict(self) -> dict:
        d = self.scenario.to_dict()
        d["n_min"] = self.n_min
        d["n_max"] = self.n_max
        d["sources"] = [
            {"name": s.label, "kind": s.kind, "V0": s.V0, "rate": s.rate} for s in self.sources
        ]
        d["out_dir"] = self.out_dir
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioFile":
        if not isinstance(data, dict):
            raise ValueError("scenario document must be a JSON object")
        scenario_keys = {f.name for f in fields(AdvantageScenario)}
        unknown = sorted(set(data) - scenario_keys - set(_EXTRA_KEYS))
        if unknown:
            raise ValueError(f"unknown scenario keys: {', '.join(unknown)}")
        kwargs = {k: data[k] for k in ("n_min", "n_max", "out_dir") if k in data}
        try:
            scenario = AdvantageScenario.from_dict(
                {k: v for k, v in data.items() if k in scenario_keys}
            )
            if "sources" in data:
                kwargs["sources"] = [_source_from_dict(s) for s in data["sources"]]
            return cls(scenario, **kwargs)
        except TypeError as exc:
            raise ValueError(f"scenario value has the wrong type: {exc}") from exc

    @classmethod
    def load(cls, path) -> "ScenarioFile":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)

    def meta(self) -> dict:
        # out_dir is where a table is written, not part of what it contains
        return {META_PREFIX + k: v for k, v in self.to_dict().items() if k != "out_dir"}

    @classmethod
    def from_meta(cls, meta: dict) -> "ScenarioFile":
        return cls.from_dict(
            {k[len(META_PREFIX):]: v for k, v in meta.items() if k.startswith(META_PREFIX)}
        )


def _source_from_dict(d) -> DecayModel:
    if not isinstance(d, dict):
        raise ValueError(f"source entry must be an object, got {d!r}")
    unknown = sorted(set(d) - _SOURCE_KEYS)
    if unknown:
        raise ValueError(f"unknown source keys: {', '.join(unknown)}")
    return DecayModel(d.get("kind", "uniform"), d.get("V0", 1.0), d.get("rate", 0.0), d.get("name", ""))
