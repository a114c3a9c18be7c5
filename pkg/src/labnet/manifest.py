"""Run manifest: the JSON audit record written next to every run's outputs.

Serialisation is canonical (sorted keys, two-space indent, trailing newline),
so ``dumps(loads(text)) == text`` for any manifest this module wrote.
"""
import json
from dataclasses import asdict, dataclass, field

from .errors import InvalidArgument


def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def loads(text):
    return json.loads(text)


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    started: str
    finished: str = ""
    records: list = field(default_factory=list)
    result: dict = field(default_factory=dict)

    def __post_init__(self):
        epochs = [r["epoch"] for r in self.records]
        if any(b <= a for a, b in zip(epochs, epochs[1:])):
            raise InvalidArgument(f"manifest records must have increasing epochs, got {epochs}")

    def add(self, record):
        if self.records and record["epoch"] <= self.records[-1]["epoch"]:
            raise InvalidArgument(f"epoch {record['epoch']} does not follow {self.records[-1]['epoch']}")
        self.records.append(record)

    def to_json(self):
        return dumps(asdict(self))

    @classmethod
    def from_json(cls, text):
        return cls(**loads(text))

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def read(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())
