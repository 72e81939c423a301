"""JSONL corpus manifests.

One entry per line: {"utt": ..., "spk": ..., "path": ..., "role": ...,
"scenario": ...}. Utterance ids must be unique and every speaker that has a
test entry must also have training material.
"""

import json
from dataclasses import dataclass
from pathlib import Path


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    utt: str
    spk: str
    path: str
    role: str  # "train" | "test"
    scenario: str


@dataclass
class CorpusManifest:
    entries: list

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.utt in seen:
                raise ManifestError(f"duplicate utterance id {e.utt!r}")
            seen.add(e.utt)
            if e.role not in ("train", "test"):
                raise ManifestError(f"{e.utt}: bad role {e.role!r}")
        trained = {e.spk for e in self.entries if e.role == "train"}
        for e in self.entries:
            if e.role == "test" and e.spk not in trained:
                raise ManifestError(
                    f"speaker {e.spk!r} has test material but no training entry")

    def speakers(self):
        return sorted({e.spk for e in self.entries})

    def by_role(self, role):
        return [e for e in self.entries if e.role == role]

    @classmethod
    def load(cls, path) -> "CorpusManifest":
        entries = []
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            entries.append(ManifestEntry(
                d["utt"], d["spk"], d["path"], d["role"], d["scenario"]))
        return cls(entries)

    def save(self, path):
        with open(path, "w") as f:
            for e in self.entries:
                f.write(json.dumps({
                    "utt": e.utt, "spk": e.spk, "path": e.path,
                    "role": e.role, "scenario": e.scenario}) + "\n")
