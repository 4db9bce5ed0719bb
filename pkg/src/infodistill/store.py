"""Append-only JSON Lines record store with a sidecar manifest.

Each line is a full record snapshot keyed by ``id``; later snapshots of the
same id supersede earlier ones (stages never rewrite lines, they append).
The manifest tracks the config digest, per-stage watermarks and run stats,
which is what makes stages resumable and idempotent.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Iterable, Iterator

RECORDS_FILE = "records.jsonl"
MANIFEST_FILE = "manifest.json"


class Store:
    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.records_path = self.root / RECORDS_FILE
        self.manifest_path = self.root / MANIFEST_FILE

    # -- records -------------------------------------------------------------

    def append_records(self, records: Iterable[dict]) -> int:
        """Append snapshots in the given order; returns the number written.

        The single writer appends and flushes line by line so an interrupted
        run leaves a valid prefix behind.
        """
        written = 0
        with open(self.records_path, "a", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
                written += 1
            fh.flush()
            os.fsync(fh.fileno())
        return written

    def iter_lines(self) -> Iterator[dict]:
        if not self.records_path.exists():
            return
        with open(self.records_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield json.loads(line)

    def view(self) -> dict[int, dict]:
        """Latest snapshot per id, keyed and iterable in id order."""
        latest: dict[int, dict] = {}
        for rec in self.iter_lines():
            latest[rec["id"]] = rec
        return dict(sorted(latest.items()))

    def stage_records(self, stage: str) -> list[dict]:
        return [rec for rec in self.view().values() if rec["stage"] == stage]

    def max_id(self) -> int:
        ids = [rec["id"] for rec in self.iter_lines()]
        return max(ids) if ids else -1

    # -- manifest --------------------------------------------------------------

    def load_manifest(self) -> dict:
        if not self.manifest_path.exists():
            return {"stages": {}}
        with open(self.manifest_path, encoding="utf-8") as fh:
            return json.load(fh)

    def save_manifest(self, manifest: dict) -> None:
        tmp = self.manifest_path.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, self.manifest_path)

    def stage_done(self, key: str) -> bool:
        return key in self.load_manifest()["stages"]

    def record_stage(self, key: str, info: dict) -> None:
        manifest = self.load_manifest()
        manifest["stages"][key] = info
        self.save_manifest(manifest)

    def manifest_digest(self) -> str:
        if not self.manifest_path.exists():
            return ""
        return hashlib.sha256(self.manifest_path.read_bytes()).hexdigest()


def file_digest(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
