"""Export manifest: every exported artifact maps to one named figure analogue.

The manifest is a JSON list of {export, analogue, command} entries written
next to the exports; `check_manifest` verifies a one-to-one correspondence
between entries and the files actually present.
"""

from __future__ import annotations

import json
from pathlib import Path

MANIFEST_NAME = "manifest.json"


def write_manifest(export_dir, entries: list[dict]) -> Path:
    path = Path(export_dir) / MANIFEST_NAME
    for entry in entries:
        missing = {"export", "analogue", "command"} - set(entry)
        if missing:
            raise ValueError(f"manifest entry {entry} lacks fields {sorted(missing)}")
    path.write_text(json.dumps(entries, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_manifest(export_dir) -> list[dict]:
    return json.loads((Path(export_dir) / MANIFEST_NAME).read_text(encoding="utf-8"))


def check_manifest(entries: list[dict], export_dir) -> list[str]:
    """Mismatches between manifest entries and files on disk; empty means ok."""
    export_dir = Path(export_dir)
    problems = []
    seen = set()
    for entry in entries:
        name = entry["export"]
        if name in seen:
            problems.append(f"duplicate: {name}")
        seen.add(name)
        if not (export_dir / name).is_file():
            problems.append(f"missing: {name}")
    on_disk = {p.name for p in export_dir.iterdir() if p.is_file() and p.name != MANIFEST_NAME}
    for name in sorted(on_disk - seen):
        problems.append(f"extra: {name}")
    return problems
