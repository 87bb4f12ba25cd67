"""Run manifests and CSV emission.

A manifest's hash covers the inputs of a run: command, configuration, consumed
cache hashes, seed and tool version.  Outputs, results and telemetry (wall
clock, peak memory) are stored alongside but excluded, so output files can
carry the hash.
"""

from __future__ import annotations

import json
import resource
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .cache import canonical_json, content_key

TOOL_VERSION = "0.1.0"


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int = 0
    caches: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    tool_version: str = TOOL_VERSION
    telemetry: dict = field(default_factory=dict)
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def record_cache(self, name: str, digest: str) -> None:
        self.caches[name] = digest

    def deterministic(self) -> dict:
        return {"command": self.command, "config": self.config, "seed": self.seed, "caches": self.caches,
                "tool_version": self.tool_version}

    @property
    def hash(self) -> str:
        return content_key(self.deterministic())

    def finish(self) -> None:
        peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
        scale = 1 if sys.platform == "darwin" else 1024  # bytes on macOS, KiB on Linux
        self.telemetry = {"wall_seconds": round(time.perf_counter() - self._t0, 3),
                          "peak_memory_mb": round(peak * scale / 2**20, 1)}

    def write(self, out_dir) -> Path:
        """Write ``manifest-<hash>.json`` once (never rewritten) and append to
        ``manifests.log``."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        if not self.telemetry:
            self.finish()
        h = self.hash
        path = out_dir / f"manifest-{h[:16]}.json"
        if not path.exists():
            body = dict(self.deterministic(), hash=h, outputs=sorted(self.outputs), results=self.extra,
                        telemetry=self.telemetry)
            path.write_text(json.dumps(body, indent=2, sort_keys=True, default=str) + "\n")
        with open(out_dir / "manifests.log", "a") as fh:
            fh.write(canonical_json({"hash": h, "command": self.command, "telemetry": self.telemetry}) + "\n")
        return path


def write_csv(path, header: list[str], rows, manifest_hash: str) -> None:
    """CSV with a leading ``# manifest: <hash>`` comment and a header row.

    Floats are written with 17 significant digits so reruns are byte-identical.
    """
    def fmt(v):
        if isinstance(v, float):
            return "" if v != v else format(v, ".17g")
        if isinstance(v, bool):
            return str(int(v))
        return str(v)
    with open(path, "w") as fh:
        fh.write(f"# manifest: {manifest_hash}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
