"""Per-epoch run metrics and the versioned CSV schema.

Column order is fixed: epoch,effective_passes,objective,gap,wall_seconds,
updates,max_delay.  Run-level metadata travels in `# key=value` comment
lines before the header; every file round-trips through read_metrics.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

SCHEMA_VERSION = 1
COLUMNS = ("epoch", "effective_passes", "objective", "gap", "wall_seconds",
           "updates", "max_delay")


@dataclass
class MetricRow:
    epoch: int
    effective_passes: float
    objective: float
    gap: float              # f(w_t) - f(w_*); NaN when no reference is known
    wall_seconds: float     # cumulative solver time (excludes parsing/IO)
    updates: int            # cumulative applied updates
    max_delay: int          # largest observed read staleness so far

    def as_csv(self) -> str:
        return (f"{self.epoch},{self.effective_passes!r},{self.objective!r},"
                f"{self.gap!r},{self.wall_seconds!r},{self.updates},{self.max_delay}")


def build_id(header: dict) -> str:
    """Short content hash of the run configuration, git-style."""
    blob = "\n".join(f"{k}={header[k]}" for k in sorted(header))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def write_metrics(target, rows, header: dict = None) -> None:
    stream, owned = (target, False) if hasattr(target, "write") else (open(target, "w"), True)
    try:
        meta = dict(header or {})
        meta.setdefault("schema", SCHEMA_VERSION)
        meta["build_id"] = build_id(meta)
        for key in sorted(meta):
            stream.write(f"# {key}={meta[key]}\n")
        stream.write(",".join(COLUMNS) + "\n")
        for row in rows:
            stream.write(row.as_csv() + "\n")
    finally:
        if owned:
            stream.close()


def read_metrics(source):
    """Parse a metrics CSV back into (rows, header)."""
    stream, owned = (source, False) if hasattr(source, "read") else (open(source, "r"), True)
    header = {}
    rows = []
    try:
        saw_columns = False
        for raw in stream:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                header[key] = value
                continue
            if not saw_columns:
                if tuple(line.split(",")) != COLUMNS:
                    raise ValueError(f"unexpected CSV header {line!r}")
                saw_columns = True
                continue
            parts = line.split(",")
            if len(parts) != len(COLUMNS):
                raise ValueError(f"bad metrics row {line!r}")
            rows.append(MetricRow(
                epoch=int(parts[0]),
                effective_passes=float(parts[1]),
                objective=float(parts[2]),
                gap=float(parts[3]),
                wall_seconds=float(parts[4]),
                updates=int(parts[5]),
                max_delay=int(parts[6]),
            ))
    finally:
        if owned:
            stream.close()
    return rows, header
