"""Load and validate solver stats CSV files.

A stats file carries '#'-prefixed 'key: value' metadata comments, one header
row with a fixed column set, and one row per time step. Empty cells mark
undefined statistics and become NaN so plotted curves break instead of
dropping to zero.
"""

from dataclasses import dataclass, field

import numpy as np

REQUIRED_COLUMNS = (
    "t", "kinetic_energy", "enstrophy", "taylor_microscale",
    "turbulence_intensity", "k_avg", "eps", "eps_model",
    "budget_residual", "picard_iters",
)


class SchemaError(ValueError):
    """CSV header does not match the published stats schema."""


@dataclass
class SeriesBundle:
    """One run's parsed time series plus its metadata."""

    label: str
    path: str
    columns: dict
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.columns["t"])

    @property
    def empty(self):
        return len(self) == 0

    def series(self, name):
        if name not in self.columns:
            raise SchemaError(f"{self.path}: no column {name!r}")
        return self.columns[name]

    @property
    def config_hash(self):
        return self.metadata.get("config_hash", "")


def _cell(text):
    text = text.strip()
    return float("nan") if text == "" else float(text)


def load_run(path):
    """Parse one stats CSV into a SeriesBundle; validates the column set."""
    metadata = {}
    header = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if ":" in body:
                    key, value = body.split(":", 1)
                    metadata[key.strip()] = value.strip()
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                continue
            rows.append(line.split(","))
    if header is None:
        raise SchemaError(f"{path}: no header row found")
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing column {missing[0]!r}")
    columns = {}
    for j, name in enumerate(header):
        columns[name] = np.array([_cell(r[j]) for r in rows], dtype=float)
    label = metadata.get("label") or metadata.get("closure") or str(path)
    return SeriesBundle(label=label, path=str(path), columns=columns, metadata=metadata)


def load_runs(paths):
    """Load several runs; header-only files yield empty bundles."""
    return [load_run(p) for p in paths]
