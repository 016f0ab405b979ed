"""Reports: per-claim verdicts, curves and ledgers, written as JSON plus CSV sidecars.

``report.json`` holds nothing that varies between identical runs; wall-clock
time goes to ``timing.json`` so reports compare byte-for-byte.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .. import storage

PASS, FAIL, ADVISORY = "pass", "fail", "advisory"


@dataclass
class Claim:
    name: str
    verdict: str
    operation: str
    tolerance: str
    observed: Any = None
    expected: Any = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {k: _clean(v) for k, v in self.__dict__.items()}


@dataclass
class Curve:
    name: str
    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    bound: np.ndarray | None = None


@dataclass
class Report:
    experiment: str
    config: dict
    claims: list[Claim] = field(default_factory=list)
    curves: list[Curve] = field(default_factory=list)
    distances: list[tuple] = field(default_factory=list)  # (name, rows)
    residuals: list[tuple] = field(default_factory=list)  # (name, ResidualTable)
    ledger: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    versions: dict = field(default_factory=dict)
    wall_clock: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.verdict != FAIL for c in self.claims)

    @property
    def failed_claims(self) -> list[str]:
        return [f"{self.experiment}:{c.name}" for c in self.claims if c.verdict == FAIL]

    def add(self, claim: Claim) -> Claim:
        self.claims.append(claim)
        return claim

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "status": PASS if self.passed else FAIL,
            "config": _clean(self.config),
            "claims": [c.to_dict() for c in self.claims],
            "curves": {c.name: f"{c.name}.csv" for c in self.curves},
            "distances": {name: f"{name}.csv" for name, _ in self.distances},
            "residuals": {name: f"{name}.csv" for name, _ in self.residuals},
            "ledger": _clean(self.ledger),
            "notes": list(self.notes),
            "versions": dict(self.versions),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json())
        (out / "timing.json").write_text(json.dumps({"wall_clock_s": round(self.wall_clock, 3)}) + "\n")
        for c in self.curves:
            storage.write_curve_csv(out / f"{c.name}.csv", c.times, c.values, c.stderr, c.bound)
        for name, rows in self.distances:
            storage.write_distance_csv(out / f"{name}.csv", rows)
        for name, table in self.residuals:
            storage.write_residual_csv(out / f"{name}.csv", table)
        return out


def _clean(x):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def format_report(data: dict) -> str:
    """Human-readable summary of a stored report dictionary."""
    lines = [f"experiment: {data['experiment']}  status: {data['status']}"]
    cfg = data.get("config", {})
    exp = cfg.get("experiment", {})
    n_paths = cfg.get("resolved", {}).get("n_paths")
    lines.append(f"seed: {exp.get('seed')}  preset: {exp.get('preset')}  n_paths: {n_paths}")
    for c in data.get("claims", []):
        lines.append(f"  [{c['verdict']:>8}] {c['name']}: observed={_short(c['observed'])} "
                     f"expected={_short(c['expected'])} ({c['tolerance']})")
    for n in data.get("notes", []):
        lines.append(f"  note: {n}")
    return "\n".join(lines)


def _short(x):
    if isinstance(x, float):
        return f"{x:.6g}"
    if isinstance(x, list) and len(x) > 4:
        return f"[{len(x)} values]"
    return x


@dataclass
class SuiteResult:
    reports: list[Report]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    @property
    def failed_claims(self) -> list[str]:
        return [name for r in self.reports for name in r.failed_claims]

    def to_dict(self) -> dict:
        return {
            "status": PASS if self.passed else FAIL,
            "experiments": [{"experiment": r.experiment, "status": PASS if r.passed else FAIL} for r in self.reports],
            "failed_claims": self.failed_claims,
        }

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i, r in enumerate(self.reports):
            r.write(out / f"{i:02d}-{r.experiment}")
        (out / "suite.json").write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n")
        return out
