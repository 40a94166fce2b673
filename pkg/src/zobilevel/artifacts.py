"""CSV and manifest emission for experiment runs.

All numbers are written with repr (shortest round-trip form, dot decimal
separator), so files are locale-independent and byte-stable for a fixed
seed and build. Wall-clock never appears in CSV output for that reason.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .config import Estimator, ProblemConfig, SearchConfig
from .driver import DartsDiagnostics, LandscapeGrid, SearchTrajectory
from .estimators.gld import GldStep
from .estimators.mgs import MgsDiagnostics
from .estimators.rs import RsEstimate

__all__ = [
    "RunManifest",
    "fmt",
    "trajectory_csv",
    "diagnostics_csv",
    "landscape_text",
    "path_csv",
    "write_artifact",
]


def fmt(x) -> str:
    """Shortest exact decimal form of a float (empty for None)."""
    if x is None:
        return ""
    return repr(float(x))


_DIAG_COLUMNS = {
    Estimator.RS: ("rs_samples_used",),
    Estimator.MGS: ("ess", "esr", "max_weight", "min_weight"),
    Estimator.GLD: ("chosen_radius", "loss_before"),
    Estimator.DARTS1: ("grad_norm",),
    Estimator.DARTS2: ("grad_norm",),
}


def _diagnostic_cells(diag) -> list[str]:
    if isinstance(diag, RsEstimate):
        return [str(diag.samples_used)]
    if isinstance(diag, MgsDiagnostics):
        return [fmt(diag.ess), fmt(diag.esr), fmt(diag.max_weight), fmt(diag.min_weight)]
    if isinstance(diag, GldStep):
        return [fmt(diag.chosen_radius), fmt(diag.loss_before)]
    if isinstance(diag, DartsDiagnostics):
        return [fmt(diag.grad_norm)]
    return []


def trajectory_csv(trajectory: SearchTrajectory) -> str:
    extra = _DIAG_COLUMNS[trajectory.estimator]
    lines = ["iter,val_loss,train_loss,alpha_norm,update_norm," + ",".join(extra)]
    for rec in trajectory.records:
        cells = [
            str(rec.iteration),
            fmt(rec.val_loss),
            fmt(rec.train_loss),
            fmt(float(np.linalg.norm(rec.alpha.values))),
            fmt(float(np.linalg.norm(rec.u_star))),
        ]
        diag_cells = _diagnostic_cells(rec.diagnostics)
        diag_cells += [""] * (len(extra) - len(diag_cells))
        lines.append(",".join(cells + diag_cells))
    return "\n".join(lines) + "\n"


def diagnostics_csv(trajectory: SearchTrajectory) -> str:
    lines = ["iteration,ess,esr,max_weight,min_weight"]
    for rec in trajectory.records:
        if isinstance(rec.diagnostics, MgsDiagnostics):
            d = rec.diagnostics
            lines.append(
                f"{rec.iteration},{fmt(d.ess)},{fmt(d.esr)},{fmt(d.max_weight)},{fmt(d.min_weight)}"
            )
    return "\n".join(lines) + "\n"


def landscape_text(grid: LandscapeGrid, m: int) -> str:
    i, j = grid.argmin_indices
    a, b = grid.argmin_coords
    header = [
        f"# mode={grid.mode}",
        f"# seed={grid.seed}",
        f"# bounds={fmt(grid.bounds[0])},{fmt(grid.bounds[1])}",
        f"# step={fmt(grid.step)}",
        f"# m={m}",
        f"# direction_hash={grid.direction_hash}",
        f"# shape={grid.values.shape[0]}x{grid.values.shape[1]}",
        f"# coords={','.join(fmt(c) for c in grid.a_coords)}",
        f"# argmin_row={i}",
        f"# argmin_col={j}",
        f"# argmin_a={fmt(a)}",
        f"# argmin_b={fmt(b)}",
    ]
    rows = [",".join(fmt(v) for v in row) for row in grid.values]
    return "\n".join(header + rows) + "\n"


def path_csv(path: np.ndarray, val_losses: list[float]) -> str:
    lines = ["iter,a,b,val_loss"]
    for t, ((a, b), v) in enumerate(zip(path, val_losses)):
        lines.append(f"{t},{fmt(a)},{fmt(b)},{fmt(v)}")
    return "\n".join(lines) + "\n"


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    started: str = ""
    finished: str = ""
    artifacts: list[dict] = field(default_factory=list)
    invariant_violations: list[str] = field(default_factory=list)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and not self.invariant_violations

    def add_artifact(self, out_dir: str, name: str, content: str) -> str:
        path = os.path.join(out_dir, name)
        data = content.encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(data)
        self.artifacts.append({"path": name, "sha256": _sha256(data)})
        return path

    def write(self, out_dir: str) -> str:
        payload = dataclasses.asdict(self)
        payload["status"] = "ok" if self.ok else "error"
        path = os.path.join(out_dir, "manifest.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path

    def verify_artifacts(self, out_dir: str) -> list[str]:
        """Check every listed artifact exists and matches its hash."""
        bad = []
        for entry in self.artifacts:
            path = os.path.join(out_dir, entry["path"])
            if not os.path.exists(path):
                bad.append(f"missing artifact {entry['path']}")
                continue
            with open(path, "rb") as fh:
                if _sha256(fh.read()) != entry["sha256"]:
                    bad.append(f"hash mismatch for {entry['path']}")
        return bad


def config_echo(search: SearchConfig, problem: ProblemConfig) -> dict:
    echo = dataclasses.asdict(search)
    echo["estimator"] = search.estimator.value
    echo.update(dataclasses.asdict(problem))
    echo["estimators"] = ",".join(problem.estimators)
    return echo


def write_artifact(out_dir: str, name: str, content: str) -> None:
    with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
        fh.write(content)
