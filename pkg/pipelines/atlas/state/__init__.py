from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Tuple, TypedDict

import numpy as np

from atlas.constellation import Constellation
from atlas.convexity_analysis import ThresholdSet
from atlas.error_engine import Target, parse_target
from atlas.errors import UsageError

COMMANDS = ("analyze", "sweep", "verify", "probe")
PROBES = ("conjecture", "chi2", "jensen", "sphere")
AXIS_ALIASES = {"snr": "snr", "noise": "noise_power", "noise_power": "noise_power"}
MIN_SAMPLES = 1000


@dataclass(frozen=True)
class RunConfig:
    """
    One CLI invocation. Everything except `out` is embedded in every output
    file, so a file's header is enough to reproduce it.
    """

    command: str
    builtin: Optional[str] = None
    file: Optional[str] = None
    auto_normalize: bool = False
    axis: str = "snr"
    grid_min: float = 0.5
    grid_max: float = 16.0
    grid_points: int = 10
    grid_given: bool = False
    log: bool = True
    samples: int = 1_000_000
    seed: int = 2024
    out: str = "runs"
    only: Tuple[str, ...] = ()
    metrics: Tuple[str, ...] = ("ser",)
    probe: Optional[str] = None
    n: Optional[int] = None
    M: Optional[int] = None
    code_seed: int = 0
    target_rate: float = 1e-2
    gamma0: Optional[float] = None
    a: Optional[float] = None
    b: Optional[float] = None
    lam: float = 0.5
    noise_power: Optional[float] = None
    eps: Optional[float] = None

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if self.builtin and self.file:
            raise UsageError("--builtin and --file are mutually exclusive")
        if self.axis not in AXIS_ALIASES:
            raise UsageError(f"unknown axis {self.axis!r}; expected snr or noise")
        object.__setattr__(self, "axis", AXIS_ALIASES[self.axis])
        if self.grid_min <= 0:
            raise UsageError(f"--grid-min must be > 0, got {self.grid_min}")
        if self.grid_points < 1:
            raise UsageError(f"--grid-points must be >= 1, got {self.grid_points}")
        if self.grid_points > 1 and self.grid_max <= self.grid_min:
            raise UsageError("--grid-max must exceed --grid-min")
        if self.samples < MIN_SAMPLES:
            raise UsageError(f"--samples must be >= {MIN_SAMPLES}, got {self.samples}")
        if self.seed < 0:
            raise UsageError(f"--seed must be >= 0, got {self.seed}")
        if self.command == "probe" and self.probe not in PROBES:
            raise UsageError(f"probe kind must be one of {PROBES}, got {self.probe!r}")
        if not 0.0 <= self.lam <= 1.0:
            raise UsageError(f"--lam must lie in [0, 1], got {self.lam}")
        # surface bad metric names before any work starts
        self.targets()

    def grid(self) -> List[float]:
        if self.grid_points == 1:
            return [float(self.grid_min)]
        if self.log:
            values = np.geomspace(self.grid_min, self.grid_max, self.grid_points)
        else:
            values = np.linspace(self.grid_min, self.grid_max, self.grid_points)
        return [float(v) for v in values]

    def targets(self) -> List[Tuple[str, Target, bool]]:
        """(metric name, target, is_curvature) for every requested metric."""
        out = []
        for name in self.metrics:
            curvature = name.startswith("d2:")
            out.append((name, parse_target(name[3:] if curvature else name), curvature))
        return out

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data.pop("out")
        data["only"] = list(self.only)
        data["metrics"] = list(self.metrics)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any], out: str = "runs") -> "RunConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        for key in ("only", "metrics"):
            if key in known:
                known[key] = tuple(known[key])
        return cls(out=out, **known)


class AnalyzeState(TypedDict, total=False):
    config: RunConfig
    constellation: Constellation
    thresholds: ThresholdSet
    geometry: List[Dict[str, Any]]
    summary_lines: List[str]
    files: List[str]


class SweepState(TypedDict, total=False):
    config: RunConfig
    constellation: Constellation
    metric_names: List[str]
    idx: int
    current_metric: Optional[str]
    results: List[Dict[str, Any]]
    files: List[str]


class VerifyState(TypedDict, total=False):
    config: RunConfig
    check_names: List[str]
    idx: int
    current_check: Optional[str]
    results: List[Dict[str, Any]]
    files: List[str]
    passed: bool


class ProbeState(TypedDict, total=False):
    config: RunConfig
    constellation: Optional[Constellation]
    report: Dict[str, Any]
    files: List[str]
    errors: Dict[str, str]


__all__ = [
    "AXIS_ALIASES",
    "COMMANDS",
    "PROBES",
    "RunConfig",
    "AnalyzeState",
    "SweepState",
    "VerifyState",
    "ProbeState",
]
