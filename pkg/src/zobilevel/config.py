"""Search configuration and the flat key=value config file format.

Config files mirror the dataclass field names exactly, one `key=value` per
line; blank lines and lines starting with `#` are ignored. Unknown keys are
an error.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields

__all__ = [
    "Estimator",
    "SearchConfig",
    "ProblemConfig",
    "ConfigError",
    "parse_config_text",
    "load_config",
]


class ConfigError(ValueError):
    """Raised for unknown keys or invalid values in a configuration."""


class Estimator(str, enum.Enum):
    RS = "rs"
    MGS = "mgs"
    GLD = "gld"
    DARTS1 = "darts1"
    DARTS2 = "darts2"


@dataclass
class SearchConfig:
    """All knobs of the outer search loop.

    Defaults for n and m follow the reference setting (4 samples, 10 inner
    iterations); tau/sigma/lambda_mix were tuned on the analytic suite.
    """

    estimator: Estimator = Estimator.MGS
    n: int = 4                     # sampling number per iteration
    m: int = 10                    # inner iterations per candidate
    mu: float = 0.01               # smoothing scale for random-search pairs
    xi: float = 0.3                # outer learning rate
    tau: float = 0.001             # softmin temperature of the update target
    sigma: float = 0.01            # proposal standard deviation
    lambda_mix: float = 0.2        # weight of the zero-centered proposal component
    gld_r: float = 1e-3            # smallest direct-search radius
    gld_R: float = 0.5             # largest direct-search radius
    inner_lr: float = 0.025
    inner_momentum: float = 0.9
    seed: int = 0
    budget: int = 100              # outer iterations
    rs_distribution: str = "gaussian"   # or "sphere"
    samples_per_radius: int = 1
    post_update_inner_steps: int = -1   # -1 means "same as m"
    hvp_scale: float = 0.01
    darts_order: int = 0                # 0 means "derived from estimator"
    xi_cosine_decay: bool = False

    def __post_init__(self):
        if isinstance(self.estimator, str):
            try:
                self.estimator = Estimator(self.estimator.lower())
            except ValueError:
                raise ConfigError(f"unknown estimator '{self.estimator}'")
        if self.n < 1:
            raise ConfigError("n must be a positive integer")
        if self.m < 0:
            raise ConfigError("m must be nonnegative")
        for name in ("mu", "xi", "tau", "sigma", "inner_lr"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be strictly positive")
        if not 0.0 <= self.lambda_mix <= 1.0:
            raise ConfigError("lambda_mix must lie in [0, 1]")
        if not 0.0 < self.gld_r <= self.gld_R:
            raise ConfigError("radii must satisfy 0 < gld_r <= gld_R")
        if not 0.0 <= self.inner_momentum < 1.0:
            raise ConfigError("inner_momentum must lie in [0, 1)")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if self.budget < 0:
            raise ConfigError("budget must be nonnegative")
        if self.rs_distribution not in ("gaussian", "sphere"):
            raise ConfigError("rs_distribution must be 'gaussian' or 'sphere'")
        if self.samples_per_radius < 1:
            raise ConfigError("samples_per_radius must be >= 1")
        if self.hvp_scale <= 0.0:
            raise ConfigError("hvp_scale must be strictly positive")
        if self.darts_order not in (0, 1, 2):
            raise ConfigError("darts_order must be 1 or 2")
        order = {Estimator.DARTS1: 1, Estimator.DARTS2: 2}.get(self.estimator)
        if order is not None:
            if self.darts_order not in (0, order):
                raise ConfigError(
                    f"darts_order={self.darts_order} conflicts with "
                    f"estimator={self.estimator.value}"
                )
            self.darts_order = order

    @property
    def resolved_post_update_steps(self) -> int:
        return self.m if self.post_update_inner_steps < 0 else self.post_update_inner_steps


@dataclass
class ProblemConfig:
    """Problem selection and experiment-level knobs."""

    problem: str = "analytic"       # or "supernet"
    data_seed: int = 0
    d_alpha: int = 2
    d_omega: int = 3
    reg: float = 0.1
    cond: float = 4.0
    nodes: int = 4
    ops_per_edge: int = 4
    batch_size: int = 0             # 0 = full batch
    grid_min: float = -1.0
    grid_max: float = 1.0
    grid_step: float = 0.02
    estimators: tuple[str, ...] = ()   # used by the compare command

    def __post_init__(self):
        if self.problem not in ("analytic", "supernet"):
            raise ConfigError("problem must be 'analytic' or 'supernet'")
        if self.data_seed < 0 or self.data_seed >= 2**64:
            raise ConfigError("data_seed must fit in an unsigned 64-bit integer")
        if self.d_alpha < 1 or self.d_omega < 1:
            raise ConfigError("problem dimensions must be >= 1")
        if self.reg < 0.0:
            raise ConfigError("reg must be nonnegative")
        if self.cond < 1.0:
            raise ConfigError("cond must be >= 1")
        if self.nodes < 1:
            raise ConfigError("nodes must be >= 1")
        if self.ops_per_edge < 2:
            raise ConfigError("ops_per_edge must be >= 2")
        if self.batch_size < 0:
            raise ConfigError("batch_size must be nonnegative")
        if not self.grid_min <= self.grid_max:
            raise ConfigError("grid bounds must be ordered")
        if self.grid_step <= 0.0:
            raise ConfigError("grid_step must be positive")
        if isinstance(self.estimators, str):
            parts = [p.strip() for p in self.estimators.split(",") if p.strip()]
            self.estimators = tuple(parts)
        for name in self.estimators:
            try:
                Estimator(name.lower())
            except ValueError:
                raise ConfigError(f"unknown estimator '{name}' in estimators list")


_BOOL_VALUES = {"true": True, "1": True, "false": False, "0": False}


def _coerce(name: str, raw: str, target_type):
    raw = raw.strip()
    try:
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        if target_type is bool:
            if raw.lower() not in _BOOL_VALUES:
                raise ValueError(raw)
            return _BOOL_VALUES[raw.lower()]
        return raw
    except ValueError:
        raise ConfigError(f"invalid value '{raw}' for key '{name}'")


_SEARCH_FIELDS = {f.name: f for f in fields(SearchConfig)}
_PROBLEM_FIELDS = {f.name: f for f in fields(ProblemConfig)}


def _annotation_type(annotation) -> type:
    mapping = {"int": int, "float": float, "bool": bool}
    return mapping.get(str(annotation), str)


def parse_config_text(text: str) -> tuple[SearchConfig, ProblemConfig]:
    """Parse the flat key=value format into config objects."""
    search_kwargs: dict = {}
    problem_kwargs: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got '{line}'")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in _SEARCH_FIELDS:
            typ = _annotation_type(_SEARCH_FIELDS[key].type)
            search_kwargs[key] = _coerce(key, value, typ)
        elif key in _PROBLEM_FIELDS:
            typ = _annotation_type(_PROBLEM_FIELDS[key].type)
            problem_kwargs[key] = _coerce(key, value, typ)
        else:
            raise ConfigError(f"unknown config key '{key}'")
    return SearchConfig(**search_kwargs), ProblemConfig(**problem_kwargs)


def load_config(path) -> tuple[SearchConfig, ProblemConfig]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())
