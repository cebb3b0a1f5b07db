"""Plain-text experiment configuration (one ``key = value`` per line)."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from .dynamics import GOLDEN_THETA, KINDS
from .errors import ConfigError

EXPERIMENTS = ("growth", "net-check", "kernel-scan", "lemma-tech", "simple-term", "converge",
               "sigma-part", "freedman", "opnorm")
STATISTICS = ("martingale_sum", "kernel_sup", "lemma_tech_statistic", "simple_term_excess")
SCHEMA_VERSION = "ergolab-results v1"


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "growth"
    alpha: float = 0.3
    rho: float = 2.0
    n_max: int = 100_000
    n_min: int = 16
    master_seed: int = 0
    trials: int = 20
    # weight nets
    delta: float = 0.25
    m_max: int = 2
    kappa: float = 0.5
    horizon: int = 4096
    net_points: int = 2
    include_constant: bool = True
    net_file: str = ""
    # system and observable
    system: str = "rotation"
    theta: float = GOLDEN_THETA
    m: int = 1
    k: int = 1
    coboundary: bool = True
    states: int = 64
    # tails
    statistic: str = "martingale_sum"
    thresholds: tuple[float, ...] = (2.0, 3.0, 4.0)
    # operator-norm probing
    probes: int = 4
    power_iters: int = 10
    out: str = "-"
    threads: int = 1

    def replace(self, **changes) -> "ExperimentConfig":
        return check_config(dataclasses.replace(self, **changes))

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines)


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(key: str, text: str):
    kind = _FIELD_TYPES[key]
    if kind == "bool":
        return _parse_bool(text)
    if kind == "int":
        return int(float(text)) if "e" in text.lower() else int(text)
    if kind == "float":
        return float(text)
    if kind.startswith("tuple"):
        return tuple(float(p) for p in text.split(",") if p.strip())
    return text.strip()


def check_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """Range checks; raises :class:`ConfigError` naming the field and constraint."""
    def bad(field: str, msg: str):
        raise ConfigError(f"{field}: {msg}", field=field)

    if cfg.experiment not in EXPERIMENTS:
        bad("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
    if not 0.0 < cfg.alpha < 0.5:
        bad("alpha", "alpha must lie in (0, 1/2)")
    if not cfg.rho > 1.0:
        bad("rho", "lacunarity constant rho must satisfy rho > 1")
    if cfg.n_max < 1:
        bad("n_max", "must be >= 1")
    if cfg.n_min < 1 or cfg.n_min > cfg.n_max:
        bad("n_min", "must lie in 1..n_max")
    if cfg.trials < 1:
        bad("trials", "must be >= 1")
    if not 0.0 < cfg.delta <= 0.5:
        bad("delta", "must lie in (0, 1/2]")
    if cfg.m_max < 1:
        bad("m_max", "must be >= 1")
    if not cfg.kappa > 0:
        bad("kappa", "must be positive")
    if cfg.horizon < 2:
        bad("horizon", "must be >= 2")
    if cfg.net_points < 0:
        bad("net_points", "must be >= 0")
    if cfg.system not in KINDS:
        bad("system", f"must be one of {', '.join(KINDS)}")
    if cfg.system == "rotation" and not 0.0 < cfg.theta < 1.0:
        bad("theta", "must lie in (0, 1)")
    if cfg.system == "cyclic" and cfg.m < 1:
        bad("m", "must be >= 1")
    if cfg.states < 1:
        bad("states", "must be >= 1")
    if cfg.statistic not in STATISTICS:
        bad("statistic", f"must be one of {', '.join(STATISTICS)}")
    if not cfg.thresholds or any(t <= 0 for t in cfg.thresholds):
        bad("thresholds", "must be a nonempty list of positive multipliers")
    if cfg.probes < 1:
        bad("probes", "must be >= 1")
    if cfg.power_iters < 0:
        bad("power_iters", "must be >= 0")
    if cfg.threads < 1:
        bad("threads", "must be >= 1")
    return cfg


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines (``:`` also accepted, ``#`` starts a comment)."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, _, value = line.partition(sep)
        key = key.strip().replace("-", "_")
        if key == "nmax":
            key = "n_max"
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}", field=key, line=lineno)
        try:
            values[key] = _convert(key, value.strip())
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}", field=key, line=lineno) from None
    return values


def validate_config(text: str, **overrides) -> ExperimentConfig:
    """Parse, fill defaults, apply non-``None`` overrides and range-check."""
    values = parse_config(text)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return check_config(ExperimentConfig(**values))
