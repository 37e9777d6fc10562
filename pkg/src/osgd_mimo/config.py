"""Run configuration: a flat key = value text format mirrored one-to-one by
CLI flags. Unknown keys and invariant violations are rejected with the
offending key named, and the effective config is echoed next to every run's
outputs so any artifact can be reproduced from its directory alone.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .channel import ModulationScheme, qpsk
from .optimizers import OptimizerConfig

DEFAULT_K_LIST = (0.0, 1.0, 2.0, 3.0, 5.0)
DEFAULT_EBN0_LIST = (-4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0)


class ConfigError(ValueError):
    """Bad key, bad type, or violated invariant; message names the key."""


@dataclass(frozen=True)
class RunConfig:
    experiment: int = 0  # 1..3; 0 = not selected
    optimizer: str = "osgd"
    eta_i: float = 1e-3
    eta_l: float = 1e-5
    lam: float = 1.0  # config key "lambda"
    beta: float = 100.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    n_tx: int = 4
    n_rx: int = 8
    modulation: str = "qpsk"
    train_ebn0_db: float = 8.0
    batch_size: int = 500
    iteration_budget: int = 20000
    schedule: str = "0.0"
    k_list: tuple[float, ...] = DEFAULT_K_LIST
    ebn0_list_db: tuple[float, ...] = DEFAULT_EBN0_LIST
    min_bit_errors: int = 200
    max_blocks: int = 2_000_000
    seed: int = 1
    workers: int = 0  # 0 = machine parallelism; 1 for strictly serial runs
    output_dir: str = "runs"
    checkpoint: str = ""
    csv: str = ""

    def scheme(self) -> ModulationScheme:
        return qpsk()

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            eta_i=self.eta_i,
            eta_l=self.eta_l,
            lam=self.lam,
            beta=self.beta,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
        )

    def tasks(self):
        """Parsed training schedule; import-cycle-free accessor."""
        from .harness import TrainingTask

        tasks = []
        for item in self.schedule.split(","):
            if ":" in item:
                lo, hi = (float(v) for v in item.split(":", 1))
                channel_k = (lo, hi)
            else:
                channel_k = float(item)
            tasks.append(
                TrainingTask(
                    channel_k=channel_k,
                    train_ebn0_db=self.train_ebn0_db,
                    batch_size=self.batch_size,
                    iteration_budget=self.iteration_budget,
                )
            )
        return tasks


# key -> (attribute, parser); "lambda" is a Python keyword, hence the alias.
def _parse_float_list(text: str) -> tuple[float, ...]:
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(float(s) for s in items)


def _parse_schedule(text: str) -> str:
    """Normalize a schedule string: comma-separated tasks, each a fixed K
    or a lo:hi uniform mixture range."""
    tasks = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            raise ValueError("empty schedule entry")
        if ":" in item:
            lo_s, hi_s = item.split(":", 1)
            lo, hi = float(lo_s), float(hi_s)
            if lo < 0 or hi < lo:
                raise ValueError(f"bad mixture range {item!r}")
            tasks.append(f"{lo!r}:{hi!r}")
        else:
            k = float(item)
            if k < 0:
                raise ValueError("channel K must be nonnegative")
            tasks.append(repr(k))
    return ",".join(tasks)


_KEYS: dict[str, tuple[str, object]] = {
    "experiment": ("experiment", int),
    "optimizer": ("optimizer", str),
    "eta_i": ("eta_i", float),
    "eta_l": ("eta_l", float),
    "lambda": ("lam", float),
    "beta": ("beta", float),
    "beta1": ("beta1", float),
    "beta2": ("beta2", float),
    "epsilon": ("epsilon", float),
    "n_tx": ("n_tx", int),
    "n_rx": ("n_rx", int),
    "modulation": ("modulation", str),
    "train_ebn0_db": ("train_ebn0_db", float),
    "batch_size": ("batch_size", int),
    "iteration_budget": ("iteration_budget", int),
    "schedule": ("schedule", _parse_schedule),
    "k_list": ("k_list", _parse_float_list),
    "ebn0_list_db": ("ebn0_list_db", _parse_float_list),
    "min_bit_errors": ("min_bit_errors", int),
    "max_blocks": ("max_blocks", int),
    "seed": ("seed", int),
    "workers": ("workers", int),
    "output_dir": ("output_dir", str),
    "checkpoint": ("checkpoint", str),
    "csv": ("csv", str),
}

_ATTR_TO_KEY = {attr: key for key, (attr, _) in _KEYS.items()}


def _validate(cfg: RunConfig) -> None:
    def bad(key, why):
        raise ConfigError(f"invalid value for '{key}': {why}")

    if cfg.experiment not in (0, 1, 2, 3):
        bad("experiment", "must be 1, 2 or 3")
    if cfg.optimizer not in ("osgd", "adam", "sgd"):
        bad("optimizer", "must be one of osgd, adam, sgd")
    if not cfg.eta_l > 0:
        bad("eta_l", "must be positive")
    if cfg.eta_i < cfg.eta_l:
        bad("eta_l", "must not exceed eta_i")
    if cfg.lam <= 0:
        bad("lambda", "must be positive")
    if cfg.beta <= 0:
        bad("beta", "must be positive")
    if not 0 <= cfg.beta1 < 1:
        bad("beta1", "must lie in [0, 1)")
    if not 0 <= cfg.beta2 < 1:
        bad("beta2", "must lie in [0, 1)")
    if cfg.epsilon <= 0:
        bad("epsilon", "must be positive")
    if cfg.n_tx < 1:
        bad("n_tx", "must be at least 1")
    if cfg.n_rx < cfg.n_tx:
        bad("n_rx", "must be at least n_tx")
    if cfg.modulation != "qpsk":
        bad("modulation", "only qpsk is supported")
    if cfg.batch_size < 1:
        bad("batch_size", "must be at least 1")
    if cfg.iteration_budget < 1:
        bad("iteration_budget", "must be at least 1")
    if any(k < 0 for k in cfg.k_list):
        bad("k_list", "K factors must be nonnegative")
    if cfg.min_bit_errors < 1:
        bad("min_bit_errors", "must be at least 1")
    if cfg.max_blocks < 1:
        bad("max_blocks", "must be at least 1")
    if not 0 <= cfg.seed < 2 ** 64:
        bad("seed", "must fit in 64 bits")
    if cfg.workers < 0:
        bad("workers", "must be nonnegative (0 = machine parallelism)")


def parse_config(path=None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Build a RunConfig from an optional file plus flag overrides.

    The file holds `key = value` lines ('#' comments and blank lines are
    ignored); overrides are raw strings keyed by config key and take
    precedence over the file.
    """
    raw: dict[str, str] = {}
    if path is not None:
        text = Path(path).read_text()
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in stripped.split("=", 1))
            if key not in _KEYS:
                raise ConfigError(f"unknown config key '{key}'")
            raw[key] = value
    for key, value in (overrides or {}).items():
        if key not in _KEYS:
            raise ConfigError(f"unknown config key '{key}'")
        raw[key] = value

    fields: dict[str, object] = {}
    for key, value in raw.items():
        attr, parser = _KEYS[key]
        try:
            fields[attr] = parser(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid value for '{key}': {exc}") from exc
    cfg = RunConfig(**fields)
    _validate(cfg)
    return cfg


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_lines(cfg: RunConfig) -> list[str]:
    lines = []
    for f in dataclasses.fields(RunConfig):
        key = _ATTR_TO_KEY[f.name]
        lines.append(f"{key} = {_format_value(getattr(cfg, f.name))}")
    return lines


def echo_config(cfg: RunConfig, path) -> None:
    """Write the effective config; parsing the echo reproduces cfg exactly."""
    Path(path).write_text("\n".join(config_lines(cfg)) + "\n")
