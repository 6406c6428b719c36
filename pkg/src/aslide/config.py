"""Network parameters, validation, and the ``key = value`` experiment file."""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

MODES = ("semi-async", "fully-async")
PROTOCOLS = ("slide", "slide-plus", "offline-plan")
ADVERSARIES = ("random", "cyclic", "greedy", "replay")

SENDER = 0


class ConfigError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class NetworkConfig:
    n: int
    C: int
    mode: str = "semi-async"
    protocol: str = "slide"

    @property
    def receiver(self) -> int:
        return self.n - 1

    @property
    def internal(self) -> range:
        return range(1, self.n - 1)

    @property
    def gap(self) -> int:
        """Height difference C/n that triggers a transfer in basic Slide."""
        return self.C // self.n

    @property
    def sender_height(self) -> int:
        return self.C + self.gap - 1

    @property
    def receiver_height(self) -> int:
        return -self.gap

    @property
    def plus_gap(self) -> int:
        """Transfer threshold used by Slide+ on stale heights."""
        return self.gap - 2 * self.n

    def is_internal(self, node: int) -> bool:
        return 0 < node < self.n - 1


def validate_config(cfg: NetworkConfig) -> None:
    if cfg.n < 4:
        raise ConfigError(f"n must be at least 4, got {cfg.n}")
    if cfg.C <= 0:
        raise ConfigError(f"C must be positive, got {cfg.C}")
    if cfg.C % cfg.n:
        raise ConfigError(f"C/n not integer ({cfg.C}/{cfg.n})")
    if cfg.mode not in MODES:
        raise ConfigError(f"unknown mode {cfg.mode!r}")
    if cfg.protocol not in PROTOCOLS:
        raise ConfigError(f"unknown protocol {cfg.protocol!r}")
    if cfg.protocol == "slide":
        if cfg.mode != "semi-async":
            raise ConfigError("slide runs only in semi-async mode")
        if cfg.C < 2 * cfg.n:
            raise ConfigError(f"slide needs C >= 2n, got C={cfg.C}, n={cfg.n}")
    if cfg.protocol == "slide-plus":
        if cfg.mode != "fully-async":
            raise ConfigError("slide-plus runs only in fully-async mode")
        if cfg.C < 8 * cfg.n * cfg.n:
            raise ConfigError(f"slide-plus needs C >= 8n^2, got C={cfg.C}, n={cfg.n}")


@dataclass(frozen=True, slots=True)
class Experiment:
    network: NetworkConfig
    adversary: str = "random"
    seed: int = 0
    rounds: int = 1000
    replay: str | None = None
    checkpoint: int | None = None

    @property
    def checkpoint_every(self) -> int:
        return self.checkpoint or self.network.C

    def with_overrides(self, **kw) -> "Experiment":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


_INT_KEYS = {"n", "C", "seed", "rounds", "checkpoint"}


def parse_config(text: str) -> Experiment:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value
    parsed: dict = {}
    for key, value in values.items():
        if key in _INT_KEYS:
            try:
                parsed[key] = int(value, 0)
            except ValueError:
                raise ConfigError(f"{key} must be an integer, got {value!r}") from None
        else:
            parsed[key] = value
    for key in ("n", "C"):
        if key not in parsed:
            raise ConfigError(f"missing required key {key!r}")
    protocol = parsed.pop("protocol", "slide")
    default_mode = "fully-async" if protocol == "slide-plus" else "semi-async"
    net = NetworkConfig(parsed.pop("n"), parsed.pop("C"), parsed.pop("mode", default_mode), protocol)
    adversary = parsed.pop("adversary", "random")
    if adversary not in ADVERSARIES:
        raise ConfigError(f"unknown adversary {adversary!r}")
    known = {k: parsed.pop(k) for k in ("seed", "rounds", "replay", "checkpoint") if k in parsed}
    if parsed:
        raise ConfigError(f"unknown keys: {', '.join(sorted(parsed))}")
    return Experiment(net, adversary, **known)


def load_config(path: str | Path) -> Experiment:
    return parse_config(Path(path).read_text())
