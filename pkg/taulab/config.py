"""
Runtime configuration for taulab.

Precedence, lowest first: dataclass defaults, environment (``.env`` included),
flat JSON config file, command-line flags.
"""

import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, Mapping

from dotenv import load_dotenv

from .errors import ParseError

load_dotenv()


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ParseError(f"environment variable {name}={raw!r} is not an integer", context={"field": name}) from None


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return float(raw)
    except ValueError:
        raise ParseError(f"environment variable {name}={raw!r} is not a number", context={"field": name}) from None


@dataclass
class TaulabConfig:
    threads: int = field(default_factory=lambda: max(1, _env_int("TAULAB_THREADS", os.cpu_count() or 1)))
    output_dir: str = field(default_factory=lambda: os.getenv("TAULAB_OUTPUT_DIR", "taulab_runs"))
    log_level: str = field(default_factory=lambda: os.getenv("TAULAB_LOG_LEVEL", "INFO"))
    runtime_budget: float = field(default_factory=lambda: _env_float("TAULAB_RUNTIME_BUDGET", 300.0))
    tail_tol: float = field(default_factory=lambda: _env_float("TAULAB_TAIL_TOL", 1e-14))
    panel_nodes: int = field(default_factory=lambda: _env_int("TAULAB_PANEL_NODES", 64))
    seed: int = 0
    tol: float = 0.0

    def from_overrides(self, overrides: Mapping[str, Any]) -> "TaulabConfig":
        """
        Return a copy with matching keys replaced.

        Args:
            overrides: Flat mapping, e.g. parsed from a ``--config`` JSON file.
                Keys that are not config fields are ignored.

        Returns:
            New TaulabConfig instance.
        """
        known = {f.name: f.type for f in fields(self)}
        updates: Dict[str, Any] = {}
        for key, value in overrides.items():
            name = key.replace("-", "_")
            if name not in known or value is None:
                continue
            current = getattr(self, name)
            try:
                updates[name] = type(current)(value)
            except (TypeError, ValueError):
                raise ParseError(f"config field {key!r} has invalid value {value!r}", context={"field": key}) from None
        config = replace(self, **updates)
        config.threads = max(1, config.threads)
        return config

    def snapshot(self) -> Dict[str, Any]:
        return asdict(self)


def configure_logging(level: str = "INFO") -> None:
    """Install a single timestamped stream handler on the root logger."""
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        force=True,
    )


settings = TaulabConfig()
