"""
Environment settings and experiment configuration.

Settings come from the process environment (a local `.env` file is loaded
first). Experiment configurations can also be read from flat key=value
files whose keys are the long command-line flag names.
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from dotenv import dotenv_values, load_dotenv

from .exceptions import ConfigError

load_dotenv()

DEFAULT_DATABASE_URL = "sqlite:///gwntf_results.db"

ALGORITHMS = ("kmeans", "nmf", "gnmf", "ncp", "gncp", "gwntf")
GRAPH_ALGORITHMS = ("gnmf", "gncp", "gwntf")
FORMATS = ("wntf", "csv")
WEIGHTINGS = ("binary", "heat")
GRAPH_RULES = ("mm", "printed")

# fields that do not influence results
_UNHASHED = ("out", "dump_factors", "no_db")

# config-file keys that differ from the attribute names
_KEY_ALIASES = {"lambda": "lam", "algorithm": "algo", "p": "p_neighbors"}


def get_database_url() -> str:
    return os.getenv("DATABASE_URL", DEFAULT_DATABASE_URL)


def get_thread_count() -> int:
    """
    Worker threads for transport refreshes and Monte-Carlo runs.

    Returns:
        Value of WNTF_THREADS (default 1, which forces sequential execution)
    """
    raw = os.getenv("WNTF_THREADS", "1").strip()
    try:
        threads = int(raw)
    except ValueError as e:
        raise ConfigError(f"WNTF_THREADS must be an integer, got {raw!r}") from e
    if threads < 1:
        raise ConfigError(f"WNTF_THREADS must be at least 1, got {threads}")
    return threads


def parse_modes(value: Union[str, Tuple[int, ...], None]) -> Optional[Tuple[int, ...]]:
    """Parse '0,1' (or 'all'/empty) into a sorted tuple of mode indices."""
    if value is None:
        return None
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("", "all"):
            return None
        try:
            value = tuple(int(part) for part in text.split(",") if part.strip())
        except ValueError as e:
            raise ConfigError(f"Invalid mode list {value!r}") from e
    modes = tuple(sorted(set(int(m) for m in value)))
    if any(m < 0 for m in modes):
        raise ConfigError(f"Mode indices must be nonnegative, got {modes}")
    return modes or None


def _parse_bool(value: Union[str, bool]) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"Invalid boolean value {value!r}")


def _optional_int(value: Any) -> Optional[int]:
    if value is None or (isinstance(value, str) and value.strip() in ("", "auto")):
        return None
    return int(value)


def _optional_str(value: Any) -> Optional[str]:
    if value is None or (isinstance(value, str) and not value.strip()):
        return None
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    """One benchmark configuration: dataset, algorithm and hyperparameters."""

    dataset: Optional[str] = None
    format: str = "wntf"
    shape: Optional[str] = None
    labels: Optional[str] = None
    algo: str = "gwntf"
    rank: int = 10
    lam: float = 100.0
    alpha: float = 1.0
    beta: float = 1.0
    mu: float = 1e4
    p_neighbors: int = 5
    weighting: str = "binary"
    sigma: float = 1.0
    tol: float = 1e-5
    max_iters: int = 200
    sinkhorn_iters: int = 10
    wasserstein_modes: Optional[Tuple[int, ...]] = None
    graph_rule: str = "mm"
    clusters: Optional[int] = None
    runs: int = 10
    seed: int = 0
    out: str = "results"
    dump_factors: bool = False
    no_db: bool = False

    def validate(self) -> "ExperimentConfig":
        """Check the configuration; returns self so calls can be chained."""
        if self.algo not in ALGORITHMS:
            raise ConfigError(f"Unknown algorithm {self.algo!r}; expected one of {', '.join(ALGORITHMS)}")
        if self.format not in FORMATS:
            raise ConfigError(f"Unknown dataset format {self.format!r}")
        if self.format == "csv" and self.shape is None and self.dataset is not None:
            if not Path(f"{self.dataset}.shape").exists():
                raise ConfigError("CSV datasets need --shape or a .shape sidecar file")
        if self.runs < 1:
            raise ConfigError(f"runs must be at least 1, got {self.runs}")
        if self.clusters is not None and self.clusters < 1:
            raise ConfigError(f"clusters must be at least 1, got {self.clusters}")
        if self.algo == "kmeans":
            return self

        if self.rank < 1:
            raise ConfigError(f"rank must be at least 1, got {self.rank}")
        if self.tol <= 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ConfigError(f"max-iters must be at least 1, got {self.max_iters}")
        if self.algo in GRAPH_ALGORITHMS:
            if self.mu < 0:
                raise ConfigError(f"mu must be nonnegative, got {self.mu}")
            if self.p_neighbors < 1:
                raise ConfigError(f"p-neighbors must be at least 1, got {self.p_neighbors}")
            if self.weighting not in WEIGHTINGS:
                raise ConfigError(f"Unknown weighting {self.weighting!r}")
            if self.sigma <= 0:
                raise ConfigError(f"sigma must be positive, got {self.sigma}")
            if self.graph_rule not in GRAPH_RULES:
                raise ConfigError(f"Unknown graph rule {self.graph_rule!r}")
        if self.algo == "gwntf":
            if self.lam <= 0:
                raise ConfigError(f"lambda must be positive, got {self.lam}")
            if self.alpha < 0 or self.beta < 0:
                raise ConfigError("alpha and beta must be nonnegative")
            if self.sinkhorn_iters < 1:
                raise ConfigError(f"sinkhorn-iters must be at least 1, got {self.sinkhorn_iters}")
        return self

    def to_dict(self) -> Dict[str, Any]:
        values = asdict(self)
        if self.wasserstein_modes is not None:
            values["wasserstein_modes"] = list(self.wasserstein_modes)
        return values

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of every result-relevant field."""
        values = {k: v for k, v in self.to_dict().items() if k not in _UNHASHED}
        canonical = json.dumps(values, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "ExperimentConfig":
        """
        Build a config from flag-style keys ('p-neighbors', 'lambda', ...).

        Args:
            values: Key/value pairs; None values are ignored

        Returns:
            ExperimentConfig instance (not yet validated)
        """
        known = {f.name for f in fields(cls)}
        kwargs: Dict[str, Any] = {}
        for raw_key, value in values.items():
            if value is None:
                continue
            key = raw_key.strip().replace("-", "_")
            key = _KEY_ALIASES.get(key, key)
            if key not in known:
                raise ConfigError(f"Unknown configuration key {raw_key!r}")
            try:
                kwargs[key] = _COERCERS[key](value)
            except (TypeError, ValueError) as e:
                if isinstance(e, ConfigError):
                    raise
                raise ConfigError(f"Invalid value {value!r} for {raw_key!r}") from e
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: Union[str, Path], overrides: Optional[Mapping[str, Any]] = None) -> "ExperimentConfig":
        """Read a key=value file; non-None `overrides` take precedence."""
        return cls.from_mapping(merge_settings(load_config_file(path), overrides or {}))


_COERCERS = {
    "dataset": _optional_str,
    "format": str,
    "shape": _optional_str,
    "labels": _optional_str,
    "algo": str,
    "rank": int,
    "lam": float,
    "alpha": float,
    "beta": float,
    "mu": float,
    "p_neighbors": int,
    "weighting": str,
    "sigma": float,
    "tol": float,
    "max_iters": int,
    "sinkhorn_iters": int,
    "wasserstein_modes": parse_modes,
    "graph_rule": str,
    "clusters": _optional_int,
    "runs": int,
    "seed": int,
    "out": str,
    "dump_factors": _parse_bool,
    "no_db": _parse_bool,
}


def load_config_file(path: Union[str, Path]) -> Dict[str, Optional[str]]:
    """Parse a flat key=value file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    return dict(dotenv_values(path))


def merge_settings(base: Mapping[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """Overlay non-None overrides on base, normalizing key spelling."""
    merged = {k.strip().replace("_", "-"): v for k, v in base.items()}
    for key, value in overrides.items():
        if value is not None:
            merged[key.replace("_", "-")] = value
    return merged
