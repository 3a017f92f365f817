import json
import os
import tomllib
from pathlib import Path
from typing import Any, Dict, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.core.errors import InputError
from src.core.mepde import SolveParams


SEED_ENV = "MEPDE_SEED"


def default_seed() -> int:
    """Seed from the MEPDE_SEED environment variable, else 0."""
    value = os.environ.get(SEED_ENV, "").strip()
    if not value:
        return 0
    try:
        return int(value)
    except ValueError:
        raise InputError(f"{SEED_ENV} must be an integer, got {value!r}")


class RunConfig(BaseModel):
    """Solver choice, solver knobs and file locations for one CLI run."""
    model_config = ConfigDict(extra="forbid")

    solver: Literal["mepde", "greedy"] = "mepde"
    iterations_max: int = Field(5, ge=0)
    population_size: int = Field(10, ge=1)
    max_backtrack: Optional[int] = Field(None, ge=1, description="None means 3 x VN size")
    hops_max: int = Field(2, ge=0)
    q: int = Field(2, ge=2)
    mutation_probability: float = Field(0.1, ge=0.0, le=1.0)
    seed: int = Field(default_factory=default_seed, ge=0, lt=2 ** 64)
    substrate: Optional[Path] = None
    workload: Optional[Path] = None
    output: Optional[Path] = None

    def to_solve_params(self) -> SolveParams:
        return SolveParams(
            iterations_max=self.iterations_max,
            population_size=self.population_size,
            max_backtrack=self.max_backtrack,
            hops_max=self.hops_max,
            q=self.q,
            mutation_probability=self.mutation_probability,
            seed=self.seed,
        )


def load_config_file(filepath: str) -> Dict[str, Any]:
    """Read a TOML or JSON config file into a plain dict."""
    path = Path(filepath)
    if not path.exists():
        raise FileNotFoundError("File not found")
    suffix = path.suffix.lower()
    try:
        if suffix == ".toml":
            with open(path, "rb") as f:
                return tomllib.load(f)
        if suffix == ".json":
            with open(path, "r", encoding="utf-8") as f:
                return json.load(f)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise InputError(f"Cannot parse config file {filepath}: {e}")
    raise InputError(f"Unsupported config format: {suffix or 'no extension'}")


def build_config(config_file: Optional[str] = None, **overrides: Any) -> RunConfig:
    """Defaults, then the config file, then every override that is not None."""
    data = load_config_file(config_file) if config_file else {}
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise InputError(f"Invalid configuration: {e}")
