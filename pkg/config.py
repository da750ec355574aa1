"""
WawPart - Configuration
Pipeline settings from flat `key = value` files, environment and overrides
"""

import io
import logging
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from benchmark_generator import BaselineSpec, BenchmarkKind, GeneratorSpec
from execution_simulator import CostModel
from partition_engine import ScoreWeights
from query_clustering import Linkage

# Load environment variables
load_dotenv()

REDIS_URL = os.getenv('REDIS_URL', 'redis://localhost:6379/0')
DATA_DIR = Path(os.getenv('WAWPART_DATA_DIR', './wawpart-data'))

logger = logging.getLogger(__name__)

_ENDPOINT_PREFIX = "endpoint."


class ConfigError(ValueError):
    """Unknown key or invalid value in a pipeline configuration."""


class Strategy(str, Enum):
    WAWPART = "wawpart"
    RANDOM = "random"


class PipelineConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    k: int = Field(default=3, ge=1, description="Number of shards")
    linkage: Linkage = Field(default=Linkage.SINGLE, description="HAC linkage")
    cut_distance: Optional[float] = Field(default=None, ge=0, le=1,
                                          description="Cut the dendrogram here instead of into k clusters")
    epsilon: float = Field(default=0.15, ge=0, description="Balance reporting threshold")
    w1: float = Field(default=1.0, ge=0)
    w2: float = Field(default=1.0, ge=0)
    w3: float = Field(default=1.0, ge=0)
    w4: float = Field(default=1.0, ge=0)
    w5: float = Field(default=1.0, ge=0)
    w6: float = Field(default=1.0, ge=0)
    w7: float = Field(default=1.0, ge=0)
    seed: int = Field(default=1)
    strategy: Strategy = Field(default=Strategy.WAWPART)
    call_latency: float = Field(default=50.0, ge=0)
    per_row_cost: float = Field(default=0.01, ge=0)
    local_match_cost: float = Field(default=0.0001, ge=0)
    benchmark: BenchmarkKind = Field(default=BenchmarkKind.LUBM)
    scale: int = Field(default=15000, ge=1)
    endpoints: Dict[int, str] = Field(default_factory=dict, description="Shard id to SPARQL endpoint IRI")
    endpoint_template: str = Field(default="http://shard-{shard}.local:8890/sparql")

    @model_validator(mode="after")
    def _weights_usable(self) -> "PipelineConfig":
        if not any(getattr(self, f"w{i}") > 0 for i in range(1, 8)):
            raise ValueError("at least one of w1..w7 must be positive")
        return self

    def weights(self) -> ScoreWeights:
        return ScoreWeights(w1=self.w1, w2=self.w2, w3=self.w3, w4=self.w4,
                            w5=self.w5, w6=self.w6, w7=self.w7)

    def cost_model(self) -> CostModel:
        return CostModel(call_latency=self.call_latency, per_row_cost=self.per_row_cost,
                         local_match_cost=self.local_match_cost)

    def generator_spec(self) -> GeneratorSpec:
        return GeneratorSpec(benchmark=self.benchmark, seed=self.seed, scale=self.scale)

    def baseline_spec(self) -> BaselineSpec:
        return BaselineSpec(seed=self.seed, k=self.k)

    def endpoint_map(self, k: Optional[int] = None) -> Dict[int, str]:
        """Configured endpoints, with the template filling any shard left out."""
        shards = range(k if k is not None else self.k)
        return {shard: self.endpoints.get(shard, self.endpoint_template.format(shard=shard)) for shard in shards}

    def with_overrides(self, **overrides: Any) -> "PipelineConfig":
        """New config with every non-None override applied."""
        merged = self.model_dump()
        merged.update({key: value for key, value in overrides.items() if value is not None})
        return _validate(merged)


def _validate(values: Mapping[str, Any]) -> PipelineConfig:
    try:
        return PipelineConfig.model_validate(dict(values))
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(problems) from e


def parse_config(text: str) -> PipelineConfig:
    """
    Read `key = value` lines. `endpoint.<shard-id>` keys collect into the
    endpoints map; any other unknown key is an error.

    Raises:
        ConfigError: unknown key or invalid value
    """
    raw = dotenv_values(stream=io.StringIO(text))
    values: Dict[str, Any] = {}
    endpoints: Dict[int, str] = {}
    known = set(PipelineConfig.model_fields) - {"endpoints"}
    for key, value in raw.items():
        key = key.strip()
        if value is None or value.strip() == "":
            continue
        if key.startswith(_ENDPOINT_PREFIX):
            shard = key[len(_ENDPOINT_PREFIX):]
            if not shard.isdigit():
                raise ConfigError(f"endpoint key needs a shard id: {key}")
            endpoints[int(shard)] = value.strip()
        elif key in known:
            values[key] = value.strip()
        else:
            raise ConfigError(f"unknown config key: {key}")
    values["endpoints"] = endpoints
    return _validate(values)


def load_config(path: Optional[Union[str, Path]] = None, **overrides: Any) -> PipelineConfig:
    """Defaults, then the config file, then explicit overrides."""
    config = PipelineConfig()
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        config = parse_config(text)
        logger.debug(f"Loaded config from {path}")
    return config.with_overrides(**overrides)


def configure_logging(default_level: str = "INFO") -> None:
    level = os.getenv('WAWPART_LOG_LEVEL', default_level).upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
