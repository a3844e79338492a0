"""Server configuration: asset paths plus session and search defaults."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, Field


class ServerConfig(BaseModel):
    schema_path: str
    checkpoint_path: str
    personas_path: Optional[str] = None
    log_dir: str = "session-logs"
    host: str = "127.0.0.1"
    port: int = 8000
    guided_submode: Literal["rate", "choice"] = "rate"
    k: int = Field(default=3, ge=1)
    m: int = Field(default=2, ge=1)
    n_particles: int = Field(default=500, ge=1)
    beta: float = Field(default=10.0, ge=0.0)
    rollouts: int = Field(default=1500, ge=1)
    max_intervention_len: int = Field(default=4, ge=1)
    pool_draws: int = Field(default=6, ge=1)
    pool_top_n: int = Field(default=4, ge=1)
    root_seed: int = 0
    frontend_dir: Optional[str] = None


def load_config(path: str | Path) -> ServerConfig:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    cfg = ServerConfig.model_validate(doc)
    base = Path(path).resolve().parent
    # relative asset paths resolve against the config file location
    for attr in ("schema_path", "checkpoint_path", "personas_path", "log_dir",
                 "frontend_dir"):
        value = getattr(cfg, attr)
        if value is not None and not Path(value).is_absolute():
            setattr(cfg, attr, str(base / value))
    return cfg
