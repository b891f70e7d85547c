"""Process settings (environment and .env)"""

import os
from dataclasses import dataclass

import dotenv

from hlab.errors import ConfigError

dotenv.load_dotenv()

DEFAULT_MAX_POINTS = 4096
DEFAULT_NORM_GRID = 4096


def _positive_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"expected an integer, got {raw!r}", field=name) from exc
    if value < 1:
        raise ConfigError(f"must be >= 1, got {value}", field=name)
    return value


@dataclass(frozen=True)
class Settings:
    """Runtime knobs shared by every module"""

    threads: int
    max_points: int
    max_grid: int
    norm_grid: int
    output_dir: str
    progress: bool


def load_settings() -> Settings:
    """Read HLAB_* variables, falling back to defaults."""
    threads = _positive_int("HLAB_THREADS", os.cpu_count() or 1)
    max_points = _positive_int("HLAB_MAX_POINTS", DEFAULT_MAX_POINTS)
    max_grid = _positive_int("HLAB_MAX_GRID", 4 * DEFAULT_NORM_GRID)
    norm_grid = _positive_int("HLAB_NORM_GRID", DEFAULT_NORM_GRID)
    if norm_grid > max_grid:
        raise ConfigError(
            f"default norm grid {norm_grid} exceeds cap {max_grid}",
            field="HLAB_NORM_GRID",
        )
    progress = os.getenv("HLAB_PROGRESS", "1").strip().lower() not in ("0", "false", "no")
    return Settings(
        threads=threads,
        max_points=max_points,
        max_grid=max_grid,
        norm_grid=norm_grid,
        output_dir=os.getenv("HLAB_OUTPUT_DIR", "results"),
        progress=progress,
    )


SETTINGS = load_settings()
