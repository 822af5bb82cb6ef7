"""Tolerances and caps shared by every solver.

Defaults can be overridden through `NCPICK_*` environment variables (a `.env`
file in the working directory is honoured), then by instance-file settings,
then by command-line flags.
"""

import dataclasses
import logging
import math
import os
from typing import Any, Dict, Mapping, Optional

from dotenv import load_dotenv

__all__ = ["Settings", "DEFAULT_SETTINGS"]

logger = logging.getLogger(__name__)

_FLOAT_FIELDS = (
    "tol_psd",
    "tol_interp",
    "tol_series",
    "rank_tol",
    "cross_check_tol",
)
_INT_FIELDS = (
    "depth_cap",
    "kernel_depth_cap",
    "k_out",
    "vec_dim_cap",
    "norm_dim_cap",
)


@dataclasses.dataclass(frozen=True)
class Settings:
    """Numerical settings for feasibility tests and synthesis."""

    tol_psd: float = 1e-9
    tol_interp: float = 1e-6
    tol_series: float = 1e-9
    depth_cap: int = 200
    kernel_depth_cap: int = 5000
    k_out: int = 8
    rank_tol: float = 1e-10
    cross_check_tol: float = 1e-8
    # largest side of the vectorized displacement matrix we are willing to form
    vec_dim_cap: int = 4000
    # largest assembled truncation whose norm is computed in certificates
    norm_dim_cap: int = 1500

    def __post_init__(self) -> None:
        for name in _FLOAT_FIELDS:
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"Setting {name} must be positive and finite, got {value}")
        for name in _INT_FIELDS:
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ValueError(f"Setting {name} must be a nonnegative int, got {value}")

    def replace(self, **overrides: Any) -> "Settings":
        """Return a copy with the non-None overrides applied."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **changes)

    def to_json(self) -> Dict[str, Any]:
        """Echo every setting, for self-describing reports."""
        return dataclasses.asdict(self)

    @classmethod
    def from_mapping(
        cls, values: Mapping[str, Any], base: Optional["Settings"] = None
    ) -> "Settings":
        """Build settings from a mapping such as the `settings` block of an instance file.

        The instance format nests tolerances as {"tolerances": {"psd", "interp",
        "series"}} and names the truncation "K"; flat field names are accepted too.
        """
        base = base if base is not None else cls()
        flat: Dict[str, Any] = {}
        for key, value in values.items():
            if key == "tolerances":
                if not isinstance(value, Mapping):
                    raise ValueError(f"Settings tolerances must be an object: {value}")
                for tol_key, tol_value in value.items():
                    flat[f"tol_{tol_key}"] = tol_value
            elif key == "K":
                flat["k_out"] = value
            else:
                flat[key] = value
        known = {f.name for f in dataclasses.fields(cls)}
        for key in flat:
            if key not in known:
                raise ValueError(f"Unknown setting '{key}'")
        coerced: Dict[str, Any] = {}
        for key, value in flat.items():
            coerced[key] = _coerce(key, value)
        return base.replace(**coerced)

    @classmethod
    def from_env(cls, dotenv: bool = True) -> "Settings":
        """Read `NCPICK_<FIELD>` variables, loading a `.env` file first if present."""
        if dotenv:
            load_dotenv()
        values: Dict[str, Any] = {}
        for f in dataclasses.fields(cls):
            raw = os.environ.get(f"NCPICK_{f.name.upper()}")
            if raw is not None:
                values[f.name] = raw
        if values:
            logger.debug("Settings from environment: %s", values)
        return cls.from_mapping(values)


def _coerce(key: str, value: Any) -> Any:
    if key in _FLOAT_FIELDS:
        if isinstance(value, bool):
            raise ValueError(f"Setting {key} must be a number, got {value}")
        return float(value)
    if key in _INT_FIELDS:
        if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
            raise ValueError(f"Setting {key} must be an integer, got {value}")
        return int(value)
    return value


DEFAULT_SETTINGS = Settings()
