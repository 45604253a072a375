"""Estimator configuration.

Defaults reproduce the constants used on the Upkie robot: switch sigmoid
(offset 8, slope 1), direction sigmoid (offset 7.5, slope 2.5), a 0.8
decision threshold, a flat initial prior and 200x200 KDE lookup grids.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields

from .errors import ConfigError

TAPERS = ("rectangular", "hann")
LEG_MODES = ("mean", "left", "right")
SWITCH_FEATURES = ("total", "max_bin")


@dataclass(frozen=True)
class SigmoidParams:
    offset: float
    slope: float

    def __post_init__(self):
        if not (math.isfinite(self.offset) and math.isfinite(self.slope)):
            raise ConfigError("sigmoid parameters must be finite")
        if self.slope <= 0:
            raise ConfigError(f"sigmoid slope must be positive, got {self.slope}")


@dataclass(frozen=True)
class EstimatorConfig:
    """Everything the filter needs besides the two fitted densities.

    ``window_length`` and ``sample_rate`` fix the frequency-bin grid on
    which ``direction_sigmoid`` operates: the median frequency is expressed
    in bin indices, so a model fitted at one (N, rate) pair should be run
    at the same pair.
    """

    switch_sigmoid: SigmoidParams = field(default_factory=lambda: SigmoidParams(8.0, 1.0))
    direction_sigmoid: SigmoidParams = field(default_factory=lambda: SigmoidParams(7.5, 2.5))
    threshold: float = 0.8
    prior_contact: float = 0.5
    window_length: int = 32
    sample_rate: float = 200.0
    taper: str = "rectangular"
    detrend: bool = True
    switch_feature: str = "total"
    leg_mode: str = "mean"
    density_floor: float = 1e-12
    grid_resolution: int = 200
    belief_clamp: float = 1e-9

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"threshold must lie in (0, 1), got {self.threshold}")
        if not 0.0 < self.prior_contact < 1.0:
            raise ConfigError("prior_contact must lie in (0, 1)")
        if int(self.window_length) != self.window_length or self.window_length < 8:
            raise ConfigError(f"window_length must be an integer >= 8, got {self.window_length}")
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise ConfigError("sample_rate must be positive")
        if self.taper not in TAPERS:
            raise ConfigError(f"taper must be one of {TAPERS}, got {self.taper!r}")
        if self.switch_feature not in SWITCH_FEATURES:
            raise ConfigError(f"switch_feature must be one of {SWITCH_FEATURES}")
        if self.leg_mode not in LEG_MODES:
            raise ConfigError(f"leg_mode must be one of {LEG_MODES}, got {self.leg_mode!r}")
        if not 0.0 < self.density_floor < 1.0:
            raise ConfigError("density_floor must lie in (0, 1)")
        if int(self.grid_resolution) != self.grid_resolution or self.grid_resolution < 2:
            raise ConfigError("grid_resolution must be an integer >= 2")
        if not 0.0 <= self.belief_clamp < 0.5:
            raise ConfigError("belief_clamp must lie in [0, 0.5)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EstimatorConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown estimator config keys: {sorted(unknown)}")
        kwargs = dict(data)
        for key in ("switch_sigmoid", "direction_sigmoid"):
            if key in kwargs and isinstance(kwargs[key], dict):
                kwargs[key] = SigmoidParams(**kwargs[key])
            elif key in kwargs and isinstance(kwargs[key], (list, tuple)):
                kwargs[key] = SigmoidParams(*kwargs[key])
        return cls(**kwargs)

    def digest(self) -> str:
        """Stable short hash used to detect fit/run configuration drift."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
