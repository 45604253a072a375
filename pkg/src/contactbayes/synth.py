"""Synthetic drop scenarios: rolling, falling, stabilizing.

Stands in for a physics simulation of a wheeled biped rolling off a step.
Each drop is a contact phase, a free-fall phase and a contact phase again;
consecutive drops share their contact phases.  The emitted channels mimic
what a real robot would log:

* torques: signed knee/wheel torques, bimodal ``+-mean`` with Gaussian
  spread in contact, near zero in the air.  After takeoff the contact
  torque fades out with time constant ``takeoff_torque_decay`` instead of
  vanishing at once (the wheels keep rolling off the edge).
* acceleration: gravity-inclusive vertical specific force, ``g`` plus a
  small vibration in contact and 0 in free fall.  Takeoff adds a smooth
  half-sine bump, landing a sharp spike ringing down with ratio -1/2 per
  sample, so landings are both stronger and spectrally flatter.

Sensor noise is added last.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError

GRAVITY = 9.81


@dataclass(frozen=True)
class ScenarioConfig:
    sample_rate: float = 200.0
    roll_duration: float = 3.0
    fall_duration: float = 0.35
    stabilization_duration: float = 3.0
    n_drops: int = 1
    contact_torque_mean: tuple = (10.0, 3.0)
    contact_torque_cov: tuple = ((4.0, 0.0), (0.0, 1.0))
    no_contact_torque_std: tuple = (0.3, 0.1)
    takeoff_torque_decay: float = 0.01
    contact_vibration_std: float = 0.3
    takeoff_bump_amplitude: float = 8.0
    takeoff_bump_width: int = 20
    landing_impulse_amplitude: float = 40.0
    landing_impulse_width: int = 2
    noise_tau_knee: float = 0.0
    noise_tau_wheel: float = 0.0
    noise_acc: float = 0.0
    fit_samples: int = 2000
    seed: int = 0

    def __post_init__(self):
        problems = []
        for name in ("sample_rate", "roll_duration", "fall_duration", "stabilization_duration"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                problems.append(f"{name} must be a positive number, got {v!r}")
        for name in ("noise_tau_knee", "noise_tau_wheel", "noise_acc", "contact_vibration_std",
                     "takeoff_torque_decay", "takeoff_bump_amplitude", "landing_impulse_amplitude"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
                problems.append(f"{name} must be a non-negative number, got {v!r}")
        for name in ("n_drops", "takeoff_bump_width", "landing_impulse_width", "fit_samples"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                problems.append(f"{name} must be a positive integer, got {v!r}")
        if self.fit_samples < 2:
            problems.append("fit_samples must be at least 2")
        mean = np.asarray(self.contact_torque_mean, dtype=float)
        cov = np.asarray(self.contact_torque_cov, dtype=float)
        std = np.asarray(self.no_contact_torque_std, dtype=float)
        if mean.shape != (2,) or not np.isfinite(mean).all():
            problems.append("contact_torque_mean must be two finite numbers")
        if cov.shape != (2, 2) or not np.allclose(cov, cov.T) or np.linalg.eigvalsh(cov).min() < 0:
            problems.append("contact_torque_cov must be a symmetric positive semi-definite 2x2 matrix")
        if std.shape != (2,) or (std < 0).any():
            problems.append("no_contact_torque_std must be two non-negative numbers")
        if int(self.seed) != self.seed:
            problems.append("seed must be an integer")
        if problems:
            raise ConfigError("invalid scenario config: " + "; ".join(problems))
        if self.landing_impulse_width > round(self.stabilization_duration * self.sample_rate):
            raise ConfigError("landing impulse longer than the stabilization phase")

    def with_noise(self, torque: float, acc: float, seed: int | None = None) -> "ScenarioConfig":
        """Same scenario with both torque channels at ``torque`` and accel at ``acc`` noise."""
        return replace(self, noise_tau_knee=torque, noise_tau_wheel=torque, noise_acc=acc,
                       seed=self.seed if seed is None else seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["contact_torque_mean"] = list(self.contact_torque_mean)
        d["contact_torque_cov"] = [list(r) for r in self.contact_torque_cov]
        d["no_contact_torque_std"] = list(self.no_contact_torque_std)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        kw = dict(data)
        if "contact_torque_mean" in kw:
            kw["contact_torque_mean"] = tuple(kw["contact_torque_mean"])
        if "contact_torque_cov" in kw:
            kw["contact_torque_cov"] = tuple(tuple(r) for r in kw["contact_torque_cov"])
        if "no_contact_torque_std" in kw:
            kw["no_contact_torque_std"] = tuple(kw["no_contact_torque_std"])
        return cls(**kw)


@dataclass
class LabeledTrace:
    """Uniformly sampled sensor trace with optional ground truth.

    ``labels`` holds 1 for contact and 0 for no contact; ``events`` is a
    list of ``(time, kind)`` with kind ``"takeoff"`` or ``"landing"``.
    """

    timestamps: np.ndarray
    tau_knee: np.ndarray
    tau_wheel: np.ndarray
    acc_z: np.ndarray
    sample_rate: float
    labels: np.ndarray | None = None
    events: list = field(default_factory=list)

    def __len__(self) -> int:
        return self.timestamps.size

    @property
    def torques(self) -> np.ndarray:
        """Absolute torques, shape ``(T, 2)``."""
        return np.abs(np.column_stack((self.tau_knee, self.tau_wheel)))

    def event_times(self, kind: str) -> np.ndarray:
        return np.array([t for t, k in self.events if k == kind])


def _phase_plan(cfg: ScenarioConfig) -> list[tuple[str, int]]:
    rate = cfg.sample_rate
    roll = max(1, round(cfg.roll_duration * rate))
    fall = max(1, round(cfg.fall_duration * rate))
    stab = max(1, round(cfg.stabilization_duration * rate))
    plan = [("contact", roll)]
    for _ in range(cfg.n_drops):
        plan += [("air", fall), ("contact", stab)]
    return plan


def _clean_trace(cfg: ScenarioConfig, rng: np.random.Generator):
    plan = _phase_plan(cfg)
    total = sum(n for _, n in plan)
    rate = cfg.sample_rate
    mean = np.asarray(cfg.contact_torque_mean, dtype=float)
    cov = np.asarray(cfg.contact_torque_cov, dtype=float)
    nc_std = np.asarray(cfg.no_contact_torque_std, dtype=float)
    torque = np.empty((total, 2))
    acc = np.empty(total)
    labels = np.empty(total, dtype=np.int8)
    events = []
    start = 0
    sign = 1.0
    for phase, n in plan:
        sl = slice(start, start + n)
        if phase == "contact":
            sign = rng.choice((-1.0, 1.0))
            torque[sl] = sign * rng.multivariate_normal(mean, cov, size=n, method="cholesky")
            acc[sl] = GRAVITY + cfg.contact_vibration_std * rng.standard_normal(n)
            labels[sl] = 1
            if start > 0:
                events.append((start / rate, "landing"))
                width = min(cfg.landing_impulse_width, n)
                acc[start:start + width] += cfg.landing_impulse_amplitude * (-0.5) ** np.arange(width)
        else:
            events.append((start / rate, "takeoff"))
            t = np.arange(n) / rate
            fade = np.exp(-t / cfg.takeoff_torque_decay) if cfg.takeoff_torque_decay > 0 else np.zeros(n)
            residual = torque[start - 1] if start > 0 else np.zeros(2)
            torque[sl] = residual * fade[:, None] + nc_std * rng.standard_normal((n, 2))
            acc[sl] = 0.0
            width = min(cfg.takeoff_bump_width, n)
            k = np.arange(width)
            acc[start:start + width] += cfg.takeoff_bump_amplitude * np.sin(np.pi * (k + 1) / (width + 1))
            labels[sl] = 0
        start += n
    return torque, acc, labels, events


def generate_trace(config: ScenarioConfig | None = None) -> LabeledTrace:
    """Deterministic labeled trace for ``config`` (same seed, same arrays)."""
    cfg = config or ScenarioConfig()
    rng = np.random.default_rng(cfg.seed)
    torque, acc, labels, events = _clean_trace(cfg, rng)
    noise = np.random.default_rng([cfg.seed, 1])
    total = labels.size
    tau_knee = torque[:, 0] + cfg.noise_tau_knee * noise.standard_normal(total)
    tau_wheel = torque[:, 1] + cfg.noise_tau_wheel * noise.standard_normal(total)
    acc = acc + cfg.noise_acc * noise.standard_normal(total)
    timestamps = np.arange(total) / cfg.sample_rate
    return LabeledTrace(timestamps, tau_knee, tau_wheel, acc, cfg.sample_rate, labels, events)


def generate_fit_dataset(config: ScenarioConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Contact and no-contact pools of absolute torques, ``fit_samples`` each.

    Pools are drawn straight from the emission distributions, like logs of
    a robot balancing on the ground and one hanging from a tether.
    Configured sensor noise is applied.
    """
    cfg = config or ScenarioConfig()
    rng = np.random.default_rng([cfg.seed, 2])
    n = cfg.fit_samples
    mean = np.asarray(cfg.contact_torque_mean, dtype=float)
    signs = rng.choice((-1.0, 1.0), size=(n, 1))
    contact = signs * rng.multivariate_normal(mean, cfg.contact_torque_cov, size=n, method="cholesky")
    no_contact = np.asarray(cfg.no_contact_torque_std, dtype=float) * rng.standard_normal((n, 2))
    noise_std = np.array([cfg.noise_tau_knee, cfg.noise_tau_wheel])
    contact = contact + noise_std * rng.standard_normal((n, 2))
    no_contact = no_contact + noise_std * rng.standard_normal((n, 2))
    return np.abs(contact), np.abs(no_contact)
