"""Two-state recursive Bayes filter for ground contact.

States are ordered ``(C, NC)``.  Every step predicts through a transition
matrix built from the recent vertical acceleration and then reweights by
the torque likelihoods of the two KDEs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import EstimatorConfig, SigmoidParams
from .density import KdeModel, TorqueSample
from .errors import SignalValidityError
from .spectral import AccelWindow, median_rows, power_rows


def sigmoid(x: float, offset: float, slope: float) -> float:
    """Logistic ``1 / (1 + exp(-slope (x - offset)))`` without overflow."""
    if not slope > 0:
        raise ValueError(f"sigmoid slope must be positive, got {slope}")
    z = slope * (x - offset)
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _expit_pair(a: float, b: float) -> tuple[float, float]:
    """``(e^a, e^b) / (e^a + e^b)`` computed without overflow."""
    return sigmoid(a - b, 0.0, 1.0), sigmoid(b - a, 0.0, 1.0)


@dataclass(frozen=True)
class Belief:
    p_contact: float
    p_no_contact: float

    def __post_init__(self):
        for name in ("p_contact", "p_no_contact"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if abs(self.p_contact + self.p_no_contact - 1.0) > 1e-12:
            raise ValueError(f"belief not normalized: {self.p_contact} + {self.p_no_contact}")

    @classmethod
    def flat(cls) -> "Belief":
        return cls(0.5, 0.5)

    @classmethod
    def from_contact(cls, p_contact: float) -> "Belief":
        return cls(p_contact, 1.0 - p_contact)

    def as_array(self) -> np.ndarray:
        return np.array([self.p_contact, self.p_no_contact])

    def clamped(self, eps: float) -> "Belief":
        if eps <= 0 or eps <= self.p_contact <= 1.0 - eps:
            return self
        return Belief.from_contact(min(max(self.p_contact, eps), 1.0 - eps))


@dataclass(frozen=True)
class TransitionMatrix:
    """Product-form transition model.

    ``p_switch`` is the probability that the contact state changed this
    step and ``p_land_given_switch`` the probability that such a change
    ends in contact.
    """

    p_switch: float
    p_land_given_switch: float

    def __post_init__(self):
        for name in ("p_switch", "p_land_given_switch"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @property
    def p_land(self) -> float:
        """P(C | NC)."""
        return self.p_land_given_switch * self.p_switch

    @property
    def p_takeoff(self) -> float:
        """P(NC | C)."""
        return (1.0 - self.p_land_given_switch) * self.p_switch

    @property
    def matrix(self) -> np.ndarray:
        """Row-stochastic matrix ``M[previous, next]`` over ``(C, NC)``."""
        return np.array([
            [1.0 - self.p_takeoff, self.p_takeoff],
            [self.p_land, 1.0 - self.p_land],
        ])

    @classmethod
    def identity(cls) -> "TransitionMatrix":
        return cls(0.0, 0.5)


def transition_from_features(total_power: float, median_bin: float, config: EstimatorConfig) -> TransitionMatrix:
    """Build the transition matrix from window power and median frequency.

    A NaN median (zero-power window) carries no direction information and
    maps to an even split.
    """
    s1, s2 = config.switch_sigmoid, config.direction_sigmoid
    p_switch = sigmoid(total_power, s1.offset, s1.slope)
    p_dir = 0.5 if math.isnan(median_bin) else sigmoid(median_bin, s2.offset, s2.slope)
    return TransitionMatrix(p_switch, p_dir)


def window_features(frames: np.ndarray, config: EstimatorConfig) -> tuple[np.ndarray, np.ndarray]:
    """Switch feature and median bin for each row of ``frames``."""
    power = power_rows(frames, taper=config.taper, detrend=config.detrend)
    if config.switch_feature == "total":
        feature = power.sum(axis=1)
    else:
        feature = power.max(axis=1)
    return feature, median_rows(power)


def warmup_transition(config: EstimatorConfig) -> TransitionMatrix:
    """Near-identity matrix used until the acceleration window first fills."""
    return transition_from_features(0.0, math.nan, config)


def transition_model(window: AccelWindow, config: EstimatorConfig | None = None) -> TransitionMatrix:
    config = config or EstimatorConfig()
    if not window.is_full:
        return warmup_transition(config)
    feature, median = window_features(window.values()[None, :], config)
    return transition_from_features(float(feature[0]), float(median[0]), config)


def predict(belief: Belief, trans: TransitionMatrix) -> Belief:
    """Prior belief after one application of the transition model."""
    pc = belief.p_contact * (1.0 - trans.p_takeoff) + belief.p_no_contact * trans.p_land
    pn = belief.p_contact * trans.p_takeoff + belief.p_no_contact * (1.0 - trans.p_land)
    total = pc + pn  # equals 1 up to rounding since the matrix is row-stochastic
    return Belief(pc / total, pn / total)


def update_log(prior: Belief, log_f_contact: float, log_f_no_contact: float) -> Belief:
    """Posterior from log-likelihoods; normalization happens in log space."""
    with np.errstate(divide="ignore"):
        a = log_f_contact + (math.log(prior.p_contact) if prior.p_contact > 0 else -math.inf)
        b = log_f_no_contact + (math.log(prior.p_no_contact) if prior.p_no_contact > 0 else -math.inf)
    if a == -math.inf and b == -math.inf:
        raise ValueError("both hypotheses have zero posterior mass")
    if b == -math.inf:
        return Belief(1.0, 0.0)
    if a == -math.inf:
        return Belief(0.0, 1.0)
    pc, pn = _expit_pair(a, b)
    return Belief(pc, pn)


def update(prior: Belief, m: TorqueSample, model_c: KdeModel, model_nc: KdeModel) -> Belief:
    """Bayes update of ``prior`` with the torque measurement ``m``."""
    q = np.array([[m.tau_knee, m.tau_wheel]])
    return update_log(prior, float(model_c.log_density(q)[0]), float(model_nc.log_density(q)[0]))


def measurement_only_log(log_f_contact: float, log_f_no_contact: float) -> float:
    return _expit_pair(log_f_contact, log_f_no_contact)[0]


def measurement_only(m: TorqueSample, model_c: KdeModel, model_nc: KdeModel) -> float:
    """``f_C(m) / (f_C(m) + f_NC(m))``: the filter without its transition model."""
    q = np.array([[m.tau_knee, m.tau_wheel]])
    return measurement_only_log(float(model_c.log_density(q)[0]), float(model_nc.log_density(q)[0]))


def bayes_step(belief: Belief, trans: TransitionMatrix, log_f_contact: float, log_f_no_contact: float,
               clamp: float = 1e-9) -> tuple[Belief, Belief]:
    """One predict/update cycle; returns ``(prior, posterior)``."""
    prior = predict(belief.clamped(clamp), trans)
    return prior, update_log(prior, log_f_contact, log_f_no_contact)


@dataclass(frozen=True)
class StepResult:
    belief: Belief
    prior: Belief
    transition: TransitionMatrix
    log_f_contact: float
    log_f_no_contact: float
    switch_feature: float
    median_bin: float


class ContactFilter:
    """Streaming contact estimator.

    Feed one synchronous ``(acc_z, torques)`` pair per tick to :meth:`step`.
    The window, belief and step counter are owned by the instance; the two
    density models are shared read-only.
    """

    def __init__(self, model_c: KdeModel, model_nc: KdeModel, config: EstimatorConfig | None = None):
        self.model_c = model_c
        self.model_nc = model_nc
        self.config = config or EstimatorConfig()
        self.reset()

    def reset(self) -> None:
        self.window = AccelWindow(self.config.window_length, self.config.sample_rate)
        self.belief = Belief.from_contact(self.config.prior_contact)
        self.step_index = 0

    def step(self, acc_z: float, m: TorqueSample) -> StepResult:
        acc_z = float(acc_z)
        if not math.isfinite(acc_z):
            raise SignalValidityError(f"non-finite acceleration at step {self.step_index}: {acc_z}")
        if not (math.isfinite(m.tau_knee) and math.isfinite(m.tau_wheel)):
            raise SignalValidityError(f"non-finite torque at step {self.step_index}")
        self.window.push(acc_z)
        if self.window.is_full:
            feature, median = window_features(self.window.values()[None, :], self.config)
            feature, median = float(feature[0]), float(median[0])
            trans = transition_from_features(feature, median, self.config)
        else:
            feature, median = math.nan, math.nan
            trans = warmup_transition(self.config)
        q = np.array([[m.tau_knee, m.tau_wheel]])
        lc = float(self.model_c.log_density(q)[0])
        ln = float(self.model_nc.log_density(q)[0])
        prior, post = bayes_step(self.belief, trans, lc, ln, self.config.belief_clamp)
        self.belief = post
        self.step_index += 1
        return StepResult(post, prior, trans, lc, ln, feature, median)


@dataclass
class FilterRun:
    """Per-step outputs of :func:`run_filter`, all arrays of length ``T``."""

    p_contact: np.ndarray
    p_switch: np.ndarray
    p_land_given_switch: np.ndarray
    median_bin: np.ndarray
    log_f_contact: np.ndarray
    log_f_no_contact: np.ndarray


def run_filter(acc_z, torques, model_c: KdeModel, model_nc: KdeModel, config: EstimatorConfig | None = None,
               mode: str = "bayes") -> FilterRun:
    """Run the estimator over a whole trace.

    Produces the same beliefs as calling :meth:`ContactFilter.step` in a
    loop, but evaluates spectra and likelihoods for all steps at once.
    ``mode="measurement-only"`` returns the normalized likelihood ratio.
    """
    config = config or EstimatorConfig()
    acc = np.asarray(acc_z, dtype=float)
    tq = np.asarray(torques, dtype=float)
    if acc.ndim != 1 or tq.shape != (acc.size, 2):
        raise ValueError("expected acc_z of shape (T,) and torques of shape (T, 2)")
    if not (np.isfinite(acc).all() and np.isfinite(tq).all()):
        raise SignalValidityError("trace contains non-finite samples")
    if mode not in ("bayes", "measurement-only"):
        raise ValueError(f"unknown mode {mode!r}")
    t_len = acc.size
    n = config.window_length
    feature = np.full(t_len, np.nan)
    median = np.full(t_len, np.nan)
    if t_len >= n:
        frames = np.lib.stride_tricks.sliding_window_view(acc, n)
        feature[n - 1:], median[n - 1:] = window_features(frames, config)
    lc = model_c.log_density(tq)
    ln = model_nc.log_density(tq)
    p_contact = np.empty(t_len)
    p_switch = np.empty(t_len)
    p_dir = np.empty(t_len)
    belief = Belief.from_contact(config.prior_contact)
    warm = warmup_transition(config)
    for t in range(t_len):
        trans = warm if t < n - 1 else transition_from_features(feature[t], median[t], config)
        p_switch[t] = trans.p_switch
        p_dir[t] = trans.p_land_given_switch
        if mode == "bayes":
            _, belief = bayes_step(belief, trans, lc[t], ln[t], config.belief_clamp)
            p_contact[t] = belief.p_contact
        else:
            p_contact[t] = measurement_only_log(lc[t], ln[t])
    return FilterRun(p_contact, p_switch, p_dir, median, lc, ln)
