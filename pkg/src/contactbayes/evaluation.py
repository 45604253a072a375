"""Evaluation protocols: pointwise metrics, transition events, latencies, noise sweeps.

Undefined ratios (empty denominators) are reported as ``None`` rather than 0
so that aggregates cannot silently absorb them.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bayes import run_filter
from .config import EstimatorConfig
from .density import KdeModel
from .synth import ScenarioConfig, generate_trace

KINDS = ("takeoff", "landing")
MATCH_WINDOW = 0.25  # seconds


def _ratio(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


@dataclass(frozen=True)
class ClassCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def precision(self) -> float | None:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def recall(self) -> float | None:
        return _ratio(self.tp, self.tp + self.fn)


@dataclass(frozen=True)
class PointwiseReport:
    contact: ClassCounts
    no_contact: ClassCounts
    threshold: float

    @property
    def n_steps(self) -> int:
        c = self.contact
        return c.tp + c.fp + c.fn + c.tn

    @property
    def success_rate(self) -> float:
        return (self.contact.tp + self.contact.tn) / self.n_steps

    def to_dict(self) -> dict:
        out = {"threshold": self.threshold, "n_steps": self.n_steps, "success_rate": self.success_rate}
        for name, cc in (("C", self.contact), ("NC", self.no_contact)):
            out[name] = {"precision": cc.precision, "recall": cc.recall,
                         "tp": cc.tp, "fp": cc.fp, "fn": cc.fn, "tn": cc.tn}
        return out


def _as_labels(labels) -> np.ndarray:
    lab = np.asarray(labels)
    if lab.dtype.kind in "US":
        lab = np.where(lab == "C", 1, np.where(lab == "NC", 0, -1))
    lab = lab.astype(int)
    if ((lab != 0) & (lab != 1)).any():
        raise ValueError("labels must be 1 (contact) or 0 (no contact)")
    return lab


def pointwise_metrics(probabilities, labels, threshold: float = 0.8) -> PointwiseReport:
    """Per-class precision and recall of ``P(C) >= threshold`` against ``labels``."""
    p = np.asarray(probabilities, dtype=float)
    lab = _as_labels(labels)
    if p.shape != lab.shape or p.ndim != 1:
        raise ValueError(f"probabilities and labels differ in shape: {p.shape} vs {lab.shape}")
    if p.size == 0:
        raise ValueError("need at least one step")
    pred = p >= threshold
    truth = lab == 1
    tp = int((pred & truth).sum())
    fp = int((pred & ~truth).sum())
    fn = int((~pred & truth).sum())
    tn = int((~pred & ~truth).sum())
    return PointwiseReport(ClassCounts(tp, fp, fn, tn), ClassCounts(tn, fn, fp, tp), threshold)


def detect_events(probabilities, threshold: float = 0.8, sample_rate: float = 200.0,
                  timestamps=None) -> list[tuple[float, str]]:
    """Edges of the thresholded contact sequence.

    A step whose decision differs from the previous step's produces an
    event stamped with that step's time: ``takeoff`` for C to NC,
    ``landing`` for NC to C.  No debouncing.
    """
    p = np.asarray(probabilities, dtype=float)
    if p.size == 0:
        raise ValueError("need at least one step")
    if timestamps is None:
        timestamps = np.arange(p.size) / sample_rate
    ts = np.asarray(timestamps, dtype=float)
    state = (p >= threshold).astype(np.int8)
    steps = np.flatnonzero(np.diff(state)) + 1
    return [(float(ts[i]), "landing" if state[i] else "takeoff") for i in steps]


def states_from_events(events, initial_contact: bool, n_steps: int, sample_rate: float = 200.0,
                       timestamps=None) -> np.ndarray:
    """Rebuild the binary decision sequence from an initial state and an event list."""
    if timestamps is None:
        timestamps = np.arange(n_steps) / sample_rate
    ts = np.asarray(timestamps, dtype=float)
    out = np.empty(n_steps, dtype=np.int8)
    current = int(initial_contact)
    start = 0
    for time, kind in events:
        i = int(np.searchsorted(ts, time, side="left"))
        out[start:i] = current
        current = 1 if kind == "landing" else 0
        start = i
    out[start:] = current
    return out


@dataclass
class KindReport:
    matches: list = field(default_factory=list)  # (true_time, detected_time)
    false_positives: list = field(default_factory=list)
    false_negatives: list = field(default_factory=list)
    excluded: list = field(default_factory=list)
    n_true: int = 0

    @property
    def precision(self) -> float | None:
        return _ratio(len(self.matches), len(self.matches) + len(self.false_positives))

    @property
    def recall(self) -> float | None:
        return _ratio(len(self.matches), self.n_true)


@dataclass
class EventReport:
    kinds: dict
    window: float

    def __getitem__(self, kind: str) -> KindReport:
        return self.kinds[kind]

    def to_dict(self) -> dict:
        return {
            "window_s": self.window,
            **{k: {"precision": r.precision, "recall": r.recall, "n_true": r.n_true,
                   "n_matched": len(r.matches), "n_false_positive": len(r.false_positives),
                   "n_excluded": len(r.excluded), "matches": [list(m) for m in r.matches],
                   "false_positives": list(r.false_positives)}
               for k, r in self.kinds.items()},
        }


def match_events(detected, truth, window: float = MATCH_WINDOW) -> EventReport:
    """Match detected transitions to ground-truth transitions.

    Each true event claims the earliest detection of its kind in the closed
    interval ``[t, t + window]``.  Unclaimed detections that fall inside the
    window following any true transition are excluded from scoring; the
    rest count as false positives.
    """
    detected = sorted((float(t), k) for t, k in detected)
    truth = sorted((float(t), k) for t, k in truth)
    kinds = {k: KindReport() for k in KINDS}
    for _, k in detected + truth:
        kinds.setdefault(k, KindReport())
    claimed = set()
    true_times = np.array([t for t, _ in truth])
    for t_true, kind in truth:
        rep = kinds[kind]
        rep.n_true += 1
        hit = None
        for idx, (t_det, k_det) in enumerate(detected):
            if idx in claimed or k_det != kind:
                continue
            if t_det > t_true + window:
                break
            if t_det >= t_true:
                hit = idx
                break
        if hit is None:
            rep.false_negatives.append(t_true)
        else:
            claimed.add(hit)
            rep.matches.append((t_true, detected[hit][0]))
    for idx, (t_det, kind) in enumerate(detected):
        if idx in claimed:
            continue
        covered = bool(true_times.size) and bool(((t_det >= true_times) & (t_det <= true_times + window)).any())
        (kinds[kind].excluded if covered else kinds[kind].false_positives).append(t_det)
    return EventReport(kinds, window)


@dataclass(frozen=True)
class KindLatency:
    mean_ms: float | None
    std_ms: float | None
    count: int


def latency_stats(report: EventReport) -> dict:
    """Mean and population standard deviation of detection delay, in ms, per kind."""
    out = {}
    for kind, rep in report.kinds.items():
        lat = np.array([(det - true) * 1000.0 for true, det in rep.matches])
        if lat.size == 0:
            out[kind] = KindLatency(None, None, 0)
        else:
            out[kind] = KindLatency(float(lat.mean()), float(lat.std()), int(lat.size))
    return out


@dataclass
class SweepReport:
    torque_sigmas: list
    accel_sigmas: list
    success: np.ndarray  # (len(torque_sigmas), len(accel_sigmas))
    episodes_per_cell: int
    threshold: float
    scenario: dict

    def to_dict(self) -> dict:
        return {
            "torque_sigmas": list(self.torque_sigmas),
            "accel_sigmas": list(self.accel_sigmas),
            "success": self.success.tolist(),
            "episodes_per_cell": self.episodes_per_cell,
            "threshold": self.threshold,
            "scenario": self.scenario,
        }


def episode_seed(base_seed: int, episode: int) -> int:
    # every cell replays the same episodes, only the noise scale changes
    return int(base_seed) * 100_003 + episode


def sweep_cell(base: ScenarioConfig, torque_sigma: float, accel_sigma: float, episodes: int,
               model_c: KdeModel, model_nc: KdeModel, config: EstimatorConfig) -> float:
    """Mean success rate over ``episodes`` noisy traces at one noise level."""
    rates = []
    for e in range(episodes):
        trace = generate_trace(base.with_noise(torque_sigma, accel_sigma, seed=episode_seed(base.seed, e)))
        run = run_filter(trace.acc_z, trace.torques, model_c, model_nc, config)
        rates.append(pointwise_metrics(run.p_contact, trace.labels, config.threshold).success_rate)
    return float(np.mean(rates))


def _cell_job(args):
    i, j, *rest = args
    return i, j, sweep_cell(*rest)


def noise_sweep(base: ScenarioConfig, torque_sigmas, accel_sigmas, episodes_per_cell: int,
                model_c: KdeModel, model_nc: KdeModel, config: EstimatorConfig | None = None,
                jobs: int = 1, done: dict | None = None, on_cell=None) -> SweepReport:
    """Success-rate heatmap over torque and acceleration noise levels.

    ``done`` maps ``(i, j)`` to already computed cells (for resuming) and
    ``on_cell(i, j, value)`` is called as each new cell completes.
    """
    config = config or EstimatorConfig()
    if episodes_per_cell < 1:
        raise ValueError("episodes_per_cell must be >= 1")
    torque_sigmas = [float(s) for s in torque_sigmas]
    accel_sigmas = [float(s) for s in accel_sigmas]
    for s in torque_sigmas + accel_sigmas:
        if not (math.isfinite(s) and s >= 0):
            raise ValueError(f"noise levels must be finite and non-negative, got {s}")
    grid = np.full((len(torque_sigmas), len(accel_sigmas)), np.nan)
    for (i, j), v in (done or {}).items():
        grid[i, j] = v
    todo = [(i, j, base, ts, acs, episodes_per_cell, model_c, model_nc, config)
            for i, ts in enumerate(torque_sigmas) for j, acs in enumerate(accel_sigmas)
            if np.isnan(grid[i, j])]
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = pool.map(_cell_job, todo)
            for i, j, v in results:
                grid[i, j] = v
                if on_cell:
                    on_cell(i, j, v)
    else:
        for job in todo:
            i, j, v = _cell_job(job)
            grid[i, j] = v
            if on_cell:
                on_cell(i, j, v)
    return SweepReport(torque_sigmas, accel_sigmas, grid, episodes_per_cell, config.threshold, base.to_dict())
