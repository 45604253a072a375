"""File formats: sensor traces, fitted models, run outputs and configs.

Traces are CSV with a ``#``-prefixed header block.  The first header line
carries the format version; floats are written with ``repr`` so a
write/read cycle is bit-exact::

    # contactbayes-trace version 1
    # sample_rate: 200.0
    # units: timestamp=s tau_knee_left=Nm ... acc_z=m/s^2
    # event: 3.0 takeoff
    timestamp,tau_knee_left,tau_knee_right,tau_wheel_left,tau_wheel_right,acc_z,label
    0.0,10.3,10.3,2.9,2.9,9.81,C

Every file is written to a temporary sibling first and renamed into place.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .bayes import FilterRun
from .config import EstimatorConfig
from .density import STATES, KdeModel, TorqueSample
from .errors import ConfigError, MissingLabelsError, TraceFormatError
from .synth import LabeledTrace, ScenarioConfig

TRACE_VERSION = 1
MODEL_VERSION = 1
RUN_VERSION = 1
CONFIG_ENV = "CONTACTBAYES_CONFIG"

TRACE_COLUMNS = ("timestamp", "tau_knee_left", "tau_knee_right", "tau_wheel_left", "tau_wheel_right",
                 "acc_z", "label")
TRACE_UNITS = {"timestamp": "s", "tau_knee_left": "Nm", "tau_knee_right": "Nm", "tau_wheel_left": "Nm",
               "tau_wheel_right": "Nm", "acc_z": "m/s^2"}
RUN_COLUMNS = ("timestamp", "p_contact", "decision", "p_switch", "median_bin")
LABEL_CODES = {"C": 1, "NC": 0, "": -1}
LABEL_NAMES = {1: "C", 0: "NC", -1: ""}


class TraceWarning(UserWarning):
    """A malformed row was skipped in lenient mode."""


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        os.chmod(tmp, 0o666 & ~_umask())
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass
class TraceFile:
    """Per-leg sensor log as stored on disk.

    ``labels`` uses 1 for contact, 0 for no contact and -1 for unlabeled
    rows; it is ``None`` when no row carries a label.
    """

    sample_rate: float
    timestamps: np.ndarray
    tau_knee: np.ndarray  # (T, 2): left, right
    tau_wheel: np.ndarray  # (T, 2)
    acc_z: np.ndarray
    labels: np.ndarray | None = None
    events: list = field(default_factory=list)
    line_numbers: np.ndarray | None = None

    def __len__(self) -> int:
        return self.timestamps.size

    @property
    def is_labeled(self) -> bool:
        return self.labels is not None and bool((self.labels >= 0).all())

    def torques(self, leg_mode: str = "mean") -> np.ndarray:
        """Absolute ``(T, 2)`` knee/wheel torques, aggregated over legs."""
        knee, wheel = np.abs(self.tau_knee), np.abs(self.tau_wheel)
        if leg_mode == "mean":
            return np.column_stack((knee.mean(axis=1), wheel.mean(axis=1)))
        if leg_mode in ("left", "right"):
            col = 0 if leg_mode == "left" else 1
            return np.column_stack((knee[:, col], wheel[:, col]))
        raise ConfigError(f"unknown leg mode {leg_mode!r}")

    def to_labeled(self, leg_mode: str = "mean") -> LabeledTrace:
        tq = self.torques(leg_mode)
        labels = self.labels if self.is_labeled else None
        return LabeledTrace(self.timestamps, tq[:, 0], tq[:, 1], self.acc_z, self.sample_rate,
                            labels, list(self.events))


def trace_file_from_labeled(trace: LabeledTrace) -> TraceFile:
    """Both legs carry the same torque, as in a symmetric simulation."""
    knee = np.column_stack((trace.tau_knee, trace.tau_knee))
    wheel = np.column_stack((trace.tau_wheel, trace.tau_wheel))
    labels = None if trace.labels is None else np.asarray(trace.labels, dtype=np.int8)
    return TraceFile(trace.sample_rate, trace.timestamps, knee, wheel, trace.acc_z, labels, list(trace.events))


def format_trace(trace: TraceFile) -> str:
    lines = [
        f"# contactbayes-trace version {TRACE_VERSION}",
        f"# sample_rate: {_fmt(trace.sample_rate)}",
        "# units: " + " ".join(f"{k}={v}" for k, v in TRACE_UNITS.items()),
    ]
    lines += [f"# event: {_fmt(t)} {kind}" for t, kind in trace.events]
    lines.append(",".join(TRACE_COLUMNS))
    labels = trace.labels if trace.labels is not None else np.full(len(trace), -1)
    for i in range(len(trace)):
        row = (trace.timestamps[i], trace.tau_knee[i, 0], trace.tau_knee[i, 1],
               trace.tau_wheel[i, 0], trace.tau_wheel[i, 1], trace.acc_z[i])
        lines.append(",".join(map(_fmt, row)) + "," + LABEL_NAMES[int(labels[i])])
    return "\n".join(lines) + "\n"


def write_trace(path, trace: TraceFile | LabeledTrace) -> None:
    if isinstance(trace, LabeledTrace):
        trace = trace_file_from_labeled(trace)
    atomic_write_text(path, format_trace(trace))


def _parse_header(lines: list[tuple[int, str]], path) -> tuple[float, list]:
    if not lines:
        raise TraceFormatError(f"{path}: empty file")
    first_no, first = lines[0]
    parts = first.lstrip("#").split()
    if len(parts) != 3 or parts[0] != "contactbayes-trace" or parts[1] != "version":
        raise TraceFormatError(f"{path}:{first_no}: missing 'contactbayes-trace version' header line")
    if parts[2] != str(TRACE_VERSION):
        raise TraceFormatError(f"{path}: trace version {parts[2]} not supported (expected {TRACE_VERSION})")
    sample_rate = None
    units = None
    events = []
    for no, line in lines[1:]:
        key, _, value = line.lstrip("#").strip().partition(":")
        value = value.strip()
        if key == "sample_rate":
            try:
                sample_rate = float(value)
            except ValueError:
                raise TraceFormatError(f"{path}:{no}: bad sample_rate {value!r}") from None
        elif key == "units":
            units = dict(item.split("=", 1) for item in value.split() if "=" in item)
        elif key == "event":
            try:
                t, kind = value.split()
                events.append((float(t), kind))
            except ValueError:
                raise TraceFormatError(f"{path}:{no}: bad event line {value!r}") from None
            if kind not in ("takeoff", "landing"):
                raise TraceFormatError(f"{path}:{no}: unknown event kind {kind!r}")
    if sample_rate is None or not (math.isfinite(sample_rate) and sample_rate > 0):
        raise TraceFormatError(f"{path}: header lacks a positive sample_rate")
    if units is None:
        raise TraceFormatError(f"{path}: header lacks a units line")
    for col, unit in TRACE_UNITS.items():
        if units.get(col) != unit:
            raise TraceFormatError(f"{path}: unit mismatch for {col}: expected {unit}, got {units.get(col)!r}")
    return sample_rate, events


def read_trace(path, strict: bool = True) -> TraceFile:
    """Parse and validate a trace file.

    In strict mode any malformed row is fatal.  In lenient mode it is
    skipped with a :class:`TraceWarning` naming the line.  Structural
    problems (version, units, timestamps) are fatal in both modes.
    """
    path = Path(path)
    text = path.read_text()
    header, body = [], []
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        (header if line.startswith("#") else body).append((no, line))
    sample_rate, events = _parse_header(header, path)
    if not body:
        raise TraceFormatError(f"{path}: no column header")
    col_no, col_line = body[0]
    if tuple(c.strip() for c in col_line.split(",")) != TRACE_COLUMNS:
        raise TraceFormatError(f"{path}:{col_no}: expected columns {','.join(TRACE_COLUMNS)}")
    values, labels, numbers = [], [], []
    for no, line in body[1:]:
        cells = line.split(",")
        problem = None
        if len(cells) != len(TRACE_COLUMNS):
            problem = f"expected {len(TRACE_COLUMNS)} fields, got {len(cells)}"
        else:
            try:
                row = [float(c) for c in cells[:6]]
            except ValueError:
                problem = "unparseable number"
            else:
                bad = [TRACE_COLUMNS[i] for i, v in enumerate(row) if not math.isfinite(v)]
                if bad:
                    problem = f"non-finite {', '.join(bad)}"
                elif cells[6].strip() not in LABEL_CODES:
                    problem = f"unknown label {cells[6].strip()!r}"
        if problem:
            msg = f"{path}:{no}: {problem}"
            if strict:
                raise TraceFormatError(msg)
            warnings.warn(msg + "; row skipped", TraceWarning, stacklevel=2)
            continue
        values.append(row)
        labels.append(LABEL_CODES[cells[6].strip()])
        numbers.append(no)
    if not values:
        raise TraceFormatError(f"{path}: no usable data rows")
    arr = np.array(values, dtype=float)
    ts = arr[:, 0]
    steps = np.diff(ts)
    if (steps <= 0).any():
        i = int(np.flatnonzero(steps <= 0)[0]) + 1
        raise TraceFormatError(f"{path}:{numbers[i]}: timestamps not strictly increasing")
    if steps.size:
        declared = 1.0 / sample_rate
        median = float(np.median(steps))
        if abs(median - declared) > 0.01 * declared:
            raise TraceFormatError(
                f"{path}: declared sample_rate {sample_rate} Hz disagrees with median timestamp step {median} s")
    lab = np.array(labels, dtype=np.int8)
    return TraceFile(sample_rate, ts, arr[:, 1:3].copy(), arr[:, 3:5].copy(), arr[:, 5].copy(),
                     None if (lab < 0).all() else lab, events, np.array(numbers))


def ingest(path, config: EstimatorConfig | None = None, strict: bool = True) -> Iterator[tuple[TorqueSample, float]]:
    """Per-step ``(TorqueSample, acc_z)`` pairs in time order.

    The whole file is validated before the first pair is produced, so a
    bad file never yields a partial stream.
    """
    config = config or EstimatorConfig()
    trace = read_trace(path, strict=strict)
    tq = trace.torques(config.leg_mode)
    pairs = [(TorqueSample(float(k), float(w)), float(a)) for (k, w), a in zip(tq, trace.acc_z)]
    return iter(pairs)


def require_labels(trace: TraceFile, path="trace") -> np.ndarray:
    if trace.labels is None:
        raise MissingLabelsError(f"{path}: trace carries no labels; evaluation needs ground truth")
    if (trace.labels < 0).any():
        raise MissingLabelsError(f"{path}: {int((trace.labels < 0).sum())} rows are unlabeled")
    return trace.labels


# models


def fit_provenance(contact: np.ndarray, no_contact: np.ndarray, config: EstimatorConfig) -> str:
    h = hashlib.sha256()
    for arr in (contact, no_contact):
        a = np.ascontiguousarray(arr, dtype="<f8")
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    h.update(config.digest().encode())
    return h.hexdigest()


@dataclass
class ModelFile:
    model_c: KdeModel
    model_nc: KdeModel
    config: EstimatorConfig
    fit_hash: str

    def to_json(self) -> str:
        doc = {
            "version": MODEL_VERSION,
            "format": "contactbayes-model",
            "config": self.config.to_dict(),
            "config_digest": self.config.digest(),
            "fit_hash": self.fit_hash,
            "models": {"C": self.model_c.to_dict(), "NC": self.model_nc.to_dict()},
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def write_model(path, model: ModelFile) -> None:
    atomic_write_text(path, model.to_json())


def read_model(path) -> ModelFile:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"{path}: not a JSON model file ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != "contactbayes-model":
        raise TraceFormatError(f"{path}: not a contactbayes model file")
    if doc.get("version") != MODEL_VERSION:
        raise TraceFormatError(f"{path}: model version {doc.get('version')} not supported")
    try:
        models = {s: KdeModel.from_dict(doc["models"][s]) for s in STATES}
        config = EstimatorConfig.from_dict(doc["config"])
        return ModelFile(models["C"], models["NC"], config, doc["fit_hash"])
    except KeyError as exc:
        raise TraceFormatError(f"{path}: model file missing {exc}") from None


# run outputs


def format_run(timestamps, run: FilterRun, threshold: float) -> str:
    lines = [f"# contactbayes-run version {RUN_VERSION}", f"# threshold: {_fmt(threshold)}", ",".join(RUN_COLUMNS)]
    for t, p, ps, med in zip(timestamps, run.p_contact, run.p_switch, run.median_bin):
        decision = "C" if p >= threshold else "NC"
        lines.append(f"{_fmt(t)},{_fmt(p)},{decision},{_fmt(ps)},{'' if math.isnan(med) else _fmt(med)}")
    return "\n".join(lines) + "\n"


@dataclass
class RunOutput:
    timestamps: np.ndarray
    p_contact: np.ndarray
    p_switch: np.ndarray
    median_bin: np.ndarray
    threshold: float


def read_run(path) -> RunOutput:
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines or lines[0].lstrip("#").split() != ["contactbayes-run", "version", str(RUN_VERSION)]:
        raise TraceFormatError(f"{path}: not a version {RUN_VERSION} run output")
    threshold = 0.8
    rows = []
    for no, line in enumerate(lines[1:], start=2):
        if line.startswith("#"):
            key, _, value = line.lstrip("#").partition(":")
            if key.strip() == "threshold":
                threshold = float(value)
            continue
        if line == ",".join(RUN_COLUMNS):
            continue
        cells = line.split(",")
        if len(cells) != len(RUN_COLUMNS):
            raise TraceFormatError(f"{path}:{no}: expected {len(RUN_COLUMNS)} fields")
        try:
            rows.append((float(cells[0]), float(cells[1]), float(cells[3]),
                         float(cells[4]) if cells[4] else math.nan))
        except ValueError:
            raise TraceFormatError(f"{path}:{no}: unparseable number") from None
    if not rows:
        raise TraceFormatError(f"{path}: no rows")
    arr = np.array(rows)
    return RunOutput(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], threshold)


# configs


@dataclass
class ExperimentConfig:
    """Top-level JSON config: ``{"estimator": {...}, "scenario": {...}, "sweep": {...}}``."""

    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    torque_sigmas: tuple = (0.0, 0.5, 1.0, 2.0, 10.0)
    accel_sigmas: tuple = (0.0, 0.5, 1.0, 2.0, 10.0)
    episodes_per_cell: int = 20

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - {"estimator", "scenario", "sweep"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        sweep = dict(data.get("sweep", {}))
        bad = set(sweep) - {"torque_sigmas", "accel_sigmas", "episodes_per_cell"}
        if bad:
            raise ConfigError(f"unknown sweep keys: {sorted(bad)}")
        out = cls(
            estimator=EstimatorConfig.from_dict(data.get("estimator", {})),
            scenario=ScenarioConfig.from_dict(data.get("scenario", {})),
        )
        if "torque_sigmas" in sweep:
            out.torque_sigmas = tuple(float(s) for s in sweep["torque_sigmas"])
        if "accel_sigmas" in sweep:
            out.accel_sigmas = tuple(float(s) for s in sweep["accel_sigmas"])
        if "episodes_per_cell" in sweep:
            out.episodes_per_cell = int(sweep["episodes_per_cell"])
        for s in out.torque_sigmas + out.accel_sigmas:
            if not (math.isfinite(s) and s >= 0):
                raise ConfigError(f"sweep noise levels must be finite and non-negative, got {s}")
        if out.episodes_per_cell < 1:
            raise ConfigError("episodes_per_cell must be >= 1")
        return out

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator.to_dict(),
            "scenario": self.scenario.to_dict(),
            "sweep": {"torque_sigmas": list(self.torque_sigmas), "accel_sigmas": list(self.accel_sigmas),
                      "episodes_per_cell": self.episodes_per_cell},
        }


def load_config(path=None) -> ExperimentConfig:
    """Read a JSON config; falls back to ``$CONTACTBAYES_CONFIG`` and then to defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return ExperimentConfig()
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    try:
        return ExperimentConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
