"""Gaussian kernel density estimates over absolute (knee, wheel) torques.

A fitted :class:`KdeModel` keeps a regular ``R x R`` lattice of log-density
values and answers queries by bilinear interpolation in log space, which
keeps every query O(1) regardless of the training-set size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import logsumexp

from .errors import FitError, TraceFormatError

AXES = ("tau_knee", "tau_wheel")
STATES = ("C", "NC")
GRID_MARGIN = 3.0  # bandwidths added around the data bounding box
DENSITY_FLOOR = 1e-12


@dataclass(frozen=True)
class TorqueSample:
    """Absolute knee and wheel torques (Nm) at one time step."""

    tau_knee: float
    tau_wheel: float

    def __post_init__(self):
        for name in AXES:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
            if value < 0:
                raise ValueError(f"{name} must be an absolute torque (>= 0), got {value}")

    @classmethod
    def from_signed(cls, tau_knee: float, tau_wheel: float) -> "TorqueSample":
        return cls(abs(float(tau_knee)), abs(float(tau_wheel)))

    def as_array(self) -> np.ndarray:
        return np.array([self.tau_knee, self.tau_wheel])


def scott_bandwidth(n: int, d: int, marginal_stddevs) -> float:
    """Isotropic Scott's-rule bandwidth ``n**(-1/(d+4))`` times the geometric-mean stddev."""
    if n < 2:
        raise FitError(f"Scott's rule needs at least 2 samples, got {n}")
    if d < 1:
        raise FitError(f"dimension must be >= 1, got {d}")
    sd = np.atleast_1d(np.asarray(marginal_stddevs, dtype=float))
    if sd.size != d:
        raise FitError(f"expected {d} standard deviations, got {sd.size}")
    bad = np.flatnonzero(~(sd > 0) | ~np.isfinite(sd))
    if bad.size:
        axis = AXES[bad[0]] if d == len(AXES) else f"axis {bad[0]}"
        raise FitError(f"degenerate data: zero or invalid spread along {axis}")
    return float(n ** (-1.0 / (d + 4)) * np.exp(np.mean(np.log(sd))))


def exact_log_density(points: np.ndarray, bandwidth: float, queries: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Log of the isotropic Gaussian KDE evaluated exactly at ``queries``."""
    points = np.asarray(points, dtype=float)
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    n, d = points.shape
    norm = math.log(n) + 0.5 * d * math.log(2.0 * math.pi * bandwidth * bandwidth)
    out = np.empty(len(queries))
    step = max(1, chunk * 256 // max(n, 1))
    for start in range(0, len(queries), step):
        q = queries[start:start + step]
        d2 = ((q[:, None, :] - points[None, :, :]) ** 2).sum(axis=-1)
        out[start:start + step] = logsumexp(-0.5 * d2 / (bandwidth * bandwidth), axis=1) - norm
    return out


def _grid_log_density(points: np.ndarray, h: float, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    # separable Gaussian: sum_p kx[p, i] * ky[p, j] is a single matrix product
    kx = np.exp(-0.5 * ((xs[None, :] - points[:, :1]) / h) ** 2)
    ky = np.exp(-0.5 * ((ys[None, :] - points[:, 1:]) / h) ** 2)
    raw = kx.T @ ky
    with np.errstate(divide="ignore"):
        logs = np.log(raw)
    logs -= math.log(len(points)) + math.log(2.0 * math.pi * h * h)
    # below ~1e-250 the product may have lost terms to underflow; redo those exactly
    lost = ~(raw > 1e-250)
    if lost.any():
        ii, jj = np.nonzero(lost)
        logs[ii, jj] = exact_log_density(points, h, np.column_stack((xs[ii], ys[jj])))
    return logs


def _curvature_corrected(logs: np.ndarray) -> np.ndarray:
    """Shift node values so bilinear interpolation is unbiased on average.

    Linear interpolation of a function with second derivative ``f''`` errs
    by ``f'' dx**2 t(1-t)/2`` inside a cell; subtracting a twelfth of the
    discrete second difference from every node cancels the cell-mean of
    that error.  Boundary nodes get no correction along the outward axis.
    """
    padded = np.pad(logs, 1, mode="reflect", reflect_type="odd")
    d2x = padded[2:, 1:-1] - 2.0 * logs + padded[:-2, 1:-1]
    d2y = padded[1:-1, 2:] - 2.0 * logs + padded[1:-1, :-2]
    return logs - (d2x + d2y) / 12.0


def _snap(f: np.ndarray) -> np.ndarray:
    # coordinates rebuilt from node indices carry rounding noise; make nodes exact
    r = np.rint(f)
    return np.where(np.abs(f - r) < 1e-9, r, f)


@dataclass(frozen=True, eq=False)
class KdeModel:
    """Fitted KDE for one contact state plus its log-density lookup grid.

    ``grid[i, j]`` is the node value at ``(lower[0] + i*dx, lower[1] + j*dy)``.
    ``points`` is only present on freshly fitted models; the grid alone is
    enough to answer queries.
    """

    state: str
    bandwidth: float
    lower: tuple
    upper: tuple
    grid: np.ndarray = field(repr=False)
    sample_count: int
    floor: float = DENSITY_FLOOR
    points: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.state not in STATES:
            raise FitError(f"state must be one of {STATES}, got {self.state!r}")
        if not self.bandwidth > 0:
            raise FitError("bandwidth must be positive")
        if self.sample_count < 2:
            raise FitError("a KDE needs at least two samples")
        if not all(lo < hi for lo, hi in zip(self.lower, self.upper)):
            raise FitError(f"grid bounds not ordered: {self.lower} .. {self.upper}")
        g = np.asarray(self.grid, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] < 2:
            raise FitError(f"grid must be square with resolution >= 2, got shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise FitError("grid contains non-finite log-densities")
        g.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "_log_floor", math.log(self.floor))
        object.__setattr__(self, "_step", tuple((hi - lo) / (g.shape[0] - 1) for lo, hi in zip(self.lower, self.upper)))
        r = g.shape[0]
        step_x, step_y = self._step
        # outward log-slopes along each edge, used to extend the density past the grid
        object.__setattr__(self, "_edge_slopes", (
            (g[1, :] - g[0, :]) / step_x, (g[r - 1, :] - g[r - 2, :]) / step_x,
            (g[:, 1] - g[:, 0]) / step_y, (g[:, r - 1] - g[:, r - 2]) / step_y,
        ))

    @property
    def resolution(self) -> int:
        return self.grid.shape[0]

    def node_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        r = self.resolution
        return (self.lower[0] + np.arange(r) * self._step[0], self.lower[1] + np.arange(r) * self._step[1])

    def log_density(self, queries) -> np.ndarray:
        """Floored log-density at each row of ``queries`` (shape ``(M, 2)``)."""
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        r = self.resolution
        g = self.grid
        (lo_x, lo_y), (hi_x, hi_y) = self.lower, self.upper
        cx = np.clip(q[:, 0], lo_x, hi_x)
        cy = np.clip(q[:, 1], lo_y, hi_y)
        fx = _snap((cx - lo_x) / self._step[0])
        fy = _snap((cy - lo_y) / self._step[1])
        i = np.clip(np.floor(fx).astype(np.intp), 0, r - 2)
        j = np.clip(np.floor(fy).astype(np.intp), 0, r - 2)
        tx = fx - i
        ty = fy - j
        out = (g[i, j] * (1 - tx) * (1 - ty) + g[i + 1, j] * tx * (1 - ty)
               + g[i, j + 1] * (1 - tx) * ty + g[i + 1, j + 1] * tx * ty)
        dx = q[:, 0] - cx
        dy = q[:, 1] - cy
        outside = (dx != 0) | (dy != 0)
        if outside.any():
            out = out + self._tail(dx, dy, fx, fy, outside)
        return np.maximum(out, self._log_floor)

    def _tail(self, dx, dy, fx, fy, outside):
        # Gaussian decay beyond the edge: log f(x) >= log f(x_c) + slope.d - |d|^2 / 2h^2
        sx_lo, sx_hi, sy_lo, sy_hi = self._edge_slopes
        nodes = np.arange(self.resolution)
        extra = np.zeros_like(dx)
        m = outside
        slope_x = np.where(dx[m] > 0, np.interp(fy[m], nodes, sx_hi), np.interp(fy[m], nodes, sx_lo))
        slope_y = np.where(dy[m] > 0, np.interp(fx[m], nodes, sy_hi), np.interp(fx[m], nodes, sy_lo))
        h2 = self.bandwidth * self.bandwidth
        extra[m] = (np.minimum(slope_x * dx[m], 0.0) + np.minimum(slope_y * dy[m], 0.0)
                    - 0.5 * (dx[m] ** 2 + dy[m] ** 2) / h2)
        return extra

    def __call__(self, m) -> float:
        return likelihood(self, m)

    def grid_mass(self) -> float:
        """Trapezoidal integral of ``exp(grid)`` over the grid box."""
        dens = np.exp(self.grid)
        return float(trapezoid(trapezoid(dens, dx=self._step[1], axis=1), dx=self._step[0]))

    def to_dict(self) -> dict:
        return {
            "state": self.state,
            "bandwidth": float(self.bandwidth),
            "lower": [float(v) for v in self.lower],
            "upper": [float(v) for v in self.upper],
            "resolution": int(self.resolution),
            "sample_count": int(self.sample_count),
            "floor": float(self.floor),
            "log_density": [float(v) for v in self.grid.ravel(order="C")],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KdeModel":
        try:
            r = int(data["resolution"])
            grid = np.asarray(data["log_density"], dtype=float)
            if grid.size != r * r:
                raise TraceFormatError(f"model grid has {grid.size} values, expected {r * r}")
            return cls(
                state=data["state"],
                bandwidth=float(data["bandwidth"]),
                lower=tuple(float(v) for v in data["lower"]),
                upper=tuple(float(v) for v in data["upper"]),
                grid=grid.reshape(r, r),
                sample_count=int(data["sample_count"]),
                floor=float(data.get("floor", DENSITY_FLOOR)),
            )
        except KeyError as exc:
            raise TraceFormatError(f"model entry missing field {exc}") from None


def as_points(points) -> np.ndarray:
    """Coerce a sequence of :class:`TorqueSample` or an ``(n, 2)`` array."""
    if isinstance(points, np.ndarray):
        arr = points.astype(float, copy=False)
    else:
        seq = list(points)
        if seq and isinstance(seq[0], TorqueSample):
            arr = np.array([[p.tau_knee, p.tau_wheel] for p in seq], dtype=float)
        else:
            arr = np.asarray(seq, dtype=float)
    if arr.size == 0:
        arr = arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise FitError(f"torque samples must have shape (n, 2), got {arr.shape}")
    return arr


def fit_kde(points, state: str, grid_resolution: int = 200, bandwidth: float | None = None,
            floor: float = DENSITY_FLOOR) -> KdeModel:
    """Fit a Gaussian KDE to absolute torque samples and tabulate it.

    The bandwidth follows Scott's rule unless given explicitly.  The grid
    spans the data bounding box widened by three bandwidths on every side.
    """
    pts = as_points(points)
    n = len(pts)
    if n < 2:
        raise FitError(f"need at least 2 samples to fit state {state!r}, got {n}")
    finite = np.isfinite(pts)
    if not finite.all():
        axis = AXES[int(np.flatnonzero(~finite.all(axis=0))[0])]
        raise FitError(f"non-finite values along {axis}")
    if (pts < 0).any():
        axis = AXES[int(np.flatnonzero((pts < 0).any(axis=0))[0])]
        raise FitError(f"negative torque along {axis}; take absolute values before fitting")
    if bandwidth is None:
        bandwidth = scott_bandwidth(n, 2, pts.std(axis=0, ddof=1))
    elif not bandwidth > 0:
        raise FitError(f"bandwidth must be positive, got {bandwidth}")
    h = float(bandwidth)
    lower = pts.min(axis=0) - GRID_MARGIN * h
    upper = pts.max(axis=0) + GRID_MARGIN * h
    xs = np.linspace(lower[0], upper[0], grid_resolution)
    ys = np.linspace(lower[1], upper[1], grid_resolution)
    logs = _curvature_corrected(_grid_log_density(pts, h, xs, ys))
    return KdeModel(state=state, bandwidth=h, lower=tuple(map(float, lower)), upper=tuple(map(float, upper)),
                    grid=logs, sample_count=n, floor=floor, points=pts.copy())


def log_likelihood(model: KdeModel, m: TorqueSample) -> float:
    return float(model.log_density(np.array([[m.tau_knee, m.tau_wheel]]))[0])


def likelihood(model: KdeModel, m: TorqueSample) -> float:
    """Density ``f_S(m)`` in 1/Nm^2, never below the model's floor."""
    return math.exp(log_likelihood(model, m))
