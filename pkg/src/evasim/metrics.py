"""Per-trial measurements and the trial trace container."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import VehicleParams, VehicleState
from .scenario import point_to_vehicle_distance

log = logging.getLogger(__name__)

SLIP_BAND_DEG = 0.1

# Column order of the trace CSV. Angles in degrees, ISO signs (left positive).
TRACE_COLUMNS = (
    "t",
    "x",
    "y",
    "yaw_deg",
    "vx",
    "vy",
    "yaw_rate",
    "beta_deg",
    "ay",
    "swa_deg",
    "assist_torque",
    "driver_torque",
    "ped_x",
    "ped_y",
    "ped_visible",
    "phase",
    "trajectory",
)
_TEXT_COLUMNS = {"phase", "trajectory"}


class UndefinedMetric(ValueError):
    """A metric has no valid samples (e.g. every slip sample inside the exclusion band)."""


@dataclass
class TrialTrace:
    """Fixed-rate record of one trial; ``t`` is relative to the pedestrian spawn instant."""

    columns: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"trace columns differ in length: {lengths}")

    def __len__(self):
        return len(self.columns["t"])

    def __getitem__(self, name) -> np.ndarray:
        return self.columns[name]

    @property
    def has_pedestrian(self) -> bool:
        return bool(np.any(np.isfinite(self.columns["ped_x"])))

    def head(self, n: int) -> "TrialTrace":
        return TrialTrace({k: v[:n] for k, v in self.columns.items()}, dict(self.meta))

    def truncated(self, vehicle_params: VehicleParams | None = None) -> "TrialTrace":
        """Cut the trace just before the car's front reaches the pedestrian's station."""
        if not self.has_pedestrian:
            return self
        length = (vehicle_params or VehicleParams()).length
        front = self["x"] + length / 2 * np.cos(np.radians(self["yaw_deg"]))
        passed = np.isfinite(self["ped_x"]) & (front >= self["ped_x"])
        idx = np.flatnonzero(passed)
        return self if idx.size == 0 else self.head(int(idx[0]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        cols = [self.columns[c] for c in TRACE_COLUMNS]
        for row in zip(*cols):
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, meta: dict | None = None) -> "TrialTrace":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace columns: {header}")
        cols = {}
        for j, name in enumerate(header):
            vals = [r[j] for r in body]
            cols[name] = np.array(vals, dtype=object if name in _TEXT_COLUMNS else float)
        return cls(cols, meta or {})


def _fmt(v) -> str:
    v = float(v)
    if math.isnan(v):
        return ""
    return repr(v)


@dataclass(frozen=True)
class TrialMetrics:
    avg_abs_slip: float | None
    min_distance: float | None
    max_swa: float
    response_time: float | None
    collided: bool
    n_slip_samples: int


def filter_slip(series) -> np.ndarray:
    """Drop slip samples strictly inside (-0.1°, 0.1°); the band edges are kept."""
    arr = np.asarray(series, dtype=float)
    return arr[(arr <= -SLIP_BAND_DEG) | (arr >= SLIP_BAND_DEG)]


def avg_abs_slip(retained) -> float:
    arr = np.asarray(retained, dtype=float)
    if arr.size == 0:
        raise UndefinedMetric("undefined slip metric: no samples outside the exclusion band")
    return float(np.mean(np.abs(arr)))


def response_time(t, swa_right_deg, threshold: float = 5.0, epoch: float = 0.0) -> float | None:
    """Seconds from ``epoch`` until the rightward steering angle first reaches ``threshold``.

    ``swa_right_deg`` is positive to the right. Returns None if never reached.
    """
    t = np.asarray(t, dtype=float)
    swa = np.asarray(swa_right_deg, dtype=float)
    hit = np.flatnonzero((t >= epoch - 1e-9) & (swa >= threshold))
    if hit.size == 0:
        return None
    return float(t[hit[0]] - epoch)


def max_swa(swa_deg) -> float:
    arr = np.asarray(swa_deg, dtype=float)
    if arr.size == 0:
        raise ValueError("empty steering series")
    return float(np.max(np.abs(arr)))


def min_pedestrian_distance(trace: TrialTrace, vehicle_params: VehicleParams | None = None) -> float | None:
    params = vehicle_params or VehicleParams()
    best = None
    for x, y, yaw, px, py in zip(trace["x"], trace["y"], trace["yaw_deg"], trace["ped_x"], trace["ped_y"]):
        if not math.isfinite(px):
            continue
        d = point_to_vehicle_distance(VehicleState(x=x, y=y, yaw=math.radians(yaw)), params, (px, py))
        best = d if best is None else min(best, d)
    return best


def crossing_instant_distance(trace: TrialTrace, vehicle_params: VehicleParams | None = None) -> float | None:
    """Distance at the instant the car's front reaches the pedestrian's station.

    The truncated trace stops less than one step short of that instant; the last
    pose is carried forward at constant body velocity to close the gap. Without
    this, a car driving straight into the pedestrian would never log contact.
    """
    if not trace.has_pedestrian or len(trace) == 0:
        return None
    params = vehicle_params or VehicleParams()
    x, y, yaw = float(trace["x"][-1]), float(trace["y"][-1]), math.radians(float(trace["yaw_deg"][-1]))
    vx, vy = float(trace["vx"][-1]), float(trace["vy"][-1])
    px, py = float(trace["ped_x"][-1]), float(trace["ped_y"][-1])
    if not math.isfinite(px):
        return None
    c, s = math.cos(yaw), math.sin(yaw)
    front = x + params.length / 2 * c
    xdot = vx * c - vy * s
    tau = max(px - front, 0.0) / xdot if xdot > 0 else 0.0
    state = VehicleState(x=x + xdot * tau, y=y + (vx * s + vy * c) * tau, yaw=yaw)
    return point_to_vehicle_distance(state, params, (px, py))


def aligned_mean_lateral_accel(traces, dt: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise mean of ``ay`` over the common time window of all traces (t = 0 at spawn).

    ``dt`` defaults to the spacing of the first trace.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("no traces to average")
    keyed = []
    for tr in traces:
        t = np.asarray(tr["t"], dtype=float)
        if len(t) < 2:
            raise ValueError("trace too short to define a grid")
        step = t[1] - t[0]
        dt = step if dt is None else dt
        if abs(step - dt) > 1e-9:
            raise ValueError("traces are not on a common grid")
        keyed.append((np.rint(t / dt).astype(np.int64), np.asarray(tr["ay"], dtype=float)))
    lo = max(k[0] for k, _ in keyed)
    hi = min(k[-1] for k, _ in keyed)
    if hi < lo:
        raise ValueError("traces share no common time window")
    stack = np.vstack([a[(k >= lo) & (k <= hi)] for k, a in keyed])
    grid = np.arange(lo, hi + 1) * dt
    return grid, stack.mean(axis=0)


def trial_metrics(
    trace: TrialTrace,
    vehicle_params: VehicleParams | None = None,
    threshold: float = 5.0,
    epoch: float = 0.0,
) -> TrialMetrics:
    """All per-trial metrics, evaluated on the trace cut at the pedestrian's station."""
    tr = trace.truncated(vehicle_params)
    retained = filter_slip(tr["beta_deg"])
    try:
        slip = avg_abs_slip(retained)
    except UndefinedMetric:
        log.info("trial %s: no slip samples outside the exclusion band", trace.meta.get("trial_id"))
        slip = None
    dmin = None
    if tr.has_pedestrian:
        dmin = min(min_pedestrian_distance(tr, vehicle_params), crossing_instant_distance(tr, vehicle_params))
    rt = response_time(tr["t"], -np.asarray(tr["swa_deg"], dtype=float), threshold, epoch)
    return TrialMetrics(
        avg_abs_slip=slip,
        min_distance=dmin,
        max_swa=max_swa(tr["swa_deg"]),
        response_time=rt,
        collided=dmin is not None and dmin == 0.0,
        n_slip_samples=int(retained.size),
    )
