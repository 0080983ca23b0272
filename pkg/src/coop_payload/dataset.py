"""Line-delimited dataset files.

Layout: the first line is a JSON header; every following line is one JSON
record for one robot at one timestep::

    {"t": 0.01, "robot": 1, "q": [w, x, y, z], "p": [x, y, z],
     "m": [mx, my, mz], "f": [fx, fy, fz],
     "twist": [...6...], "twist_rate": [...6...]}      # optional derived block

Floats are written with 17 significant digits so a write/read cycle is
bit-exact. Robots are numbered from 1; records are ordered by time, then
robot.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import geom
from .errors import DatasetError

SCHEMA = "coop-payload-dataset"
SCHEMA_VERSION = 1
QUAT_NORM_TOL = 1e-9


def _num(x) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise DatasetError(f"non-finite value {x} cannot be serialized")
    return format(x, ".17g")


def dumps(obj) -> str:
    """JSON text with every float at 17 significant digits."""
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist())
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


@dataclass(frozen=True)
class DatasetFile:
    """In-memory image of a dataset file.

    Robot-indexed arrays are stacked ``(N, Q, ...)``; orientation is kept as
    the stored unit quaternion and converted at the point of use.
    """

    sample_rate: float
    times: np.ndarray
    quat: np.ndarray
    pos: np.ndarray
    wrench: np.ndarray
    twist: Optional[np.ndarray] = None
    twist_rate: Optional[np.ndarray] = None
    gravity_home: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    scenario_hash: str = ""
    ground_truth: Optional[dict] = None
    meta: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @property
    def n_robots(self) -> int:
        return self.quat.shape[0]

    def __len__(self) -> int:
        return len(self.times)

    @property
    def has_derived(self) -> bool:
        return self.twist is not None and self.twist_rate is not None

    @property
    def rotations(self) -> np.ndarray:
        return geom.rot_from_quat(self.quat)

    @property
    def header(self) -> dict:
        return {
            "schema": SCHEMA,
            "schema_version": self.schema_version,
            "n_robots": self.n_robots,
            "sample_rate": float(self.sample_rate),
            "n_samples": len(self),
            "scenario_hash": self.scenario_hash,
            "gravity_home": np.asarray(self.gravity_home, dtype=float).tolist(),
            "has_derived": self.has_derived,
            "ground_truth": self.ground_truth,
            "meta": self.meta,
        }

    def validate(self) -> None:
        t = np.asarray(self.times)
        if t.ndim != 1 or len(t) < 1:
            raise DatasetError("dataset has no samples")
        if np.any(np.diff(t) <= 0):
            raise DatasetError("timestamps must be strictly increasing")
        N, Q = self.quat.shape[:2]
        for name in ("pos", "wrench", "twist", "twist_rate"):
            a = getattr(self, name)
            if a is not None and a.shape[:2] != (N, Q):
                raise DatasetError(f"{name} has shape {a.shape}, expected ({N}, {Q}, ...)")
        err = np.abs(np.linalg.norm(self.quat, axis=-1) - 1.0).max()
        if err > QUAT_NORM_TOL:
            raise DatasetError(f"quaternion norm off by {err:.2e}")

    def slice(self, start: int, stop: int) -> "DatasetFile":
        cut = lambda a: None if a is None else a[:, start:stop]
        return replace(
            self,
            times=self.times[start:stop],
            quat=cut(self.quat),
            pos=cut(self.pos),
            wrench=cut(self.wrench),
            twist=cut(self.twist),
            twist_rate=cut(self.twist_rate),
        )

    def equals(self, other: "DatasetFile") -> bool:
        """Exact (bitwise) equality of every field."""
        if self.header != other.header:
            return False
        for name in ("times", "quat", "pos", "wrench", "twist", "twist_rate"):
            a, b = getattr(self, name), getattr(other, name)
            if (a is None) != (b is None):
                return False
            if a is not None and not np.array_equal(a, b):
                return False
        return True


def from_ground_truth(gt, include_derived: bool = False, include_truth: bool = True) -> DatasetFile:
    """Package a simulated dataset's raw streams as a :class:`DatasetFile`.

    ``include_derived`` attaches the simulator's exact twists and twist
    rates of the reporting frames as the derived block, standing in for
    ideal rate sensors.
    """
    from .sim import payload_to_dict, scenario_hash

    sc = gt.scenario
    truth = payload_to_dict(sc.payload) if include_truth else None
    ds = DatasetFile(
        sample_rate=float(sc.sample_rate),
        times=np.array(gt.times, dtype=float),
        quat=geom.quat_from_rot(gt.raw_R),
        pos=np.array(gt.raw_p, dtype=float),
        wrench=np.array(gt.raw_wrench, dtype=float),
        twist=np.array(gt.raw_twist) if include_derived else None,
        twist_rate=np.array(gt.raw_twist_rate) if include_derived else None,
        gravity_home=np.array(gt.gravity_home, dtype=float),
        scenario_hash=scenario_hash(sc),
        ground_truth=truth,
        meta={"source": "simulator", "scenario": sc.name, "seed": int(sc.seed)},
    )
    ds.validate()
    return ds


def write_dataset(ds: DatasetFile, path_or_stream) -> None:
    ds.validate()
    own = isinstance(path_or_stream, (str, Path))
    fh = open(path_or_stream, "w") if own else path_or_stream
    try:
        fh.write(dumps(ds.header) + "\n")
        N = ds.n_robots
        fmt = lambda a: "[" + ",".join(_num(x) for x in a) + "]"
        for q, t in enumerate(ds.times):
            ts = _num(t)
            for i in range(N):
                parts = [
                    f'"t":{ts}',
                    f'"robot":{i + 1}',
                    f'"q":{fmt(ds.quat[i, q])}',
                    f'"p":{fmt(ds.pos[i, q])}',
                    f'"m":{fmt(ds.wrench[i, q, :3])}',
                    f'"f":{fmt(ds.wrench[i, q, 3:])}',
                ]
                if ds.has_derived:
                    parts.append(f'"twist":{fmt(ds.twist[i, q])}')
                    parts.append(f'"twist_rate":{fmt(ds.twist_rate[i, q])}')
                fh.write("{" + ",".join(parts) + "}\n")
    finally:
        if own:
            fh.close()


def read_dataset(path_or_stream) -> DatasetFile:
    own = isinstance(path_or_stream, (str, Path))
    fh = open(path_or_stream) if own else path_or_stream
    try:
        try:
            header = json.loads(fh.readline())
        except json.JSONDecodeError as exc:
            raise DatasetError(f"bad header line: {exc}") from None
        if header.get("schema") != SCHEMA:
            raise DatasetError(f"not a {SCHEMA} file")
        if header.get("schema_version") != SCHEMA_VERSION:
            raise DatasetError(f"unsupported schema version {header.get('schema_version')}")
        N = int(header["n_robots"])
        Q = int(header["n_samples"])
        derived = bool(header.get("has_derived", False))
        times = np.empty(Q)
        quat = np.empty((N, Q, 4))
        pos = np.empty((N, Q, 3))
        wrench = np.empty((N, Q, 6))
        twist = np.empty((N, Q, 6)) if derived else None
        rate = np.empty((N, Q, 6)) if derived else None
        seen = np.zeros((N, Q), dtype=bool)
        lines = 0
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            rec = json.loads(line)
            q, i = divmod(lines, N)
            lines += 1
            if q >= Q:
                raise DatasetError(f"line {lineno}: more records than declared")
            r = int(rec["robot"]) - 1
            if r != i:
                raise DatasetError(f"line {lineno}: expected robot {i + 1}, found {r + 1}")
            if i == 0:
                times[q] = rec["t"]
            elif rec["t"] != times[q]:
                raise DatasetError(f"line {lineno}: robot {r + 1} timestamp differs at index {q}")
            quat[r, q] = rec["q"]
            pos[r, q] = rec["p"]
            wrench[r, q, :3] = rec["m"]
            wrench[r, q, 3:] = rec["f"]
            if derived:
                twist[r, q] = rec["twist"]
                rate[r, q] = rec["twist_rate"]
            seen[r, q] = True
        if not seen.all():
            raise DatasetError(f"expected {N * Q} records, found {lines}")
    finally:
        if own:
            fh.close()
    ds = DatasetFile(
        sample_rate=float(header["sample_rate"]),
        times=times,
        quat=quat,
        pos=pos,
        wrench=wrench,
        twist=twist,
        twist_rate=rate,
        gravity_home=np.array(header.get("gravity_home", [0.0, 0.0, -9.81]), dtype=float),
        scenario_hash=header.get("scenario_hash", ""),
        ground_truth=header.get("ground_truth"),
        meta=header.get("meta", {}),
        schema_version=int(header["schema_version"]),
    )
    ds.validate()
    return ds


def dataset_to_string(ds: DatasetFile) -> str:
    buf = io.StringIO()
    write_dataset(ds, buf)
    return buf.getvalue()
